#include <doctest.h>

#include <cmath>
#include <vector>

#include "odm/diffusion.hpp"
#include "odm/rng.hpp"
#include "odm/sampler.hpp"
#include "odm/schedule.hpp"

using namespace odm;

namespace {

ArchConfig tiny_arch() {
    ArchConfig a;
    a.input_dim = 2;
    a.hidden = {8};
    a.class_embed_dim = 4;
    a.time_freqs = 2;
    a.num_classes = 3;
    return a;
}

DenoiserParams zeroed(const ArchConfig& a) {
    DenoiserParams p = init_params(a, static_cast<std::uint64_t>(0));
    for (Tensor* t : p.tensors())
        for (double& v : t->data) v = 0.0;
    return p;
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("guided_noise endpoints are exact and the blend is linear") {
    const Tensor c({2}, std::vector<double>{1.0, 2.0});
    const Tensor u({2}, std::vector<double>{3.0, -2.0});
    CHECK(bit_equal(guided_noise(c, u, 1.0), c));
    CHECK(bit_equal(guided_noise(c, u, 0.0), u));
    const Tensor g = guided_noise(c, u, 2.0);
    CHECK(g.at(0) == doctest::Approx(-1.0));  // 3 + 2*(1-3)
    CHECK(g.at(1) == doctest::Approx(6.0));   // -2 + 2*(2+2)
    CHECK_THROWS(guided_noise(c, Tensor({3}), 1.0));
    CHECK_THROWS(guided_noise(c, u, -0.5));
}

TEST_CASE("ddpm_step matches the frozen scalar oracle") {
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 1000);
    const Tensor x({1}, 1.0), eh({1}, 0.3), z({1}, 0.25);
    const Tensor out = ddpm_step(x, eh, z, 500, s);
    CHECK(out.item() == doctest::Approx(1.0269544371664205).epsilon(1e-12));
}

TEST_CASE("ddpm_step ignores z at t=1") {
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 1000);
    const Tensor x({2}, std::vector<double>{0.5, -0.8});
    const Tensor eh({2}, std::vector<double>{0.1, 0.2});
    const Tensor huge({2}, 1e12);
    const Tensor zero({2}, 0.0);
    CHECK(bit_equal(ddpm_step(x, eh, huge, 1, s), ddpm_step(x, eh, zero, 1, s)));
    // ... but not at t>1
    CHECK_FALSE(bit_equal(ddpm_step(x, eh, huge, 2, s), ddpm_step(x, eh, zero, 2, s)));
    CHECK_THROWS(ddpm_step(x, eh, zero, 0, s));
    CHECK_THROWS(ddpm_step(x, eh, zero, 1001, s));
    CHECK_THROWS(ddpm_step(x, eh, Tensor({3}), 5, s));
}

TEST_CASE("ddim_step inverts the forward jump when fed the true noise") {
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 1000);
    const Tensor x0({1}, 0.7), eps({1}, -0.4);
    const Tensor x600 = forward_jump(x0, eps, 600, s);
    const Tensor x350 = ddim_step(x600, eps, 600, 350, s);
    CHECK(x350.item() == doctest::Approx(0.035645016068844959).epsilon(1e-12));
    CHECK(max_abs_diff(x350, forward_jump(x0, eps, 350, s)) <= 1e-12);
    // stepping to t_prev = 0 recovers x0
    const Tensor back = ddim_step(x600, eps, 600, 0, s);
    CHECK(back.item() == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("ddim_step clamp bounds the x0 estimate") {
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 1000);
    const Tensor x({1}, 50.0), eh({1}, 0.0);
    const Tensor free = ddim_step(x, eh, 900, 100, s, false);
    const Tensor clamped = ddim_step(x, eh, 900, 100, s, true);
    CHECK(free.item() > clamped.item());
    CHECK(clamped.item() == doctest::Approx(std::sqrt(s.alpha_bar[100])).epsilon(1e-12));
    CHECK_THROWS(ddim_step(x, eh, 100, 100, s));  // t_prev must be < t
}

TEST_CASE("ddim timestep subsequences") {
    const auto full = ddim_timesteps(1000, 1000);
    REQUIRE(full.size() == 1000);
    CHECK(full.front() == 1000);
    CHECK(full.back() == 1);
    for (std::size_t i = 0; i < full.size(); ++i) CHECK(full[i] == 1000 - i);

    const auto sub = ddim_timesteps(1000, 100);
    REQUIRE(sub.size() == 100);
    CHECK(sub.front() == 1000);
    CHECK(sub.back() == 10);
    for (std::size_t i = 1; i < sub.size(); ++i) CHECK(sub[i] < sub[i - 1]);
    for (const std::size_t t : sub) CHECK(t >= 1);

    CHECK(ddim_timesteps(10, 3) == std::vector<std::size_t>{10, 7, 3});
    CHECK(ddim_timesteps(7, 1) == std::vector<std::size_t>{7});
    CHECK_THROWS(ddim_timesteps(10, 0));
    CHECK_THROWS(ddim_timesteps(10, 11));
}

TEST_CASE("sampling is deterministic per seed") {
    const ArchConfig arch = tiny_arch();
    const DenoiserParams p = init_params(arch, static_cast<std::uint64_t>(44));
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 50);
    SampleRun run;
    run.class_label = 2;
    run.count = 5;
    run.method = SampleMethod::ddim;
    run.ddim_steps = 10;
    run.guidance = 2.0;
    run.seed = 31;
    const SampleResult a = sample(p, s, run);
    const SampleResult b = sample(p, s, run);
    CHECK(bit_equal(a.samples, b.samples));
    run.seed = 32;
    CHECK_FALSE(bit_equal(a.samples, sample(p, s, run).samples));
    run.method = SampleMethod::ddpm;
    run.seed = 31;
    const SampleResult c = sample(p, s, run);
    CHECK(bit_equal(c.samples, sample(p, s, run).samples));
}

TEST_CASE("guidance 1 never consults the null branch") {
    const ArchConfig arch = tiny_arch();
    DenoiserParams p = init_params(arch, static_cast<std::uint64_t>(7));
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 40);
    SampleRun run;
    run.class_label = 1;
    run.count = 4;
    run.method = SampleMethod::ddpm;
    run.guidance = 1.0;
    run.seed = 5;
    const SampleResult before = sample(p, s, run);
    // scrambling the null-class embedding row must not change anything at s=1
    for (std::size_t j = 0; j < arch.class_embed_dim; ++j) p.class_embed.data[j] = 1e6;
    const SampleResult after = sample(p, s, run);
    CHECK(bit_equal(before.samples, after.samples));
    // ... but does change guided sampling
    run.guidance = 2.0;
    const SampleResult guided_before = sample(p, s, run);
    for (std::size_t j = 0; j < arch.class_embed_dim; ++j) p.class_embed.data[j] = -1e6;
    CHECK_FALSE(bit_equal(guided_before.samples, sample(p, s, run).samples));
}

TEST_CASE("guidance 0 samples the null class") {
    const ArchConfig arch = tiny_arch();
    DenoiserParams p = init_params(arch, static_cast<std::uint64_t>(7));
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 40);
    SampleRun run;
    run.class_label = 1;
    run.count = 3;
    run.method = SampleMethod::ddim;
    run.ddim_steps = 40;
    run.guidance = 0.0;
    run.seed = 8;
    const SampleResult a = sample(p, s, run);
    run.class_label = 3;  // the conditional branch is unused at s=0
    CHECK(bit_equal(a.samples, sample(p, s, run).samples));
}

TEST_CASE("with a zero predictor, full-length ddim follows the noise-free ddpm chain") {
    const ArchConfig arch = tiny_arch();
    const DenoiserParams p = zeroed(arch);
    const std::size_t T = 200, N = 3, D = arch.input_dim;
    const NoiseSchedule s = build_schedule(1e-4, 0.02, T);

    SampleRun run;
    run.class_label = 1;
    run.count = N;
    run.method = SampleMethod::ddim;
    run.ddim_steps = T;
    run.guidance = 1.0;
    run.seed = 77;
    const SampleResult ddim_res = sample(p, s, run);

    // independent chain: same x_T, zero prediction, zero injected noise
    RngStreams streams(run.seed);
    Tensor x({N, D});
    for (double& v : x.data) v = streams.sampling.normal();
    const Tensor zero_pred({N, D}, 0.0), zero_z({N, D}, 0.0);
    for (std::size_t t = T; t >= 1; --t) x = ddpm_step(x, zero_pred, zero_z, t, s);

    CHECK(max_abs_diff(ddim_res.samples, x) <= 1e-9);
}

TEST_CASE("trajectories record every state from T down to 0") {
    const ArchConfig arch = tiny_arch();
    const DenoiserParams p = init_params(arch, static_cast<std::uint64_t>(2));
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 30);

    SampleRun run;
    run.class_label = 2;
    run.count = 2;
    run.keep_trajectory = true;
    run.seed = 4;

    run.method = SampleMethod::ddpm;
    const SampleResult a = sample(p, s, run);
    REQUIRE(a.trajectory.size() == 31);
    CHECK(a.trajectory.front().first == 30);
    CHECK(a.trajectory.back().first == 0);
    CHECK(bit_equal(a.trajectory.back().second, a.samples));

    run.method = SampleMethod::ddim;
    run.ddim_steps = 7;
    const SampleResult b = sample(p, s, run);
    REQUIRE(b.trajectory.size() == 8);
    CHECK(b.trajectory.front().first == 30);
    CHECK(b.trajectory.back().first == 0);
    CHECK(bit_equal(b.trajectory.back().second, b.samples));
}

TEST_CASE("run validation") {
    const ArchConfig arch = tiny_arch();
    const DenoiserParams p = init_params(arch, static_cast<std::uint64_t>(1));
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 30);
    SampleRun run;
    run.count = 0;
    CHECK_THROWS(sample(p, s, run));
    run.count = 1;
    run.class_label = 4;  // beyond C=3
    CHECK_THROWS(sample(p, s, run));
    run.class_label = 1;
    run.guidance = -1.0;
    CHECK_THROWS(sample(p, s, run));
    run.guidance = 1.0;
    run.method = SampleMethod::ddim;
    run.ddim_steps = 31;  // beyond T
    CHECK_THROWS(sample(p, s, run));
}

TEST_CASE("method names round trip") {
    CHECK(sample_method_from_string("ddpm") == SampleMethod::ddpm);
    CHECK(sample_method_from_string("ddim") == SampleMethod::ddim);
    CHECK(to_string(SampleMethod::ddim) == std::string("ddim"));
    CHECK_THROWS(sample_method_from_string("euler"));
}

}  // TEST_SUITE
