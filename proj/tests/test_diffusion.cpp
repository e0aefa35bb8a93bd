#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "odm/autograd.hpp"
#include "odm/denoiser.hpp"
#include "odm/diffusion.hpp"
#include "odm/rng.hpp"
#include "odm/schedule.hpp"

using namespace odm;

namespace {

const ModelFn zero_model = [](Tape& t, NodeId x, std::size_t, std::size_t) {
    return t.leaf(Tensor(t.value(x).shape));
};

TrainBatch random_batch(std::size_t C, std::size_t per_class, std::size_t D, std::size_t t,
                        const NoiseSchedule& sched, std::uint64_t seed) {
    Rng rng(seed);
    TrainBatch batch;
    batch.num_classes = C;
    batch.t = t;
    for (std::size_t c = 1; c <= C; ++c) {
        ClassBlock b;
        b.label = c;
        b.cond = c;
        b.x0 = Tensor({per_class, D});
        b.eps = Tensor({per_class, D});
        for (double& v : b.x0.data) v = rng.normal();
        for (double& v : b.eps.data) v = rng.normal();
        b.x_t = forward_jump(b.x0, b.eps, t, sched);
        batch.blocks.push_back(std::move(b));
    }
    return batch;
}

NodeId ordinal_from_rows(Tape& tape, const std::vector<double>& p, const std::vector<double>& q,
                         const std::vector<double>& r, DistanceMetric metric) {
    return ordinal_loss(tape, tape.leaf(Tensor::row(p)), tape.leaf(Tensor::row(q)),
                        tape.leaf(Tensor::row(r)), metric);
}

}  // namespace

TEST_SUITE("diffusion") {

TEST_CASE("forward_step special cases") {
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 1000);
    const Tensor zero({3}, 0.0);
    Tensor e({3}, std::vector<double>{1.0, -2.0, 0.5});
    Tensor x({3}, std::vector<double>{0.3, 0.7, -1.1});

    const Tensor only_noise = forward_step(zero, e, 700, s);
    const double sb = std::sqrt(s.beta[700]);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(only_noise.at(i) == doctest::Approx(sb * e.at(i)).epsilon(1e-15));

    const Tensor noiseless = forward_step(x, zero, 700, s);
    const double sa = std::sqrt(s.alpha[700]);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(noiseless.at(i) == doctest::Approx(sa * x.at(i)).epsilon(1e-15));
}

TEST_CASE("forward_step scalar value at the ramp top") {
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 1000);
    const Tensor one({1}, 1.0);
    const Tensor out = forward_step(one, one, 1000, s);
    CHECK(out.item() == doctest::Approx(1.131370849898476).epsilon(1e-14));
}

TEST_CASE("forward_jump matches forward_step at t=1 and validates t") {
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 1000);
    Tensor x({4}, std::vector<double>{1, -1, 2, 0.5});
    Tensor e({4}, std::vector<double>{0.1, 0.2, -0.3, 0.4});
    CHECK(max_abs_diff(forward_jump(x, e, 1, s), forward_step(x, e, 1, s)) <= 1e-12);
    CHECK_THROWS(forward_jump(x, e, 0, s));
    CHECK_THROWS(forward_jump(x, e, 1001, s));
    CHECK_THROWS(forward_step(x, e, 0, s));
}

TEST_CASE("enum names round trip") {
    CHECK(triplet_mode_from_string("all") == TripletMode::all);
    CHECK(triplet_mode_from_string("random") == TripletMode::random_one);
    CHECK(metric_from_string("squared") == DistanceMetric::squared);
    CHECK(metric_from_string("euclidean") == DistanceMetric::euclidean);
    CHECK(lambda_mode_from_string("time_variant") == LambdaMode::time_variant);
    CHECK(lambda_mode_from_string("off") == LambdaMode::off);
    CHECK(lambda_mode_from_string("constant") == LambdaMode::constant);
    CHECK_THROWS(metric_from_string("cosine"));
    CHECK_THROWS(lambda_mode_from_string("on"));
    CHECK_THROWS(triplet_mode_from_string("pairs"));
}

TEST_CASE("all-mode triplets are the lexicographic p<q<r list") {
    const auto t4 = sample_triplets(4, TripletMode::all, nullptr);
    REQUIRE(t4.size() == 4);
    CHECK((t4[0].p == 1 && t4[0].q == 2 && t4[0].r == 3));
    CHECK((t4[1].p == 1 && t4[1].q == 2 && t4[1].r == 4));
    CHECK((t4[2].p == 1 && t4[2].q == 3 && t4[2].r == 4));
    CHECK((t4[3].p == 2 && t4[3].q == 3 && t4[3].r == 4));
    CHECK(sample_triplets(3, TripletMode::all, nullptr).size() == 1);
    CHECK(sample_triplets(2, TripletMode::all, nullptr).empty());
    CHECK(sample_triplets(5, TripletMode::all, nullptr).size() == 10);
}

TEST_CASE("random mode draws a valid triplet and covers the space") {
    Rng rng(13);
    std::set<std::size_t> seen;
    for (int i = 0; i < 200; ++i) {
        const auto tr = sample_triplets(4, TripletMode::random_one, &rng);
        REQUIRE(tr.size() == 1);
        REQUIRE(tr[0].p >= 1);
        REQUIRE(tr[0].p < tr[0].q);
        REQUIRE(tr[0].q < tr[0].r);
        REQUIRE(tr[0].r <= 4);
        seen.insert(tr[0].p * 100 + tr[0].q * 10 + tr[0].r);
    }
    CHECK(seen.size() == 4);
    CHECK_THROWS(sample_triplets(4, TripletMode::random_one, nullptr));
}

TEST_CASE("ordinal_distance is the mean-normalized squared norm") {
    Tape tape;
    const NodeId a = tape.leaf(Tensor::row({1.0, 3.0}));
    const NodeId b = tape.leaf(Tensor::row({0.0, 1.0}));
    CHECK(tape.value(ordinal_distance(tape, a, b, DistanceMetric::squared)).item() == 2.5);
    CHECK(tape.value(ordinal_distance(tape, a, b, DistanceMetric::euclidean)).item() ==
          std::sqrt(2.5));
    // symmetry is exact
    CHECK(tape.value(ordinal_distance(tape, b, a, DistanceMetric::squared)).item() == 2.5);
}

TEST_CASE("euclidean metric vanishes on collinear-between configurations") {
    Tape tape;
    const NodeId l =
        ordinal_from_rows(tape, {0.0, 0.0}, {1.0, 1.0}, {3.0, 3.0}, DistanceMetric::euclidean);
    CHECK(tape.value(l).item() == 0.0);
}

TEST_CASE("squared metric vanishes on the Pythagorean configuration") {
    Tape tape;
    const NodeId l =
        ordinal_from_rows(tape, {1.0, 0.0}, {0.0, 0.0}, {0.0, 1.0}, DistanceMetric::squared);
    CHECK(tape.value(l).item() == 0.0);
}

TEST_CASE("squared metric gives 4 on the 1-D equispaced configuration") {
    Tape tape;
    const NodeId l = ordinal_from_rows(tape, {0.0}, {1.0}, {2.0}, DistanceMetric::squared);
    CHECK(tape.value(l).item() == 4.0);
    // ... while the euclidean metric is exactly zero there
    Tape tape2;
    const NodeId l2 = ordinal_from_rows(tape2, {0.0}, {1.0}, {2.0}, DistanceMetric::euclidean);
    CHECK(tape2.value(l2).item() == 0.0);
}

TEST_CASE("ordinal loss is symmetric in p and r") {
    Rng rng(17);
    std::vector<double> p(6), q(6), r(6);
    for (int rep = 0; rep < 10; ++rep) {
        for (std::size_t i = 0; i < 6; ++i) {
            p[i] = rng.normal();
            q[i] = rng.normal();
            r[i] = rng.normal();
        }
        for (const DistanceMetric m : {DistanceMetric::squared, DistanceMetric::euclidean}) {
            Tape t1, t2;
            const double a = t1.value(ordinal_from_rows(t1, p, q, r, m)).item();
            const double b = t2.value(ordinal_from_rows(t2, r, q, p, m)).item();
            CHECK(a == b);
        }
    }
}

TEST_CASE("dm_loss with a zero model is the mean squared noise") {
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 100);
    const TrainBatch batch = random_batch(3, 4, 2, 40, s, 99);
    Tape tape;
    const double got = tape.value(dm_loss(tape, zero_model, batch)).item();
    double want = 0.0;
    for (const ClassBlock& b : batch.blocks) {
        double mse = 0.0;
        for (double v : b.eps.data) mse += v * v;
        want += mse / static_cast<double>(b.eps.numel());
    }
    want /= static_cast<double>(batch.blocks.size());
    CHECK(got == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("batch validation rejects malformed batches") {
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 100);
    TrainBatch batch = random_batch(3, 2, 2, 10, s, 5);
    Tape tape;

    TrainBatch empty;
    empty.num_classes = 3;
    empty.t = 10;
    CHECK_THROWS(dm_loss(tape, zero_model, empty));

    TrainBatch bad = batch;
    std::swap(bad.blocks[0], bad.blocks[1]);  // labels no longer ascend
    CHECK_THROWS(dm_loss(tape, zero_model, bad));

    bad = batch;
    bad.blocks[1].eps = Tensor({1, 2});
    CHECK_THROWS(dm_loss(tape, zero_model, bad));

    bad = batch;
    bad.blocks[2].label = 9;
    CHECK_THROWS(dm_loss(tape, zero_model, bad));
}

TEST_CASE("total_loss composes dm and ordinal terms") {
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 1000);
    const TrainBatch batch = random_batch(4, 2, 2, 800, s, 123);
    const auto triplets = sample_triplets(4, TripletMode::all, nullptr);

    // Predictions equal to x_t differ across classes, so the ordinal term is
    // generically nonzero (the zero model would collapse it to 0 exactly).
    const ModelFn passthrough = [](Tape&, NodeId x, std::size_t, std::size_t) { return x; };

    SUBCASE("time-variant lambda") {
        Tape tape;
        const LossBreakdown lb = total_loss(tape, passthrough, batch, 1000,
                                            DistanceMetric::squared, LambdaMode::time_variant,
                                            1.0, triplets);
        CHECK(lb.lambda == 0.8);
        CHECK(lb.total == doctest::Approx(lb.dm + lb.lambda * lb.ordinal).epsilon(1e-12));
        CHECK(lb.total == tape.value(lb.total_node).item());
        CHECK(lb.ordinal > 0.0);
    }
    SUBCASE("constant lambda") {
        Tape tape;
        const LossBreakdown lb =
            total_loss(tape, zero_model, batch, 1000, DistanceMetric::euclidean,
                       LambdaMode::constant, 0.37, triplets);
        CHECK(lb.lambda == 0.37);
        CHECK(lb.total == doctest::Approx(lb.dm + 0.37 * lb.ordinal).epsilon(1e-12));
    }
    SUBCASE("off adds no ordinal nodes at all") {
        Tape t_off, t_dm;
        const LossBreakdown lb = total_loss(t_off, zero_model, batch, 1000,
                                            DistanceMetric::squared, LambdaMode::off, 1.0,
                                            triplets);
        const NodeId dm_only = dm_loss(t_dm, zero_model, batch);
        CHECK(lb.lambda == 0.0);
        CHECK(lb.ordinal == 0.0);
        CHECK(lb.total == t_dm.value(dm_only).item());
        CHECK(t_off.size() == t_dm.size());  // node-for-node identical graph
    }
}

TEST_CASE("total_loss validates timestep and triplets") {
    const NoiseSchedule s = build_schedule(1e-4, 0.02, 100);
    TrainBatch batch = random_batch(4, 2, 2, 50, s, 5);
    const auto triplets = sample_triplets(4, TripletMode::all, nullptr);

    Tape tape;
    batch.t = 0;
    CHECK_THROWS(total_loss(tape, zero_model, batch, 100, DistanceMetric::squared,
                            LambdaMode::time_variant, 1.0, triplets));
    batch.t = 101;
    CHECK_THROWS(total_loss(tape, zero_model, batch, 100, DistanceMetric::squared,
                            LambdaMode::time_variant, 1.0, triplets));
    batch.t = 50;

    std::vector<Triplet> bad{{2, 2, 3}};
    CHECK_THROWS(total_loss(tape, zero_model, batch, 100, DistanceMetric::squared,
                            LambdaMode::time_variant, 1.0, bad));

    TrainBatch missing = batch;
    missing.blocks.erase(missing.blocks.begin() + 2);  // drop class 3
    std::vector<Triplet> needs3{{1, 2, 3}};
    CHECK_THROWS(total_loss(tape, zero_model, missing, 100, DistanceMetric::squared,
                            LambdaMode::time_variant, 1.0, needs3));
}

TEST_CASE("gradients of the full objective pass a finite-difference check") {
    ArchConfig arch;
    arch.input_dim = 1;
    arch.hidden = {4};
    arch.class_embed_dim = 2;
    arch.time_freqs = 1;
    arch.num_classes = 3;

    const NoiseSchedule sched = build_schedule(1e-4, 0.02, 10);
    const TrainBatch batch = random_batch(3, 1, 1, 7, sched, 31);
    const auto triplets = sample_triplets(3, TripletMode::all, nullptr);
    const DenoiserParams init = init_params(arch, static_cast<std::uint64_t>(12));

    std::vector<Tensor> params;
    for (const Tensor* t : init.tensors()) params.push_back(*t);

    for (const DistanceMetric metric : {DistanceMetric::squared, DistanceMetric::euclidean}) {
        const ScalarFn f = [&](Tape& tape, const std::vector<NodeId>& p) {
            DenoiserNodes nodes;
            nodes.class_embed = p[0];
            for (std::size_t l = 0; 1 + 2 * l < p.size(); ++l) {
                nodes.weights.push_back(p[1 + 2 * l]);
                nodes.biases.push_back(p[2 + 2 * l]);
            }
            const ModelFn model = [&](Tape& tp, NodeId x, std::size_t t, std::size_t c) {
                return denoiser_forward(tp, nodes, arch, x, t, 10, c);
            };
            return total_loss(tape, model, batch, 10, metric, LambdaMode::time_variant, 1.0,
                              triplets)
                .total_node;
        };
        const GradCheckReport rep = grad_check(f, params);
        CHECK(rep.all_pass);
        CHECK(rep.checked > 30);
    }
}

}  // TEST_SUITE
