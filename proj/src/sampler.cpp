#include "odm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "odm/rng.hpp"

namespace odm {

const char* to_string(SampleMethod m) {
    return m == SampleMethod::ddpm ? "ddpm" : "ddim";
}

SampleMethod sample_method_from_string(const std::string& s) {
    if (s == "ddpm") return SampleMethod::ddpm;
    if (s == "ddim") return SampleMethod::ddim;
    throw std::invalid_argument("unknown sample method '" + s + "' (expected ddpm or ddim)");
}

Tensor guided_noise(const Tensor& eps_cond, const Tensor& eps_uncond, double s) {
    if (!eps_cond.same_shape(eps_uncond))
        throw std::invalid_argument("guided_noise: shape mismatch");
    if (!(s >= 0.0)) throw std::invalid_argument("guided_noise: need s >= 0");
    if (s == 1.0) return eps_cond;
    if (s == 0.0) return eps_uncond;
    Tensor out(eps_cond.shape);
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data[i] = eps_uncond.data[i] + s * (eps_cond.data[i] - eps_uncond.data[i]);
    return out;
}

Tensor ddpm_step(const Tensor& x_t, const Tensor& eps_hat, const Tensor& z, std::size_t t,
                 const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T) throw std::invalid_argument("ddpm_step: t out of range 1..T");
    if (!x_t.same_shape(eps_hat) || !x_t.same_shape(z))
        throw std::invalid_argument("ddpm_step: shape mismatch");
    const double inv = 1.0 / std::sqrt(sched.alpha[t]);
    const double coef = (1.0 - sched.alpha[t]) / std::sqrt(1.0 - sched.alpha_bar[t]);
    Tensor out(x_t.shape);
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data[i] = inv * (x_t.data[i] - coef * eps_hat.data[i]);
    if (t > 1)
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += sched.sigma[t] * z.data[i];
    return out;
}

Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, std::size_t t, std::size_t t_prev,
                 const NoiseSchedule& sched, bool clamp_unit) {
    if (t < 1 || t > sched.T) throw std::invalid_argument("ddim_step: t out of range 1..T");
    if (t_prev >= t) throw std::invalid_argument("ddim_step: need t_prev < t");
    if (!x_t.same_shape(eps_hat)) throw std::invalid_argument("ddim_step: shape mismatch");
    const double sab_t = std::sqrt(sched.alpha_bar[t]);
    const double somt = std::sqrt(1.0 - sched.alpha_bar[t]);
    const double sab_p = std::sqrt(sched.alpha_bar[t_prev]);
    const double somp = std::sqrt(1.0 - sched.alpha_bar[t_prev]);
    Tensor out(x_t.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        double x0 = (x_t.data[i] - somt * eps_hat.data[i]) / sab_t;
        if (clamp_unit) x0 = std::clamp(x0, -1.0, 1.0);
        out.data[i] = sab_p * x0 + somp * eps_hat.data[i];
    }
    return out;
}

std::vector<std::size_t> ddim_timesteps(std::size_t T, std::size_t S) {
    if (S < 1 || S > T) throw std::invalid_argument("ddim_timesteps: need 1 <= S <= T");
    std::vector<std::size_t> ts(S);
    for (std::size_t i = S; i >= 1; --i) ts[S - i] = (2 * i * T + S) / (2 * S);  // round(i*T/S)
    return ts;
}

SampleResult sample(const DenoiserParams& params, const NoiseSchedule& sched,
                    const SampleRun& run) {
    if (run.count == 0) throw std::invalid_argument("sample: need count >= 1");
    if (run.class_label > params.arch.num_classes)
        throw std::invalid_argument("sample: unknown class " + std::to_string(run.class_label));
    if (!(run.guidance >= 0.0)) throw std::invalid_argument("sample: need guidance >= 0");

    const std::size_t T = sched.T, N = run.count, D = params.arch.input_dim;
    RngStreams streams(run.seed);
    Rng& rng = streams.sampling;

    Tensor x({N, D});
    for (double& v : x.data) v = rng.normal();

    SampleResult res;
    if (run.keep_trajectory) res.trajectory.emplace_back(T, x);

    const auto predict = [&](const Tensor& xt, std::size_t t) -> Tensor {
        if (run.guidance == 1.0) return predict_noise(params, xt, t, T, run.class_label);
        if (run.guidance == 0.0) return predict_noise(params, xt, t, T, 0);
        const Tensor cond = predict_noise(params, xt, t, T, run.class_label);
        const Tensor uncond = predict_noise(params, xt, t, T, 0);
        return guided_noise(cond, uncond, run.guidance);
    };

    if (run.method == SampleMethod::ddpm) {
        Tensor z({N, D});
        for (std::size_t t = T; t >= 1; --t) {
            const Tensor eh = predict(x, t);
            if (t > 1)
                for (double& v : z.data) v = rng.normal();
            else
                std::fill(z.data.begin(), z.data.end(), 0.0);
            x = ddpm_step(x, eh, z, t, sched);
            if (run.keep_trajectory) res.trajectory.emplace_back(t - 1, x);
        }
    } else {
        const auto ts = ddim_timesteps(T, run.ddim_steps);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const std::size_t t = ts[i];
            const std::size_t t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
            const Tensor eh = predict(x, t);
            x = ddim_step(x, eh, t, t_prev, sched, run.clamp_unit);
            if (run.keep_trajectory) res.trajectory.emplace_back(t_prev, x);
        }
    }
    res.samples = std::move(x);
    return res;
}

}  // namespace odm
