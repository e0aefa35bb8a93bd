#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "odm/denoiser.hpp"
#include "odm/schedule.hpp"
#include "odm/tensor.hpp"

namespace odm {

enum class SampleMethod { ddpm, ddim };

const char* to_string(SampleMethod m);
SampleMethod sample_method_from_string(const std::string& s);

struct SampleRun {
    std::size_t class_label{1};  // 0 = null class (unconditional)
    std::size_t count{1};
    SampleMethod method{SampleMethod::ddpm};
    std::size_t ddim_steps{100};  // S, used by ddim only
    double guidance{2.0};         // s >= 0
    std::uint64_t seed{0};
    bool keep_trajectory{false};
    bool clamp_unit{false};  // clamp the ddim x0 estimate to [-1, 1]
};

/// Classifier-free guidance: eps_uncond + s * (eps_cond - eps_uncond).
/// s = 1 returns eps_cond and s = 0 returns eps_uncond exactly.
Tensor guided_noise(const Tensor& eps_cond, const Tensor& eps_uncond, double s);

/// Ancestral step: (x_t - (1-alpha_t)/sqrt(1-alpha_bar_t) * eps_hat)
/// / sqrt(alpha_t) + sigma_t * z. At t = 1 the z term is forced to zero.
Tensor ddpm_step(const Tensor& x_t, const Tensor& eps_hat, const Tensor& z, std::size_t t,
                 const NoiseSchedule& sched);

/// Deterministic (eta = 0) step from t down to t_prev (t_prev = 0 allowed):
/// x0_hat = (x_t - sqrt(1-ab_t) * eps_hat) / sqrt(ab_t), then
/// sqrt(ab_prev) * x0_hat + sqrt(1-ab_prev) * eps_hat.
Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, std::size_t t, std::size_t t_prev,
                 const NoiseSchedule& sched, bool clamp_unit = false);

/// Descending subsequence round(i*T/S) for i = S..1; always starts at T,
/// entries strictly decreasing and >= 1.
std::vector<std::size_t> ddim_timesteps(std::size_t T, std::size_t S);

struct SampleResult {
    Tensor samples;  // [N x D]
    /// (timestep the state corresponds to, state) pairs, starting from
    /// (T, x_T); filled only when keep_trajectory is set.
    std::vector<std::pair<std::size_t, Tensor>> trajectory;
};

/// Draws x_T from the run's seeded stream and iterates the chosen stepper
/// with guided predictions (conditional + null). Deterministic per seed;
/// never mutates params. s = 1 and s = 0 skip the unused branch.
SampleResult sample(const DenoiserParams& params, const NoiseSchedule& sched,
                    const SampleRun& run);

}  // namespace odm
