#pragma once

#include <cstddef>
#include <vector>

namespace odm {

/// Linear noise schedule with 1-based timestep indexing: t runs 1..T and
/// index 0 holds the t=0 conventions (beta[0] = 0, alpha_bar[0] = 1) used by
/// samplers that step down to t_prev = 0.
struct NoiseSchedule {
    std::size_t T{0};
    std::vector<double> beta;       // size T+1
    std::vector<double> alpha;      // alpha[t] = 1 - beta[t]
    std::vector<double> alpha_bar;  // running product of alpha, alpha_bar[0] = 1
    std::vector<double> sigma;      // sigma[t] = sqrt(beta[t])
};

/// beta[t] = beta1 + (betaT - beta1)*(t-1)/(T-1), with the endpoints snapped
/// so beta[1] == beta1 and beta[T] == betaT bit-exactly.
NoiseSchedule build_schedule(double beta1, double betaT, std::size_t T);

}  // namespace odm
