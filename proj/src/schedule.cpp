#include "odm/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace odm {

NoiseSchedule build_schedule(double beta1, double betaT, std::size_t T) {
    if (!(beta1 > 0.0 && beta1 <= betaT && betaT < 1.0))
        throw std::invalid_argument("build_schedule: need 0 < beta1 <= betaT < 1");
    if (T < 2) throw std::invalid_argument("build_schedule: need T >= 2");

    NoiseSchedule s;
    s.T = T;
    s.beta.assign(T + 1, 0.0);
    s.alpha.assign(T + 1, 1.0);
    s.alpha_bar.assign(T + 1, 1.0);
    s.sigma.assign(T + 1, 0.0);

    const double span = betaT - beta1;
    for (std::size_t t = 1; t <= T; ++t)
        s.beta[t] = beta1 + span * static_cast<double>(t - 1) / static_cast<double>(T - 1);
    s.beta[1] = beta1;
    s.beta[T] = betaT;  // beta1 + span need not round back to betaT

    for (std::size_t t = 1; t <= T; ++t) {
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
        s.sigma[t] = std::sqrt(s.beta[t]);
    }
    if (s.alpha_bar[T] <= 0.0)
        throw std::invalid_argument("build_schedule: alpha_bar underflowed; T too large");
    return s;
}

}  // namespace odm
