#include "odm/rng.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace odm {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = std::rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = std::rotl(s_[3], 45);
    return result;
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return r % bound;
    }
}

double Rng::normal() {
    // u1 in (0,1] keeps the log finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

RngStreams::RngStreams(std::uint64_t master) {
    std::uint64_t sm = master;
    data = Rng(splitmix64(sm));
    init = Rng(splitmix64(sm));
    timesteps = Rng(splitmix64(sm));
    noise = Rng(splitmix64(sm));
    dropout = Rng(splitmix64(sm));
    sampling = Rng(splitmix64(sm));
    triplets = Rng(splitmix64(sm));
}

std::array<std::array<std::uint64_t, 4>, RngStreams::kStreamCount> RngStreams::states() const {
    return {data.state(),    init.state(),     timesteps.state(), noise.state(),
            dropout.state(), sampling.state(), triplets.state()};
}

void RngStreams::set_states(const std::array<std::array<std::uint64_t, 4>, kStreamCount>& st) {
    data.set_state(st[0]);
    init.set_state(st[1]);
    timesteps.set_state(st[2]);
    noise.set_state(st[3]);
    dropout.set_state(st[4]);
    sampling.set_state(st[5]);
    triplets.set_state(st[6]);
}

std::uint64_t dataset_seed(std::uint64_t master) {
    // Eighth slot of the same expansion chain.
    std::uint64_t sm = master;
    for (int i = 0; i < RngStreams::kStreamCount; ++i) splitmix64(sm);
    return splitmix64(sm);
}

}  // namespace odm
