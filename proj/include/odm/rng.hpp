#pragma once

#include <array>
#include <cstdint>

namespace odm {

/// SplitMix64 step; used for seed expansion only.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// xoshiro256++ with splitmix64 seeding. Gaussian draws consume exactly two
/// 64-bit outputs, so the generator state is the whole stream state (no
/// cached spare to checkpoint).
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01();
    /// Unbiased uniform integer in [0, bound); bound must be positive.
    std::uint64_t below(std::uint64_t bound);
    /// Standard normal via Box-Muller (cosine branch only).
    double normal();

    std::array<std::uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

private:
    std::array<std::uint64_t, 4> s_{};
};

/// Independent named streams expanded from one master seed. The derivation
/// order is fixed and is part of the checkpoint format.
struct RngStreams {
    Rng data;       // minibatch index draws
    Rng init;       // parameter initialization
    Rng timesteps;  // per-step t draws
    Rng noise;      // training epsilon draws
    Rng dropout;    // CFG label dropout
    Rng sampling;   // generation-time noise
    Rng triplets;   // random-triplet mode draws

    static constexpr int kStreamCount = 7;

    explicit RngStreams(std::uint64_t master);

    std::array<std::array<std::uint64_t, 4>, kStreamCount> states() const;
    void set_states(const std::array<std::array<std::uint64_t, 4>, kStreamCount>& st);
};

/// Seed for dataset generation, derived from the same master seed but
/// disjoint from every named stream above.
std::uint64_t dataset_seed(std::uint64_t master);

}  // namespace odm
