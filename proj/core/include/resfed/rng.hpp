#pragma once

#include <cstdint>
#include <vector>

namespace resfed {

/// Deterministic 64-bit PRNG (xoshiro256** seeded via splitmix64).
///
/// Every random decision in the library goes through this generator so that
/// identical seeds give bit-identical results across runs and platforms.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();

    /// Uniform float in [lo, hi).
    float uniform(float lo, float hi);

    /// Standard normal deviate (Box-Muller, pair-cached).
    double normal();

    /// Uniform integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n);

    /// Fisher-Yates shuffle with fixed visit order.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (size_t i = v.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stable mix of a base seed with stream identifiers, used to derive
/// independent per-(client, round) generators.
uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b = 0);

} // namespace resfed
