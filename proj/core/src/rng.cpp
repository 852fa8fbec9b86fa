#include "resfed/rng.hpp"

#include <cmath>

#include "resfed/errors.hpp"

namespace resfed {
namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace

Rng::Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& s : s_) s = splitmix64(sm);
}

uint64_t Rng::next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

float Rng::uniform(float lo, float hi) {
    return static_cast<float>(lo + (static_cast<double>(hi) - lo) * uniform());
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 in (0,1] so the log stays finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double mag = std::sqrt(-2.0 * std::log(u1));
    double two_pi_u2 = 2.0 * 3.14159265358979323846 * u2;
    spare_ = mag * std::sin(two_pi_u2);
    has_spare_ = true;
    return mag * std::cos(two_pi_u2);
}

uint64_t Rng::below(uint64_t n) {
    if (n == 0) throw ConfigError("Rng::below: n must be positive");
    // Rejection sampling keeps the draw unbiased.
    uint64_t threshold = (0 - n) % n;
    for (;;) {
        uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b) {
    uint64_t x = base;
    uint64_t h = splitmix64(x);
    x ^= a * 0x9e3779b97f4a7c15ULL;
    h ^= splitmix64(x);
    x ^= b * 0xc2b2ae3d27d4eb4fULL;
    h ^= splitmix64(x);
    return h;
}

} // namespace resfed
