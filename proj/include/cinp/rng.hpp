#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cinp {

// Named-stream seed derivation: splitmix64 over (seed, FNV-1a(name), index).
// Adding a new stream never perturbs existing ones.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0);

// Portable random source. All draws are defined in terms of raw mt19937_64
// output so results do not depend on the standard library's distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n) by rejection on the top of the 64-bit range.
    std::uint64_t index(std::uint64_t n);

    // Standard normal via Box-Muller; consumes exactly two raw draws.
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

}  // namespace cinp
