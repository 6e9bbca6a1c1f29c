#pragma once

#include <cstdint>

namespace corrhyp {

// splitmix64; used wherever reproducible sampling is required. Outputs are
// platform independent, so seeded runs produce byte-identical reports.
struct Rng {
    std::uint64_t state = 0x9e3779b97f4a7c15ULL;

    Rng() = default;
    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }
};

}  // namespace corrhyp
