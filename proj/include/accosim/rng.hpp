#pragma once

#include <cmath>
#include <cstdint>

// Counter-based pseudo-random streams. Every stochastic quantity in the
// simulator is drawn from a stream key derived from (master_seed, worker,
// round, stage, ordinal), so runs are bit-reproducible regardless of
// execution order or thread count.

namespace accosim::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a;
    std::uint64_t h = splitmix64(s);
    s = h ^ (b + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
    return splitmix64(s);
}

inline std::uint64_t derive(std::uint64_t master, std::uint64_t a,
                            std::uint64_t b = 0, std::uint64_t c = 0,
                            std::uint64_t d = 0) {
    return mix(mix(mix(mix(master, a), b), c), d);
}

class Stream {
public:
    explicit Stream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in (0, 1]; strictly positive so log() below is safe
    double uniform01() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double gaussian() {
        double u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state_;
};

}  // namespace accosim::rng
