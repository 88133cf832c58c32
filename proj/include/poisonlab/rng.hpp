#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace poisonlab {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based random stream: every draw is a pure function of
/// (seed, domain, key...). Draw order therefore cannot leak between
/// subsystems, e.g. a fake vehicle's dawdling never shifts the draws seen by
/// real vehicles.
class SeededStream {
public:
    enum Domain : std::uint64_t { Arrival = 1, Route = 2, Dawdle = 3, Init = 4, Shuffle = 5 };

    explicit SeededStream(std::uint64_t seed = 0) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t bits(std::uint64_t domain, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        std::uint64_t h = splitmix64(seed_ ^ splitmix64(domain));
        h = splitmix64(h ^ a);
        h = splitmix64(h ^ (b * 0xD1B54A32D192ED03ULL));
        h = splitmix64(h ^ (c * 0x8CB92BA72F3D8DD7ULL));
        return h;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform(std::uint64_t domain, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        return static_cast<double>(bits(domain, a, b, c) >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t seed_;
};

/// Portable helpers over std::mt19937_64, whose output sequence is fixed by
/// the standard (the <random> distributions are not).
inline double uniform01(std::mt19937_64& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

inline std::uint64_t uniform_below(std::mt19937_64& engine, std::uint64_t n) {
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t r;
    do {
        r = engine();
    } while (r >= limit);
    return r % n;
}

template <class T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& engine) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = uniform_below(engine, i);
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace poisonlab
