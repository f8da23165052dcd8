#pragma once

#include <cstdint>
#include <random>

namespace gatenet {

// splitmix64: used to derive independent sub-seeds from (seed, stream ids).
// Keeping seed derivation a pure function of integers makes every random
// stage (init, shuffle, augmentation, synthesis) reproducible bit-for-bit
// and restartable from an iteration counter alone.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t a) {
    return splitmix64(seed ^ splitmix64(a));
}

inline uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
    return mix_seed(mix_seed(seed, a), b);
}

// Deterministic RNG wrapper. std::mt19937_64 output is fully specified by
// the standard; the distributions below are our own so that sequences are
// identical across standard libraries (std::uniform_real_distribution is
// implementation-defined).
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer in [0, n), n > 0. Modulo bias is irrelevant for the
    // n values used here (dataset sizes, shape counts).
    int uniform_int(int n) {
        return static_cast<int>(gen_() % static_cast<uint64_t>(n));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Symmetric uniform with magnitude bounded away from zero; used to
    // generate test points away from relu/pool kinks.
    double uniform_away_from_zero(double lo_mag, double hi_mag) {
        double v = uniform(lo_mag, hi_mag);
        return bernoulli(0.5) ? v : -v;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace gatenet
