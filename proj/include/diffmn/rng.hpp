#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace diffmn {

// Seeded RNG with hand-rolled distributions so that sampled streams depend
// only on the seed, not on the standard library's distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), eng_(seed) {}

    uint64_t seed() const { return seed_; }

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    int uniform_int(int n) { return static_cast<int>(eng_() % static_cast<uint64_t>(n)); }

    // Box-Muller, one draw per pair of uniforms. The spare is discarded so a
    // stream of normals is a pure function of the underlying uniform stream.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(eng_() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent stream (e.g. one per sample). Forks depend only on
    // (seed, stream), never on how much of this generator was consumed.
    Rng fork(uint64_t stream) const { return Rng(mix(seed_, stream)); }

    static uint64_t mix(uint64_t a, uint64_t b) {
        uint64_t x = a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2) + b * 0xbf58476d1ce4e5b9ULL);
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ULL;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebULL;
        x ^= x >> 31;
        return x;
    }

private:
    uint64_t seed_;
    std::mt19937_64 eng_;
};

}  // namespace diffmn
