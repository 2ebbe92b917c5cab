#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace editlab {

// Deterministic RNG helpers. std::mt19937_64 output is pinned by the standard;
// the distributions below are hand-rolled because the std:: distribution
// implementations are not, and seeded runs must be byte-reproducible.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), n > 0. Rejection sampling keeps it unbiased.
    uint64_t below(uint64_t n);

    // Standard normal via Box-Muller (fresh pair each call, no cached state).
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent stream (e.g. per trace sample, per batch).
    Rng fork(uint64_t salt) {
        return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull));
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace editlab
