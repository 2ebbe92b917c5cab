#include "editlab/rng.hpp"

#include <cmath>

namespace editlab {

uint64_t Rng::below(uint64_t n) {
    // Classic rejection against the largest multiple of n.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = gen_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * M_PI * u2);
}

}  // namespace editlab
