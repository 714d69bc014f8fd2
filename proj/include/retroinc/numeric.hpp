#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace retroinc {

inline double expit(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 - exp(-x)) for x > 0, stable near both ends.
inline double log1mexp(double x) {
    constexpr double ln2 = 0.6931471805599453;
    if (x <= 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    return x <= ln2 ? std::log(-std::expm1(-x)) : std::log1p(-std::exp(-x));
}

// Neumaier-compensated sum in the given order.
double compensated_sum(std::span<const double> xs);

// Sorts a copy of the terms before compensated summation, so the result
// depends only on the multiset of terms, not their order.
double stable_sum(std::vector<double> xs);

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace retroinc
