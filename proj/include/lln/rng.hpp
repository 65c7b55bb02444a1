#pragma once

#include "lln/common.hpp"

#include <cstdint>
#include <random>

namespace lln {

// All stochastic code takes an explicit seed; there is no global RNG.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Decorrelated sub-stream seed for (seed, stream) pairs.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64(splitmix64(seed));
}

inline Mat gaussian_matrix(int n, int d, double sigma, std::mt19937_64& gen) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Mat m(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = sigma * dist(gen);
    return m;
}

inline Mat gaussian_matrix(int n, int d, double sigma, std::uint64_t seed) {
    auto gen = make_rng(seed);
    return gaussian_matrix(n, d, sigma, gen);
}

}  // namespace lln
