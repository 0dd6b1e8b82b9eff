#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace rgtta::detail {

// splitmix64, used to derive independent stream seeds from (seed, tag, ...).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(a) ^ (0x9e3779b97f4a7c15ULL + b));
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix(mix(a, b), c);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64(splitmix64(seed));
}

// Uniform in [0, 1). std::uniform_real_distribution is implementation
// defined, so draws are built directly from the raw 64-bit output.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    return rng() % n;
}

// Box-Muller standard normal; two raw draws per sample for portability.
inline double gauss(std::mt19937_64& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// k indices sampled without replacement from [0, n) via partial Fisher-Yates.
// If k >= n, returns the full index range in order.
inline std::vector<int> sample_indices(int n, int k, std::mt19937_64& rng) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    if (k >= n) return idx;
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(bounded(rng, static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

// FNV-1a over raw bytes, used for data hashes in manifests and fairness checks.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t hash_doubles(const std::vector<double>& v, std::uint64_t h = 0xcbf29ce484222325ULL) {
    return v.empty() ? h : fnv1a(v.data(), v.size() * sizeof(double), h);
}

} // namespace rgtta::detail
