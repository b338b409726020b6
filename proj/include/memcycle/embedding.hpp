#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "memcycle/errors.hpp"
#include "memcycle/text.hpp"

namespace memcycle {

// 64-bit FNV-1a over raw bytes.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// SplitMix64 step.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline double l2_norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

// Cosine similarity with the degenerate case pinned: a zero vector on
// either side scores 0, never NaN.
inline double cosine_similarity(const std::vector<double>& a,
                                const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("cosine over vectors of length " +
                                std::to_string(a.size()) + " and " +
                                std::to_string(b.size()));
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    double na = l2_norm(a);
    double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (na * nb);
}

namespace detail {

inline double uniform01(std::uint64_t& state) {
    return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

// Approximately standard-normal draw as a sum of 12 uniforms minus 6.
// Uses only IEEE add/sub so the committed golden vectors hold on any
// conforming platform; Box-Muller would pick up libm rounding drift.
inline double normal_draw(std::uint64_t& state) {
    double acc = 0.0;
    for (int i = 0; i < 12; ++i) acc += uniform01(state);
    return acc - 6.0;
}

}  // namespace detail

// Deterministic pseudo-embedding: normalize the text, seed SplitMix64
// from the 64-bit FNV-1a digest of the normalized UTF-8 bytes, draw
// `dimension` normal components, L2-normalize. Pure function of the
// normalized text.
inline std::vector<double> hashed_embedding(std::string_view raw_text,
                                            std::size_t dimension) {
    if (raw_text.empty()) {
        throw Error("cannot embed empty text");
    }
    if (dimension == 0) {
        throw DimensionMismatch("embedding dimension must be positive");
    }
    std::string normalized = text::normalize(raw_text);
    std::uint64_t state = fnv1a64(normalized);
    std::vector<double> v(dimension);
    for (auto& x : v) x = detail::normal_draw(state);
    double n = l2_norm(v);
    if (n == 0.0) {
        // All-zero draw is astronomically unlikely but keep the contract.
        v[0] = 1.0;
        return v;
    }
    for (auto& x : v) x /= n;
    return v;
}

// Hex digest used as the key for recorded cassette embeddings.
inline std::string text_digest_hex(std::string_view raw_text) {
    std::uint64_t h = fnv1a64(text::normalize(raw_text));
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

}  // namespace memcycle
