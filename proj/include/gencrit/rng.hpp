#pragma once

#include <gencrit/types.hpp>

#include <cstdint>

namespace gencrit::detail {

// Deterministic, platform-independent uniform stream used wherever the
// library itself needs samples (probe directions, increment sampling).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline double uniform01(std::uint64_t& state) {
    return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

inline Mat random_matrix(Index rows, Index cols, double half_width, std::uint64_t& state) {
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = half_width * (2.0 * uniform01(state) - 1.0);
    return m;
}

}  // namespace gencrit::detail
