#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace lumiforge {

/// Keys cubic convolution kernel with a = -0.5 (Catmull-Rom).
inline double cubic_weight(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

inline std::ptrdiff_t clamp_index(std::ptrdiff_t i, std::size_t n) {
    if (i < 0) return 0;
    if (i >= std::ptrdiff_t(n)) return std::ptrdiff_t(n) - 1;
    return i;
}

/// Four taps (indices and weights) for sampling at real position `pos` on a
/// grid of `n` samples with clamp-to-edge.
struct CubicTaps {
    std::array<std::ptrdiff_t, 4> index;
    std::array<double, 4> weight;
};

inline CubicTaps cubic_taps(double pos, std::size_t n) {
    CubicTaps taps{};
    const double base = std::floor(pos);
    const double frac = pos - base;
    for (int k = 0; k < 4; ++k) {
        taps.index[k] = clamp_index(std::ptrdiff_t(base) + k - 1, n);
        taps.weight[k] = cubic_weight(frac - double(k - 1));
    }
    return taps;
}

/// Reflects an index into [0, n) without repeating the edge sample.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
    if (n == 1) return 0;
    const std::ptrdiff_t period = 2 * (std::ptrdiff_t(n) - 1);
    i %= period;
    if (i < 0) i += period;
    return std::size_t(i < std::ptrdiff_t(n) ? i : period - i);
}

}  // namespace lumiforge
