#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "lumiforge/epi.hpp"
#include "lumiforge/error.hpp"
#include "lumiforge/resample.hpp"

namespace lumiforge::nn {

/// Separable cubic (Catmull-Rom, clamp-to-edge) 2x upsampling of an EPI to
/// (2A - 1) views by 2S pixels. Output sample (r, c) reads input position
/// (r/2, c/2), so (2u, 2x) reproduces input (u, x) exactly.
inline Epi bicubic_upsample(const Epi& in) {
    const std::size_t A = in.views(), S = in.pixels();
    if (A < 2 || S < 2) throw DomainError("bicubic upsample needs at least 2 views and 2 pixels");
    const std::size_t A2 = 2 * A - 1, S2 = 2 * S;

    std::vector<CubicTaps> col_taps(S2), row_taps(A2);
    for (std::size_t c = 0; c < S2; ++c) col_taps[c] = cubic_taps(double(c) / 2.0, S);
    for (std::size_t r = 0; r < A2; ++r) row_taps[r] = cubic_taps(double(r) / 2.0, A);

    // Spatial pass: (A, 2S).
    std::vector<double> tmp(A * S2 * kChannels);
    for (std::size_t u = 0; u < A; ++u)
        for (std::size_t c = 0; c < S2; ++c)
            for (std::size_t ch = 0; ch < kChannels; ++ch) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k)
                    acc += col_taps[c].weight[k] * double(in(u, std::size_t(col_taps[c].index[k]), ch));
                tmp[(u * S2 + c) * kChannels + ch] = acc;
            }

    Epi out(A2, S2, in.orientation());
    for (std::size_t r = 0; r < A2; ++r)
        for (std::size_t c = 0; c < S2; ++c) {
            for (std::size_t ch = 0; ch < kChannels; ++ch) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k)
                    acc += row_taps[r].weight[k] * tmp[(std::size_t(row_taps[r].index[k]) * S2 + c) * kChannels + ch];
                out(r, c, ch) = float(acc);
            }
            const std::size_t u0 = r / 2, u1 = std::min(u0 + r % 2, A - 1);
            const std::size_t x0 = c / 2, x1 = std::min(x0 + c % 2, S - 1);
            out.set_valid(r, c, in.valid(u0, x0) && in.valid(u0, x1) && in.valid(u1, x0) && in.valid(u1, x1));
        }
    return out;
}

}  // namespace lumiforge::nn
