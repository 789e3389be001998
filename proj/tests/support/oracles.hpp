#pragma once

// Reference implementations shared by the unit tests and the acceptance
// runner. They are written straight from the definitions, with no reuse of
// library internals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "lumiforge/light_field.hpp"

namespace lumiforge::oracle {

/// Distinct recorded points for d = p/q under the centred view model.
/// Positions i + (j - c) p / q are scaled by 2q to become integers, and the
/// window [-1/2, n - 1/2) becomes [-q, 2qn - q).
inline std::size_t rational_count(long p, long q, long n_micro, long n_views) {
    std::set<long> pts;
    for (long j = 0; j < n_views; ++j) {
        const long twice_offset = 2 * j - (n_views - 1);
        for (long i = 0; i < n_micro; ++i) {
            const long N = 2 * q * i + twice_offset * p;
            if (N >= -q && N < 2 * q * n_micro - q) pts.insert(N);
        }
    }
    return pts.size();
}

/// Every member within tol of some integer.
inline bool all_integral(const std::vector<double>& ds, double tol) {
    for (double d : ds) {
        const double below = std::floor(d), above = std::ceil(d);
        if (d - below > tol && above - d > tol) return false;
    }
    return true;
}

inline double catmull_rom(double t) {
    t = std::abs(t);
    if (t < 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
    if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
    return 0.0;
}

/// Weights over source indices for sampling a grid of n at position pos,
/// with clamp-to-edge reads folded into the end samples.
inline std::vector<double> clamped_weights(double pos, std::size_t n) {
    std::vector<double> w(n, 0.0);
    const long base = long(std::floor(pos));
    for (long k = base - 1; k <= base + 2; ++k) {
        const long idx = std::clamp(k, 0L, long(n) - 1);
        w[std::size_t(idx)] += catmull_rom(pos - double(k));
    }
    return w;
}

/// Direct 4D tensor-product Catmull-Rom upsampling: output sample (v,u,y,x)
/// reads the input at (v/2, u/2, y/2, x/2).
inline LightField4D bicubic_4d(const LightField4D& lf) {
    using Taps = std::vector<std::pair<std::size_t, double>>;
    const LfDims d = lf.dims();
    const LfDims o{2 * d.views_v - 1, 2 * d.views_u - 1, 2 * d.height, 2 * d.width};
    auto table = [](std::size_t out, std::size_t in) {
        std::vector<Taps> t(out);
        for (std::size_t i = 0; i < out; ++i) {
            const auto w = clamped_weights(double(i) / 2.0, in);
            for (std::size_t k = 0; k < in; ++k)
                if (w[k] != 0.0) t[i].push_back({k, w[k]});
        }
        return t;
    };
    const auto wv = table(o.views_v, d.views_v), wu = table(o.views_u, d.views_u);
    const auto wy = table(o.height, d.height), wx = table(o.width, d.width);
    LightField4D out(o);
    for (std::size_t v = 0; v < o.views_v; ++v)
        for (std::size_t u = 0; u < o.views_u; ++u)
            for (std::size_t y = 0; y < o.height; ++y)
                for (std::size_t x = 0; x < o.width; ++x)
                    for (std::size_t c = 0; c < kChannels; ++c) {
                        double acc = 0.0;
                        for (auto [a, fa] : wv[v])
                            for (auto [b, fb] : wu[u])
                                for (auto [yy, fy] : wy[y])
                                    for (auto [xx, fx] : wx[x]) acc += fa * fb * fy * fx * lf(a, b, yy, xx, c);
                        out(v, u, y, x, c) = float(acc);
                    }
    return out;
}

/// PSNR from its definition with peak 1.
inline double psnr_definition(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return 10.0 * std::log10(1.0 / (s / double(a.size())));
}

/// FNV-1a over the raw bytes of a float buffer.
inline std::uint64_t fnv1a(std::span<const float> data) {
    std::uint64_t h = 1469598103934665603ull;
    const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
    for (std::size_t i = 0; i < data.size() * sizeof(float); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace lumiforge::oracle
