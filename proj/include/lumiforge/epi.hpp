#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lumiforge/error.hpp"
#include "lumiforge/image.hpp"
#include "lumiforge/light_field.hpp"
#include "lumiforge/resample.hpp"

namespace lumiforge {

enum class Orientation : std::uint8_t { horizontal, vertical };

inline const char* to_string(Orientation o) { return o == Orientation::horizontal ? "horizontal" : "vertical"; }

/// Epipolar plane image: angular rows by spatial columns, RGB, plus a
/// per-pixel validity mask (0 where a resampling read was clamped).
class Epi {
public:
    Epi() = default;
    Epi(std::size_t views, std::size_t pixels, Orientation orientation = Orientation::horizontal,
        float fill = 0.0f)
        : views_(views), pixels_(pixels), orientation_(orientation),
          data_(views * pixels * kChannels, fill), mask_(views * pixels, 1) {}

    std::size_t views() const { return views_; }
    std::size_t pixels() const { return pixels_; }
    Orientation orientation() const { return orientation_; }
    void set_orientation(Orientation o) { orientation_ = o; }

    float& operator()(std::size_t u, std::size_t x, std::size_t c) { return data_[(u * pixels_ + x) * kChannels + c]; }
    float operator()(std::size_t u, std::size_t x, std::size_t c) const {
        return data_[(u * pixels_ + x) * kChannels + c];
    }

    bool valid(std::size_t u, std::size_t x) const { return mask_[u * pixels_ + x] != 0; }
    void set_valid(std::size_t u, std::size_t x, bool v) { mask_[u * pixels_ + x] = v ? 1 : 0; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    std::span<std::uint8_t> mask() { return mask_; }
    std::span<const std::uint8_t> mask() const { return mask_; }

    std::size_t valid_count() const { return std::size_t(std::count(mask_.begin(), mask_.end(), 1)); }

    /// The EPI as an image with views as rows (for PNG output and metrics).
    ImageView as_image() const { return {data_, views_, pixels_}; }

    static Epi from_image(ImageView img, Orientation o = Orientation::horizontal) {
        Epi e(img.height(), img.width(), o);
        std::copy(img.data().begin(), img.data().end(), e.data_.begin());
        return e;
    }

    bool operator==(const Epi&) const = default;

private:
    std::size_t views_ = 0;
    std::size_t pixels_ = 0;
    Orientation orientation_ = Orientation::horizontal;
    std::vector<float> data_;
    std::vector<std::uint8_t> mask_;
};

/// Horizontal: EPI(u, x) = L(fixed_view, u, fixed_row, x) with fixed_view = v, fixed_row = y.
/// Vertical:   EPI(v, y) = L(v, fixed_view, y, fixed_row) with fixed_view = u, fixed_row = x.
inline Epi extract_epi(const LightField4D& lf, Orientation orientation, std::size_t fixed_view,
                       std::size_t fixed_row) {
    const auto& d = lf.dims();
    if (orientation == Orientation::horizontal) {
        if (fixed_view >= d.views_v || fixed_row >= d.height) throw OutOfRange("horizontal EPI index out of range");
        Epi e(d.views_u, d.width, orientation);
        for (std::size_t u = 0; u < d.views_u; ++u)
            for (std::size_t x = 0; x < d.width; ++x)
                for (std::size_t c = 0; c < kChannels; ++c) e(u, x, c) = lf(fixed_view, u, fixed_row, x, c);
        return e;
    }
    if (fixed_view >= d.views_u || fixed_row >= d.width) throw OutOfRange("vertical EPI index out of range");
    Epi e(d.views_v, d.height, orientation);
    for (std::size_t v = 0; v < d.views_v; ++v)
        for (std::size_t y = 0; y < d.height; ++y)
            for (std::size_t c = 0; c < kChannels; ++c) e(v, y, c) = lf(v, fixed_view, y, fixed_row, c);
    return e;
}

/// Writes an EPI back into a light field (inverse of extract_epi).
inline void insert_epi(LightField4D& lf, const Epi& e, std::size_t fixed_view, std::size_t fixed_row) {
    const auto& d = lf.dims();
    if (e.orientation() == Orientation::horizontal) {
        if (e.views() != d.views_u || e.pixels() != d.width) throw ShapeError("EPI does not fit light field");
        for (std::size_t u = 0; u < d.views_u; ++u)
            for (std::size_t x = 0; x < d.width; ++x)
                for (std::size_t c = 0; c < kChannels; ++c) lf(fixed_view, u, fixed_row, x, c) = e(u, x, c);
        return;
    }
    if (e.views() != d.views_v || e.pixels() != d.height) throw ShapeError("EPI does not fit light field");
    for (std::size_t v = 0; v < d.views_v; ++v)
        for (std::size_t y = 0; y < d.height; ++y)
            for (std::size_t c = 0; c < kChannels; ++c) lf(v, fixed_view, y, fixed_row, c) = e(v, y, c);
}

/// A scene point's trace in the EPI: x(u) = x0 + u d.
struct EpipolarLine {
    double d = 0.0;
    double x0 = 0.0;
    std::array<float, 3> color{1.0f, 1.0f, 1.0f};
};

/// Position in view u1 of the ray (u, x) with disparity d: x1 = (u1 - u) d + x.
inline double project_to_view(double u, double x, double d, double u1) { return (u1 - u) * d + x; }

/// View in which the ray (u, x) with disparity d reaches position x2: u2 = (x2 - x)/d + u.
inline double project_to_position(double u, double x, double d, double x2) {
    if (d == 0.0) throw DomainError("zero disparity: the epipolar line never reaches another position");
    return (x2 - x) / d + u;
}

enum class Continuity : std::uint8_t { continuous, jumping };

/// Epipolar lines with |d| <= 1 stay 8-connected from row to row; larger
/// disparities break them into isolated points.
inline Continuity classify_continuity(double d) {
    if (!std::isfinite(d)) throw DomainError("disparity must be finite");
    return std::abs(d) <= 1.0 ? Continuity::continuous : Continuity::jumping;
}

namespace detail {
inline bool is_integral(double v) { return std::abs(v - std::round(v)) < 1e-12; }
}  // namespace detail

/// EPI_d(u, x) = EPI(u, x + u d). A line x = x0 + u d becomes vertical, so
/// positive d compensates content that moves rightward with increasing u.
/// Integral shifts copy samples exactly; fractional ones use the cubic
/// kernel. Reads outside the row clamp to the edge and are masked invalid.
inline Epi shear(const Epi& in, double d) {
    if (!std::isfinite(d)) throw DomainError("shear disparity must be finite");
    Epi out(in.views(), in.pixels(), in.orientation());
    const std::size_t S = in.pixels();
    for (std::size_t u = 0; u < in.views(); ++u) {
        const double shift = double(u) * d;
        if (detail::is_integral(shift)) {
            const auto s = std::ptrdiff_t(std::llround(shift));
            for (std::size_t x = 0; x < S; ++x) {
                const std::ptrdiff_t src = std::ptrdiff_t(x) + s;
                const auto cs = std::size_t(clamp_index(src, S));
                for (std::size_t c = 0; c < kChannels; ++c) out(u, x, c) = in(u, cs, c);
                out.set_valid(u, x, src >= 0 && src < std::ptrdiff_t(S) && in.valid(u, cs));
            }
            continue;
        }
        for (std::size_t x = 0; x < S; ++x) {
            const double pos = double(x) + shift;
            const CubicTaps taps = cubic_taps(pos, S);
            for (std::size_t c = 0; c < kChannels; ++c) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) acc += taps.weight[k] * in(u, std::size_t(taps.index[k]), c);
                out(u, x, c) = float(std::clamp(acc, 0.0, 1.0));
            }
            const bool inside = pos >= 0.0 && pos <= double(S - 1);
            bool ok = inside;
            if (inside) {
                const auto lo = std::size_t(std::floor(pos));
                const auto hi = std::min(lo + 1, S - 1);
                ok = in.valid(u, lo) && in.valid(u, hi);
            }
            out.set_valid(u, x, ok);
        }
    }
    return out;
}

/// Flip along the angular axis. Not part of the augmentation set; kept for
/// tests that check flips never arise from it.
inline Epi flip_angular(const Epi& in) {
    Epi out(in.views(), in.pixels(), in.orientation());
    for (std::size_t u = 0; u < in.views(); ++u)
        for (std::size_t x = 0; x < in.pixels(); ++x) {
            for (std::size_t c = 0; c < kChannels; ++c) out(u, x, c) = in(in.views() - 1 - u, x, c);
            out.set_valid(u, x, in.valid(in.views() - 1 - u, x));
        }
    return out;
}

inline Epi flip_spatial(const Epi& in) {
    Epi out(in.views(), in.pixels(), in.orientation());
    for (std::size_t u = 0; u < in.views(); ++u)
        for (std::size_t x = 0; x < in.pixels(); ++x) {
            for (std::size_t c = 0; c < kChannels; ++c) out(u, x, c) = in(u, in.pixels() - 1 - x, c);
            out.set_valid(u, x, in.valid(u, in.pixels() - 1 - x));
        }
    return out;
}

/// Mask that drops ceil(|d_max| (A - 1)) columns at both spatial edges, where
/// A is the EPI's angular size: pixels whose epipolar line can leave the EPI.
inline std::vector<std::uint8_t> boundary_mask(std::size_t views, std::size_t pixels, double d_max) {
    const auto margin = std::size_t(std::ceil(std::abs(d_max) * double(views > 0 ? views - 1 : 0) - 1e-9));
    std::vector<std::uint8_t> m(views * pixels, 0);
    for (std::size_t u = 0; u < views; ++u)
        for (std::size_t x = 0; x < pixels; ++x)
            m[u * pixels + x] = (x >= margin && x + margin < pixels) ? 1 : 0;
    return m;
}

}  // namespace lumiforge
