#pragma once

// Geometric-optics model of a Plenoptic 1.0 camera in one spatial and one
// angular dimension. Every pixel under a micro-lens belongs to one
// sub-aperture view; a scene point at depth Z shows up in neighbouring views
// shifted by its disparity d(Z). When d is an integer for every point, all
// views record the same point set (the generalized focus case). Otherwise
// views interleave and the union of recorded points exceeds the micro-lens
// count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lumiforge/error.hpp"

namespace lumiforge::optics {

struct CameraConfig {
    double f_main = 50.0;        // main-lens focal length f_M (mm)
    double f_mla = 52.0;         // main lens to MLA distance f_mM (mm)
    std::size_t n_micro = 100;   // micro-lenses along one axis
    std::size_t n_views = 9;     // pixels per micro-lens along one axis
    double micro_pitch = 0.1;    // micro-lens pitch (mm)
    double aperture = 10.0;      // main-lens aperture diameter (mm)

    /// Sub-aperture baseline on the main lens.
    double baseline() const { return aperture / double(n_views); }

    void validate() const {
        if (!(f_main > 0 && f_mla > 0 && micro_pitch > 0 && aperture > 0)) {
            throw DomainError("camera lengths must be positive");
        }
        if (!(f_mla > f_main)) throw DomainError("f_mla must exceed f_main (real image side)");
        if (n_micro < 2 || n_views < 2) throw DomainError("n_micro and n_views must be >= 2");
    }
};

/// Depth Z_f conjugate to the MLA plane: 1/f_M = 1/f_mM + 1/Z_f.
inline double gaussian_conjugate(const CameraConfig& cfg) {
    if (cfg.f_mla == cfg.f_main) throw DomainError("f_mla == f_main: conjugate depth is at infinity");
    return 1.0 / (1.0 / cfg.f_main - 1.0 / cfg.f_mla);
}

/// Scale K in d(Z) = K (1/Z - 1/Z_f), in micro-lens pitches times mm.
inline double disparity_scale(const CameraConfig& cfg) {
    return cfg.f_mla * cfg.baseline() / cfg.micro_pitch;
}

/// Disparity (micro-lens pitches per view step) of a point at depth Z.
///
/// A ray leaving sub-aperture a through the image of the point lands on the
/// MLA at a + (x' - a) f_mM / z', so one view step of baseline B moves it by
/// B (1 - f_mM / z') = B f_mM (1/Z - 1/Z_f). Points nearer than Z_f get
/// positive disparity; d -> -K/Z_f as Z -> infinity.
inline double disparity_of_depth(const CameraConfig& cfg, double depth) {
    if (!(depth > 0) || !std::isfinite(depth)) throw DomainError("depth must be positive and finite");
    const double zf = gaussian_conjugate(cfg);
    return disparity_scale(cfg) * (1.0 / depth - 1.0 / zf);
}

/// True iff every disparity lies within `tol` of an integer (vacuously true when empty).
inline bool is_generalized_focus(std::span<const double> disparities, double tol) {
    return std::all_of(disparities.begin(), disparities.end(),
                       [tol](double d) { return std::abs(d - std::round(d)) <= tol; });
}

/// Per-view sample positions on the in-focus reference plane, in pitch units.
struct SamplePattern {
    double disparity = 0.0;
    std::vector<std::vector<double>> views;  // views[j][i], i over micro-lenses
};

/// Shift of view j relative to the central view, in pitch units.
inline double view_shift(const CameraConfig& cfg, std::size_t j, double d) {
    const double centre = (double(cfg.n_views) - 1.0) / 2.0;
    return (double(j) - centre) * d;
}

/// View j records the point at i + (j - c) d through micro-lens i, where c is
/// the central view. Each view therefore holds exactly n_micro positions.
inline SamplePattern sample_pattern(const CameraConfig& cfg, double d) {
    if (!std::isfinite(d)) throw DomainError("disparity must be finite");
    SamplePattern p{d, {}};
    p.views.resize(cfg.n_views);
    for (std::size_t j = 0; j < cfg.n_views; ++j) {
        const double s = view_shift(cfg, j, d);
        auto& row = p.views[j];
        row.resize(cfg.n_micro);
        for (std::size_t i = 0; i < cfg.n_micro; ++i) row[i] = double(i) + s;
    }
    return p;
}

inline constexpr double kMergeTolerance = 1e-9;

/// Number of distinct scene points recorded across all views.
///
/// Positions are merged when closer than 1e-9 pitch. Samples outside the
/// micro-lens row's footprint [-1/2, n_micro - 1/2) are dropped, so for
/// d = p/q (lowest terms, q <= n_views) the interior count is q * n_micro and
/// shrinks only by boundary truncation when a residue class has no view with
/// a shift inside (-1/2, 1/2].
inline std::size_t count_recorded_points(const CameraConfig& cfg, double d) {
    const SamplePattern p = sample_pattern(cfg, d);
    const double lo = -0.5;
    const double hi = double(cfg.n_micro) - 0.5;
    std::vector<double> all;
    all.reserve(cfg.n_views * cfg.n_micro);
    for (const auto& view : p.views) {
        for (double x : view) {
            if (x >= lo - kMergeTolerance && x < hi - kMergeTolerance) all.push_back(x);
        }
    }
    std::sort(all.begin(), all.end());
    std::size_t count = 0;
    double last = 0.0;
    for (double x : all) {
        if (count == 0 || x - last > kMergeTolerance) {
            ++count;
            last = x;
        }
    }
    return count;
}

/// Raster of the epipolar line x = x0 + j d: the covered pixel column per view row.
struct EpiSketch {
    double disparity = 0.0;
    long x0 = 0;
    std::vector<long> columns;  // one per view
};

inline EpiSketch epi_sketch(const CameraConfig& cfg, double d, long x0 = 0) {
    if (!std::isfinite(d)) throw DomainError("disparity must be finite");
    EpiSketch s{d, x0, {}};
    s.columns.resize(cfg.n_views);
    for (std::size_t j = 0; j < cfg.n_views; ++j) {
        // The epsilon keeps products like 5 * 0.2 on the integer they denote.
        s.columns[j] = x0 + long(std::floor(double(j) * d + 1e-9));
    }
    return s;
}

struct SweepRow {
    double disparity;
    std::size_t effective_count;
};

inline std::vector<SweepRow> disparity_sweep(const CameraConfig& cfg, double d_min, double d_max,
                                             std::size_t steps) {
    if (steps == 0) throw DomainError("steps must be >= 1");
    std::vector<SweepRow> rows;
    rows.reserve(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = steps == 1 ? 0.0 : double(k) / double(steps - 1);
        const double d = d_min + (d_max - d_min) * t;
        rows.push_back({d, count_recorded_points(cfg, d)});
    }
    return rows;
}

}  // namespace lumiforge::optics
