#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "lumiforge/epi.hpp"
#include "lumiforge/error.hpp"
#include "lumiforge/image.hpp"
#include "lumiforge/light_field.hpp"
#include "lumiforge/nn/network.hpp"
#include "lumiforge/parallel.hpp"
#include "lumiforge/scene.hpp"

namespace lumiforge {

inline constexpr double kPsnrCap = 99.0;

/// Mean squared error over pixels whose mask entry is non-zero (all pixels
/// when the mask is empty). Averaged over channels.
inline double masked_mse(ImageView a, ImageView b, std::span<const std::uint8_t> mask = {}) {
    if (a.height() != b.height() || a.width() != b.width()) throw ShapeError("metric inputs differ in shape");
    const std::size_t n = a.height() * a.width();
    if (!mask.empty() && mask.size() != n) throw ShapeError("mask does not match image");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask.empty() && mask[i] == 0) continue;
        ++count;
        for (std::size_t c = 0; c < kChannels; ++c) {
            const double e = double(a.data()[i * kChannels + c]) - double(b.data()[i * kChannels + c]);
            sum += e * e;
        }
    }
    if (count == 0) throw DomainError("metric mask selects no pixels");
    return sum / double(count * kChannels);
}

/// Peak 1.0; identical inputs give the 99 dB cap.
inline double psnr(ImageView a, ImageView b, std::span<const std::uint8_t> mask = {}) {
    const double mse = masked_mse(a, b, mask);
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

inline constexpr std::size_t kSsimWindow = 11;

/// SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// L = 1, over all fully-inside window positions; mean over positions and
/// channels.
inline double ssim(ImageView a, ImageView b) {
    if (a.height() != b.height() || a.width() != b.width()) throw ShapeError("metric inputs differ in shape");
    if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
        throw DomainError("SSIM needs images of at least 11 x 11 pixels");
    }
    std::array<double, kSsimWindow> g{};
    double gs = 0.0;
    for (std::size_t i = 0; i < kSsimWindow; ++i) {
        const double t = double(i) - 5.0;
        g[i] = std::exp(-t * t / (2.0 * 1.5 * 1.5));
        gs += g[i];
    }
    for (double& v : g) v /= gs;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const std::size_t H = a.height() - kSsimWindow + 1, W = a.width() - kSsimWindow + 1;
    double total = 0.0;
    for (std::size_t c = 0; c < kChannels; ++c) {
        double ch = 0.0;
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (std::size_t i = 0; i < kSsimWindow; ++i)
                    for (std::size_t j = 0; j < kSsimWindow; ++j) {
                        const double w = g[i] * g[j];
                        const double va = a(y + i, x + j, c), vb = b(y + i, x + j, c);
                        ma += w * va;
                        mb += w * vb;
                        saa += w * (va * va);
                        sbb += w * (vb * vb);
                        sab += w * (va * vb);
                    }
                const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
                ch += ((2.0 * (ma * mb) + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
            }
        total += ch / double(H * W);
    }
    return total / double(kChannels);
}

inline std::optional<double> try_ssim(ImageView a, ImageView b) {
    if (a.height() < kSsimWindow || a.width() < kSsimWindow) return std::nullopt;
    return ssim(a, b);
}

// ---------------------------------------------------------------------------
// Light-field reports.

struct ViewMetric {
    std::size_t view_v = 0;
    std::size_t view_u = 0;
    double psnr = 0.0;
    std::optional<double> ssim;
};

struct DisparityBin {
    double d = 0.0;
    double psnr_mean = 0.0;
    double psnr_std = 0.0;
};

struct MetricReport {
    std::vector<ViewMetric> views;
    double mean_psnr = 0.0;
    std::optional<double> mean_ssim;
    std::vector<DisparityBin> curve;
};

inline MetricReport evaluate_light_fields(const LightField4D& ref, const LightField4D& test, std::size_t threads = 1) {
    if (!(ref.dims() == test.dims())) throw ShapeError("light fields differ in shape");
    const LfDims d = ref.dims();
    MetricReport r;
    r.views.resize(d.view_count());
    parallel_for(d.view_count(), threads, [&](std::size_t i) {
        const std::size_t v = i / d.views_u, u = i % d.views_u;
        r.views[i] = {v, u, psnr(ref.view_at(v, u), test.view_at(v, u)), try_ssim(ref.view_at(v, u), test.view_at(v, u))};
    });
    double ps = 0.0, ss = 0.0;
    bool have_ssim = true;
    for (const auto& m : r.views) {
        ps += m.psnr;
        if (m.ssim) ss += *m.ssim;
        else have_ssim = false;
    }
    r.mean_psnr = ps / double(r.views.size());
    if (have_ssim) r.mean_ssim = ss / double(r.views.size());
    return r;
}

inline void write_view_csv(const MetricReport& r, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "view_v,view_u,psnr,ssim\n" << std::setprecision(10);
    for (const auto& m : r.views) {
        os << m.view_v << ',' << m.view_u << ',' << m.psnr << ',';
        if (m.ssim) os << *m.ssim;
        os << '\n';
    }
}

inline void write_curve_csv(const std::vector<DisparityBin>& curve, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "d,psnr_mean,psnr_std\n" << std::setprecision(10);
    for (const auto& b : curve) os << b.d << ',' << b.psnr_mean << ',' << b.psnr_std << '\n';
}

// ---------------------------------------------------------------------------
// EPI-level evaluation.

/// Bicubic upsample clamped to [0,1]: the baseline a zero residual reproduces.
inline Epi bicubic_baseline(const Epi& lr) {
    Epi e = nn::bicubic_upsample(lr);
    for (float& v : e.data()) v = std::clamp(v, 0.0f, 1.0f);
    return e;
}

/// PSNR of an HR estimate with the boundary columns of the pair's largest
/// disparity removed.
inline double epi_psnr(const Epi& estimate, const TrainingPair& pair) {
    const auto mask = boundary_mask(pair.hr.views(), pair.hr.pixels(), pair.max_abs_disparity());
    return psnr(estimate.as_image(), pair.hr.as_image(), mask);
}

/// PSNR of the network (or of the bicubic baseline when `net` is null) on one pair.
inline double pair_psnr(const nn::Network<float>* net, const TrainingPair& pair) {
    return epi_psnr(net ? nn::network_forward(*net, pair.lr) : bicubic_baseline(pair.lr), pair);
}

inline std::vector<double> pair_psnrs(const nn::Network<float>* net, const std::vector<TrainingPair>& pairs,
                                      std::size_t threads = 1) {
    std::vector<double> out(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t i) { out[i] = pair_psnr(net, pairs[i]); });
    return out;
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw DomainError("mean of an empty set");
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

inline double stddev_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / double(v.size()));
}

/// For each d: `trials` single-layer EPI pairs at exactly that disparity,
/// super-resolved by `net` (bicubic baseline if null).
inline std::vector<DisparityBin> disparity_sweep(const nn::Network<float>* net, const std::vector<double>& disparities,
                                                 std::size_t trials, std::uint64_t seed, GenConfig cfg,
                                                 std::size_t threads = 1) {
    if (trials == 0) throw DomainError("trials per disparity must be >= 1");
    std::vector<DisparityBin> curve;
    for (std::size_t k = 0; k < disparities.size(); ++k) {
        cfg.d_min = cfg.d_max = disparities[k];
        std::vector<double> ps(trials);
        parallel_for(trials, threads, [&](std::size_t t) {
            auto rng = item_rng(seed, k * trials + t, 0x5ee9);
            ps[t] = pair_psnr(net, make_pair(random_scene(rng, cfg, 1), cfg));
        });
        curve.push_back({disparities[k], mean_of(ps), stddev_of(ps)});
    }
    return curve;
}

struct VariantScore {
    double mean_psnr = 0.0;
    std::optional<double> mean_ssim;
};

struct AblationReport {
    VariantScore a, b;
    double delta = 0.0;  // a - b, mean PSNR
    std::size_t a_better = 0, b_better = 0, ties = 0;
    std::size_t samples = 0;
};

/// Paired comparison from per-sample PSNRs of two variants on the same set.
inline AblationReport paired_report(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) throw ShapeError("ablation needs equal, non-empty evaluation sets");
    AblationReport r;
    r.samples = a.size();
    r.a.mean_psnr = mean_of(a);
    r.b.mean_psnr = mean_of(b);
    r.delta = r.a.mean_psnr - r.b.mean_psnr;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) ++r.a_better;
        else if (b[i] > a[i]) ++r.b_better;
        else ++r.ties;
    }
    return r;
}

/// Runs both networks over `pairs` and reports the paired PSNR difference;
/// SSIM is included when every HR EPI is at least 11 x 11.
inline AblationReport compare_ablation(const nn::Network<float>& a, const nn::Network<float>& b,
                                       const std::vector<TrainingPair>& pairs, std::size_t threads = 1) {
    std::vector<double> pa(pairs.size()), pb(pairs.size());
    std::vector<std::optional<double>> sa(pairs.size()), sb(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t i) {
        const Epi ea = nn::network_forward(a, pairs[i].lr), eb = nn::network_forward(b, pairs[i].lr);
        pa[i] = epi_psnr(ea, pairs[i]);
        pb[i] = epi_psnr(eb, pairs[i]);
        sa[i] = try_ssim(ea.as_image(), pairs[i].hr.as_image());
        sb[i] = try_ssim(eb.as_image(), pairs[i].hr.as_image());
    });
    AblationReport r = paired_report(pa, pb);
    if (std::all_of(sa.begin(), sa.end(), [](const auto& s) { return s.has_value(); })) {
        double ta = 0, tb = 0;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            ta += *sa[i];
            tb += *sb[i];
        }
        r.a.mean_ssim = ta / double(pairs.size());
        r.b.mean_ssim = tb / double(pairs.size());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Zoom-out with a Lanczos-3 filter (stretched by 1/scale when shrinking).

inline double lanczos3(double t) {
    t = std::abs(t);
    if (t < 1e-12) return 1.0;
    if (t >= 3.0) return 0.0;
    const double pi = 3.14159265358979323846;
    return 3.0 * std::sin(pi * t) * std::sin(pi * t / 3.0) / (pi * pi * t * t);
}

namespace detail {

struct FilterRow {
    std::vector<std::size_t> index;
    std::vector<double> weight;
};

inline std::vector<FilterRow> lanczos_rows(std::size_t in, std::size_t out) {
    const double scale = double(out) / double(in);
    const double stretch = std::min(1.0, scale);
    const double support = 3.0 / stretch;
    std::vector<FilterRow> rows(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double center = (double(o) + 0.5) / scale - 0.5;
        const auto lo = std::ptrdiff_t(std::floor(center - support)), hi = std::ptrdiff_t(std::ceil(center + support));
        double sum = 0.0;
        for (std::ptrdiff_t i = lo; i <= hi; ++i) {
            const double w = lanczos3((double(i) - center) * stretch);
            if (w == 0.0) continue;
            rows[o].index.push_back(std::size_t(std::clamp<std::ptrdiff_t>(i, 0, std::ptrdiff_t(in) - 1)));
            rows[o].weight.push_back(w);
            sum += w;
        }
        for (double& w : rows[o].weight) w /= sum;
    }
    return rows;
}

}  // namespace detail

/// Resizes to round(scale * size) per axis; output is clamped to [0,1].
inline Image zoom_out(ImageView in, double scale) {
    if (!(scale > 0.0 && scale <= 1.0)) throw DomainError("zoom-out scale must be in (0, 1]");
    const auto oh = std::max<std::size_t>(1, std::size_t(std::lround(double(in.height()) * scale)));
    const auto ow = std::max<std::size_t>(1, std::size_t(std::lround(double(in.width()) * scale)));
    const auto rx = detail::lanczos_rows(in.width(), ow);
    const auto ry = detail::lanczos_rows(in.height(), oh);
    std::vector<double> tmp(in.height() * ow * kChannels, 0.0);
    for (std::size_t y = 0; y < in.height(); ++y)
        for (std::size_t x = 0; x < ow; ++x)
            for (std::size_t k = 0; k < rx[x].index.size(); ++k)
                for (std::size_t c = 0; c < kChannels; ++c)
                    tmp[(y * ow + x) * kChannels + c] += rx[x].weight[k] * in(y, rx[x].index[k], c);
    Image out(oh, ow);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x)
            for (std::size_t c = 0; c < kChannels; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < ry[y].index.size(); ++k)
                    acc += ry[y].weight[k] * tmp[(ry[y].index[k] * ow + x) * kChannels + c];
                out(y, x, c) = float(std::clamp(acc, 0.0, 1.0));
            }
    return out;
}

/// Every view of a light field zoomed out by `scale`.
inline LightField4D zoom_out(const LightField4D& lf, double scale) {
    const LfDims d = lf.dims();
    const Image probe = zoom_out(lf.view_at(0, 0), scale);
    LightField4D out({d.views_v, d.views_u, probe.height(), probe.width()});
    for (std::size_t v = 0; v < d.views_v; ++v)
        for (std::size_t u = 0; u < d.views_u; ++u) out.set_view(v, u, zoom_out(lf.view_at(v, u), scale));
    return out;
}

}  // namespace lumiforge
