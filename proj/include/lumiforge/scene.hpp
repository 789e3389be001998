#pragma once

// Procedural fronto-parallel layered scenes rendered straight into EPIs,
// and the (LR, HR) training pairs built from them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "lumiforge/epi.hpp"
#include "lumiforge/error.hpp"
#include "lumiforge/parallel.hpp"

namespace lumiforge {

using Rgb = std::array<float, 3>;

/// Piecewise texture over a 1D coordinate: segment k spans
/// [breaks[k], breaks[k+1]) and blends linearly from `start` to `end`.
struct Texture1D {
    struct Segment {
        Rgb start{};
        Rgb end{};
        bool opaque = true;
    };
    std::vector<double> breaks;
    std::vector<Segment> segments;

    /// Colour at t, or nothing where the texture is transparent or undefined.
    std::optional<Rgb> sample(double t) const {
        if (segments.empty() || t < breaks.front() || t >= breaks.back()) return std::nullopt;
        const auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
        const auto k = std::size_t(it - breaks.begin()) - 1;
        const Segment& s = segments[k];
        if (!s.opaque) return std::nullopt;
        const double w = (t - breaks[k]) / (breaks[k + 1] - breaks[k]);
        Rgb c{};
        for (std::size_t i = 0; i < 3; ++i) c[i] = float(double(s.start[i]) + w * double(s.end[i] - s.start[i]));
        return c;
    }

    static Texture1D solid(Rgb color, double lo = -1e9, double hi = 1e9) {
        return {{lo, hi}, {{color, color, true}}};
    }
};

/// A fronto-parallel layer: its texture point t appears at x = t + u d in view u.
struct SceneLayer {
    double disparity = 0.0;
    Texture1D texture;
};

/// Layers front to back; larger disparity means nearer and occludes.
struct LayeredScene {
    std::vector<SceneLayer> layers;

    void validate() const {
        if (layers.empty()) throw DomainError("scene has no layers");
        for (std::size_t k = 1; k < layers.size(); ++k) {
            if (!(layers[k - 1].disparity > layers[k].disparity)) {
                throw DomainError("scene layers must be strictly ordered by decreasing disparity");
            }
        }
    }
};

/// Renders the scene as an A x S EPI. Each pixel averages `samples_per_pixel`
/// point samples spread over its footprint; every point sample takes the
/// front-most opaque layer (black if none covers it).
inline Epi render_epi(const LayeredScene& scene, std::size_t views, std::size_t pixels,
                      std::size_t samples_per_pixel = 1) {
    scene.validate();
    if (views == 0 || pixels == 0 || samples_per_pixel == 0) throw DomainError("render size must be positive");
    Epi e(views, pixels);
    const double inv = 1.0 / double(samples_per_pixel);
    for (std::size_t u = 0; u < views; ++u) {
        for (std::size_t x = 0; x < pixels; ++x) {
            std::array<double, 3> acc{};
            for (std::size_t s = 0; s < samples_per_pixel; ++s) {
                const double px = double(x) + (double(s) + 0.5) * inv - 0.5;
                for (const auto& layer : scene.layers) {
                    if (auto c = layer.texture.sample(px - double(u) * layer.disparity)) {
                        for (std::size_t i = 0; i < 3; ++i) acc[i] += (*c)[i];
                        break;
                    }
                }
            }
            for (std::size_t i = 0; i < 3; ++i) e(u, x, i) = float(acc[i] * inv);
        }
    }
    return e;
}

struct GenConfig {
    std::size_t views = 5;    // LR angular size A; HR has 2A - 1 views
    std::size_t pixels = 32;  // LR spatial size S; HR has 2S pixels
    double d_min = -8.0;
    double d_max = 8.0;
    std::size_t max_layers = 3;
    double segment_min = 2.0;  // texture segment length range, HR pixels
    double segment_max = 12.0;
    double transparent_fraction = 0.5;  // of segments in non-background layers
    std::size_t samples_per_pixel = 4;
    std::size_t threads = 1;
};

struct TrainingPair {
    Epi lr;
    Epi hr;
    std::vector<double> disparities;  // per layer, front to back

    double max_abs_disparity() const {
        double m = 0.0;
        for (double d : disparities) m = std::max(m, std::abs(d));
        return m;
    }
};

/// Independent stream per (seed, index) so serial and parallel generation agree.
inline std::mt19937_64 item_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(index),
                      std::uint32_t(index >> 32), std::uint32_t(salt)};
    return std::mt19937_64(seq);
}

inline double draw_uniform(std::mt19937_64& rng, double lo, double hi) {
    // 53-bit mantissa from one draw; std::uniform_real_distribution is not
    // specified bit-exactly across standard libraries.
    const double unit = double(rng() >> 11) * (1.0 / 9007199254740992.0);
    return lo + (hi - lo) * unit;
}

inline std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
    return std::size_t(draw_uniform(rng, 0.0, double(n)));
}

inline Texture1D random_texture(std::mt19937_64& rng, double lo, double hi, const GenConfig& cfg,
                                bool background) {
    Texture1D tex;
    double t = lo;
    tex.breaks.push_back(t);
    while (t < hi) {
        t += draw_uniform(rng, cfg.segment_min, cfg.segment_max);
        tex.breaks.push_back(t);
        Texture1D::Segment s;
        for (auto& v : s.start) v = float(draw_uniform(rng, 0.05, 0.95));
        const bool gradient = draw_uniform(rng, 0.0, 1.0) < 0.4;
        for (std::size_t i = 0; i < 3; ++i) {
            s.end[i] = gradient ? float(std::clamp(double(s.start[i]) + draw_uniform(rng, -0.3, 0.3), 0.0, 1.0))
                                : s.start[i];
        }
        s.opaque = background || draw_uniform(rng, 0.0, 1.0) >= cfg.transparent_fraction;
        tex.segments.push_back(s);
    }
    return tex;
}

/// A random scene whose layers' disparities are drawn uniformly from
/// [d_min, d_max]. `layers` of 0 draws the count from 1..max_layers.
inline LayeredScene random_scene(std::mt19937_64& rng, const GenConfig& cfg, std::size_t layers = 0) {
    if (layers == 0) layers = 1 + draw_index(rng, std::max<std::size_t>(1, cfg.max_layers));
    std::vector<double> ds;
    while (ds.size() < layers) {
        const double d = draw_uniform(rng, cfg.d_min, cfg.d_max);
        if (std::find(ds.begin(), ds.end(), d) == ds.end()) ds.push_back(d);
    }
    std::sort(ds.begin(), ds.end(), std::greater<>());
    const std::size_t hr_views = 2 * cfg.views - 1;
    const double reach = double(hr_views - 1) * std::max(std::abs(cfg.d_min), std::abs(cfg.d_max)) + 4.0;
    LayeredScene scene;
    for (std::size_t k = 0; k < ds.size(); ++k) {
        const bool background = k + 1 == ds.size();
        scene.layers.push_back({ds[k], random_texture(rng, -reach, double(2 * cfg.pixels) + reach, cfg, background)});
    }
    return scene;
}

/// LR(u, x) = HR(2u, 2x), masks included.
inline Epi subsample(const Epi& hr) {
    Epi lr((hr.views() + 1) / 2, (hr.pixels() + 1) / 2, hr.orientation());
    for (std::size_t u = 0; u < lr.views(); ++u)
        for (std::size_t x = 0; x < lr.pixels(); ++x) {
            for (std::size_t c = 0; c < kChannels; ++c) lr(u, x, c) = hr(2 * u, 2 * x, c);
            lr.set_valid(u, x, hr.valid(2 * u, 2 * x));
        }
    return lr;
}

inline TrainingPair make_pair(const LayeredScene& scene, const GenConfig& cfg) {
    TrainingPair p;
    p.hr = render_epi(scene, 2 * cfg.views - 1, 2 * cfg.pixels, cfg.samples_per_pixel);
    p.lr = subsample(p.hr);
    for (const auto& l : scene.layers) p.disparities.push_back(l.disparity);
    return p;
}

inline TrainingPair gen_training_pair(std::uint64_t seed, std::uint64_t index, const GenConfig& cfg) {
    auto rng = item_rng(seed, index);
    return make_pair(random_scene(rng, cfg), cfg);
}

inline std::vector<TrainingPair> gen_training_pairs(std::uint64_t seed, std::size_t count, const GenConfig& cfg) {
    if (count == 0) throw DomainError("count must be >= 1");
    if (cfg.views < 2 || cfg.pixels < 2) throw DomainError("LR EPIs need at least 2 views and 2 pixels");
    if (!(cfg.d_min <= cfg.d_max)) throw DomainError("empty disparity range");
    std::vector<TrainingPair> pairs(count);
    parallel_for(count, cfg.threads, [&](std::size_t i) { pairs[i] = gen_training_pair(seed, i, cfg); });
    return pairs;
}

// ---------------------------------------------------------------------------
// Augmentation. The operator set is channel permutations times integer
// shears. Flips are deliberately absent: flipping an EPI swaps which layer
// occludes which and teaches physically impossible occlusions.

inline constexpr int kMaxAugmentShear = 3;

struct AugmentOp {
    std::array<std::uint8_t, 3> permutation{0, 1, 2};  // out channel c reads in channel permutation[c]
    int shear = 0;

    bool operator==(const AugmentOp&) const = default;
};

inline std::vector<std::array<std::uint8_t, 3>> channel_permutations() {
    std::array<std::uint8_t, 3> p{0, 1, 2};
    std::vector<std::array<std::uint8_t, 3>> all;
    do {
        all.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return all;
}

/// Every operator the augmenter can apply.
inline std::vector<AugmentOp> augmentation_ops() {
    std::vector<AugmentOp> ops;
    for (const auto& p : channel_permutations())
        for (int s = -kMaxAugmentShear; s <= kMaxAugmentShear; ++s) ops.push_back({p, s});
    return ops;
}

inline Epi permute_channels(const Epi& in, const std::array<std::uint8_t, 3>& perm) {
    Epi out = in;
    for (std::size_t u = 0; u < in.views(); ++u)
        for (std::size_t x = 0; x < in.pixels(); ++x)
            for (std::size_t c = 0; c < kChannels; ++c) out(u, x, c) = in(u, x, perm[c]);
    return out;
}

/// Shearing both members by the same integer d keeps LR(u,x) = HR(2u,2x) on
/// valid pixels: row 2u of HR moves 2ud HR pixels, row u of LR moves ud LR pixels.
inline TrainingPair apply_augment(const TrainingPair& in, const AugmentOp& op) {
    TrainingPair out{permute_channels(in.lr, op.permutation), permute_channels(in.hr, op.permutation),
                     in.disparities};
    if (op.shear != 0) {
        out.lr = shear(out.lr, op.shear);
        out.hr = shear(out.hr, op.shear);
        for (double& d : out.disparities) d -= op.shear;
    }
    return out;
}

struct AugmentPolicy {
    double permute_probability = 0.5;
    double shear_probability = 0.5;
};

inline AugmentOp random_augment_op(std::mt19937_64& rng, const AugmentPolicy& policy = {}) {
    AugmentOp op;
    if (draw_uniform(rng, 0.0, 1.0) < policy.permute_probability) {
        const auto perms = channel_permutations();
        op.permutation = perms[draw_index(rng, perms.size())];
    }
    if (draw_uniform(rng, 0.0, 1.0) < policy.shear_probability) {
        op.shear = int(draw_index(rng, 2 * kMaxAugmentShear + 1)) - kMaxAugmentShear;
    }
    return op;
}

inline TrainingPair augment(const TrainingPair& pair, std::mt19937_64& rng, const AugmentPolicy& policy = {}) {
    return apply_augment(pair, random_augment_op(rng, policy));
}

}  // namespace lumiforge
