#pragma once

// 4D light-field super-resolution from per-EPI inference.
//
// A pass over horizontal EPIs doubles (u, x); a pass over vertical EPIs
// doubles (v, y). Two passes in either order give (2V-1, 2U-1, 2Y, 2X).

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "lumiforge/epi.hpp"
#include "lumiforge/error.hpp"
#include "lumiforge/light_field.hpp"
#include "lumiforge/nn/network.hpp"
#include "lumiforge/parallel.hpp"

namespace lumiforge {

enum class PassOrder { h_first, v_first, average };

inline const char* to_string(PassOrder p) {
    switch (p) {
        case PassOrder::h_first: return "h-first";
        case PassOrder::v_first: return "v-first";
        case PassOrder::average: return "avg";
    }
    return "?";
}

inline PassOrder parse_pass_order(const std::string& s) {
    if (s == "h-first") return PassOrder::h_first;
    if (s == "v-first") return PassOrder::v_first;
    if (s == "avg" || s == "average") return PassOrder::average;
    throw DomainError("unknown plan '" + s + "' (expected h-first, v-first or avg)");
}

inline constexpr std::size_t kMinTileOverlap = 16;

struct SRPlan {
    PassOrder order = PassOrder::h_first;
    std::size_t tile_size = 256;  // LR pixels along the EPI's spatial axis
    std::size_t overlap = kMinTileOverlap;
    bool pin_input_views = false;
    std::size_t threads = 1;

    void validate() const {
        if (overlap < kMinTileOverlap) throw DomainError("tile overlap must be >= 16 pixels");
        if (tile_size <= overlap) throw DomainError("tile size must exceed the overlap");
    }
};

// ---------------------------------------------------------------------------
// Spatial tiling of EPIs.

struct EpiTile {
    std::size_t offset = 0;  // first column in the full EPI
    Epi epi;
};

struct TiledEpi {
    std::size_t pixels = 0;  // full width
    std::vector<EpiTile> tiles;
};

/// Tiles of `tile_size` columns stepping by tile_size - overlap; the last
/// tile is aligned to the right edge so every tile has full size.
inline TiledEpi tile_epi(const Epi& e, std::size_t tile_size, std::size_t overlap) {
    if (overlap < kMinTileOverlap) throw DomainError("tile overlap must be >= 16 pixels");
    if (tile_size <= overlap) throw DomainError("tile size must exceed the overlap");
    TiledEpi t{e.pixels(), {}};
    std::vector<std::size_t> starts;
    if (e.pixels() <= tile_size) {
        starts.push_back(0);
    } else {
        for (std::size_t s = 0;; s += tile_size - overlap) {
            if (s + tile_size >= e.pixels()) {
                starts.push_back(e.pixels() - tile_size);
                break;
            }
            starts.push_back(s);
        }
    }
    for (std::size_t s : starts) {
        const std::size_t w = std::min(tile_size, e.pixels());
        Epi tile(e.views(), w, e.orientation());
        for (std::size_t u = 0; u < e.views(); ++u)
            for (std::size_t x = 0; x < w; ++x) {
                for (std::size_t c = 0; c < kChannels; ++c) tile(u, x, c) = e(u, s + x, c);
                tile.set_valid(u, x, e.valid(u, s + x));
            }
        t.tiles.push_back({s, std::move(tile)});
    }
    return t;
}

/// Inverse of tile_epi with linear feathering across each overlap:
/// out = prev + w (next - prev), w rising from 0 to 1. Equal samples in an
/// overlap are therefore reproduced exactly.
inline Epi stitch(const TiledEpi& t) {
    if (t.tiles.empty()) throw DomainError("nothing to stitch");
    const std::size_t views = t.tiles.front().epi.views();
    Epi out(views, t.pixels, t.tiles.front().epi.orientation());
    std::size_t covered = 0;  // columns [0, covered) already written
    for (const auto& tile : t.tiles) {
        if (tile.epi.views() != views || tile.offset + tile.epi.pixels() > t.pixels) {
            throw ShapeError("tile does not fit the stitched EPI");
        }
        if (tile.offset > covered) throw ShapeError("tiles leave a gap");
        const std::size_t blend_end = std::min(covered, tile.offset + tile.epi.pixels());
        const std::size_t blend_len = blend_end - tile.offset;
        for (std::size_t u = 0; u < views; ++u)
            for (std::size_t x = 0; x < tile.epi.pixels(); ++x) {
                const std::size_t gx = tile.offset + x;
                if (gx < blend_end) {
                    const float w = float(double(x + 1) / double(blend_len + 1));
                    for (std::size_t c = 0; c < kChannels; ++c) {
                        const float prev = out(u, gx, c);
                        out(u, gx, c) = prev + w * (tile.epi(u, x, c) - prev);
                    }
                    out.set_valid(u, gx, out.valid(u, gx) && tile.epi.valid(u, x));
                } else {
                    for (std::size_t c = 0; c < kChannels; ++c) out(u, gx, c) = tile.epi(u, x, c);
                    out.set_valid(u, gx, tile.epi.valid(u, x));
                }
            }
        covered = std::max(covered, tile.offset + tile.epi.pixels());
    }
    if (covered != t.pixels) throw ShapeError("tiles do not cover the EPI");
    return out;
}

/// Network super-resolution of one EPI, tiled along its spatial axis.
inline Epi super_resolve_epi(const nn::Network<float>& net, const Epi& lr, const SRPlan& plan) {
    const TiledEpi tiles = tile_epi(lr, plan.tile_size, plan.overlap);
    if (tiles.tiles.size() == 1) return nn::network_forward(net, lr);
    TiledEpi hr{2 * lr.pixels(), {}};
    for (const auto& t : tiles.tiles) hr.tiles.push_back({2 * t.offset, nn::network_forward(net, t.epi)});
    return stitch(hr);
}

// ---------------------------------------------------------------------------

/// One pass: every EPI of the given orientation is replaced by its
/// super-resolved version.
inline LightField4D sr_pass(const LightField4D& in, Orientation o, const nn::Network<float>& net, const SRPlan& plan) {
    const LfDims d = in.dims();
    const bool h = o == Orientation::horizontal;
    const LfDims od = h ? LfDims{d.views_v, 2 * d.views_u - 1, d.height, 2 * d.width}
                        : LfDims{2 * d.views_v - 1, d.views_u, 2 * d.height, d.width};
    LightField4D out(od);
    const std::size_t outer = h ? d.views_v : d.views_u, rows = h ? d.height : d.width;
    parallel_for(outer * rows, plan.threads, [&](std::size_t i) {
        const std::size_t fixed_view = i / rows, fixed_row = i % rows;
        const Epi e = super_resolve_epi(net, extract_epi(in, o, fixed_view, fixed_row), plan);
        insert_epi(out, e, fixed_view, fixed_row);
    });
    return out;
}

/// (V, U, Y, X) -> (2V-1, 2U-1, 2Y, 2X).
inline LightField4D super_resolve(const LightField4D& lf, const nn::Network<float>& net, const SRPlan& plan = {}) {
    plan.validate();
    const LfDims d = lf.dims();
    if (d.views_v < 2 || d.views_u < 2) throw ShapeError("super-resolution needs at least 2 x 2 views");
    if (d.height < 2 || d.width < 2) throw ShapeError("super-resolution needs views of at least 2 x 2 pixels");
    if (net.spec().in_channels != kChannels) throw ShapeError("checkpoint expects a different channel count");

    auto run = [&](PassOrder order) {
        if (order == PassOrder::h_first)
            return sr_pass(sr_pass(lf, Orientation::horizontal, net, plan), Orientation::vertical, net, plan);
        return sr_pass(sr_pass(lf, Orientation::vertical, net, plan), Orientation::horizontal, net, plan);
    };
    LightField4D out = plan.order == PassOrder::average ? run(PassOrder::h_first) : run(plan.order);
    if (plan.order == PassOrder::average) {
        const LightField4D other = run(PassOrder::v_first);
        auto a = out.data();
        auto b = other.data();
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.5f * (a[i] + b[i]);
    }
    if (plan.pin_input_views) {
        for (std::size_t v = 0; v < d.views_v; ++v)
            for (std::size_t u = 0; u < d.views_u; ++u)
                for (std::size_t y = 0; y < d.height; ++y)
                    for (std::size_t x = 0; x < d.width; ++x)
                        for (std::size_t c = 0; c < kChannels; ++c) out(2 * v, 2 * u, 2 * y, 2 * x, c) = lf(v, u, y, x, c);
    }
    return out;
}

}  // namespace lumiforge
