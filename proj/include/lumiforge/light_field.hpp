#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lumiforge/error.hpp"
#include "lumiforge/image.hpp"
#include "lumiforge/png_io.hpp"

namespace lumiforge {

/// Angular grid (V,U) and per-view spatial size (Y,X).
struct LfDims {
    std::size_t views_v = 0;
    std::size_t views_u = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t view_count() const { return views_v * views_u; }
    std::size_t view_size() const { return height * width * kChannels; }
    bool operator==(const LfDims&) const = default;
};

/// Dense 4D light field of RGB views indexed (v, u, y, x).
///
/// u and x are the horizontal axes, v and y the vertical ones. Samples live in
/// one contiguous buffer, view-major, so a view is a contiguous (y, x, rgb) block.
class LightField4D {
public:
    LightField4D() = default;
    explicit LightField4D(LfDims dims, float fill = 0.0f) : dims_(dims) {
        if (dims.views_v == 0 || dims.views_u == 0 || dims.height == 0 || dims.width == 0) {
            throw ShapeError("light field dimensions must all be >= 1");
        }
        data_.assign(dims.view_count() * dims.view_size(), fill);
    }

    const LfDims& dims() const { return dims_; }

    float& operator()(std::size_t v, std::size_t u, std::size_t y, std::size_t x, std::size_t c) {
        return data_[index(v, u, y, x, c)];
    }
    float operator()(std::size_t v, std::size_t u, std::size_t y, std::size_t x, std::size_t c) const {
        return data_[index(v, u, y, x, c)];
    }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    /// Stored view (v, u); no copy is made.
    ImageView view_at(std::size_t v, std::size_t u) const {
        check_view(v, u);
        const std::size_t n = dims_.view_size();
        return {std::span<const float>(data_).subspan((v * dims_.views_u + u) * n, n), dims_.height,
                dims_.width};
    }

    void set_view(std::size_t v, std::size_t u, ImageView image) {
        check_view(v, u);
        if (image.height() != dims_.height || image.width() != dims_.width) {
            throw ShapeError("view size does not match light field");
        }
        std::copy(image.data().begin(), image.data().end(),
                  data_.begin() + std::ptrdiff_t((v * dims_.views_u + u) * dims_.view_size()));
    }

    bool operator==(const LightField4D&) const = default;

private:
    std::size_t index(std::size_t v, std::size_t u, std::size_t y, std::size_t x, std::size_t c) const {
        return (((v * dims_.views_u + u) * dims_.height + y) * dims_.width + x) * kChannels + c;
    }
    void check_view(std::size_t v, std::size_t u) const {
        if (v >= dims_.views_v || u >= dims_.views_u) {
            throw OutOfRange("view index (" + std::to_string(v) + "," + std::to_string(u) +
                             ") outside " + std::to_string(dims_.views_v) + "x" +
                             std::to_string(dims_.views_u) + " grid");
        }
    }

    LfDims dims_;
    std::vector<float> data_;
};

inline ImageView view_at(const LightField4D& lf, std::size_t v, std::size_t u) { return lf.view_at(v, u); }

/// Per-pixel disparity, in pixels per unit view step.
struct DisparityMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> d;

    double operator()(std::size_t y, std::size_t x) const { return d[y * width + x]; }
};

/// Manifest: header line "V U Y X" followed by V*U image paths, row-major
/// (v outer, u inner), relative to the manifest's directory.
inline LightField4D load_light_field(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw LoadError("cannot open manifest: " + manifest_path.string());

    std::string header;
    if (!std::getline(in, header)) throw LoadError("empty manifest: " + manifest_path.string());
    std::istringstream hs(header);
    long long v = 0, u = 0, y = 0, x = 0;
    if (!(hs >> v >> u >> y >> x) || v < 1 || u < 1 || y < 1 || x < 1) {
        throw LoadError("manifest header must be 'V U Y X' with positive values: " + manifest_path.string());
    }

    std::vector<std::string> paths;
    std::string token;
    while (in >> token) paths.push_back(token);
    const LfDims dims{std::size_t(v), std::size_t(u), std::size_t(y), std::size_t(x)};
    if (paths.size() != dims.view_count()) {
        throw LoadError("manifest lists " + std::to_string(paths.size()) + " images, grid " +
                        std::to_string(v) + "x" + std::to_string(u) + " needs " +
                        std::to_string(dims.view_count()));
    }

    LightField4D lf(dims);
    const auto base = manifest_path.parent_path();
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const auto image_path = base / paths[i];
        if (!std::filesystem::exists(image_path)) throw LoadError("missing view image: " + image_path.string());
        const Image img = png::read(image_path);
        if (img.height() != dims.height || img.width() != dims.width) {
            throw LoadError("dimension mismatch in " + image_path.string() + ": got " +
                            std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                            ", expected " + std::to_string(dims.height) + "x" + std::to_string(dims.width));
        }
        lf.set_view(i / dims.views_u, i % dims.views_u, img);
    }
    return lf;
}

/// Writes 16-bit PNG views plus "manifest.txt" into `dir`; returns the manifest path.
inline std::filesystem::path save_light_field(const LightField4D& lf, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

    const auto& d = lf.dims();
    const auto manifest = dir / "manifest.txt";
    std::ofstream out(manifest);
    if (!out) throw IoError("cannot write manifest: " + manifest.string());
    out << d.views_v << ' ' << d.views_u << ' ' << d.height << ' ' << d.width << '\n';
    for (std::size_t v = 0; v < d.views_v; ++v) {
        for (std::size_t u = 0; u < d.views_u; ++u) {
            const std::string name = "view_" + std::to_string(v) + "_" + std::to_string(u) + ".png";
            png::write(dir / name, lf.view_at(v, u), 16);
            out << name << '\n';
        }
    }
    out.flush();
    if (!out) throw IoError("manifest write failed: " + manifest.string());
    return manifest;
}

}  // namespace lumiforge
