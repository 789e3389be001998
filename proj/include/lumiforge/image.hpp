#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lumiforge/error.hpp"

namespace lumiforge {

inline constexpr std::size_t kChannels = 3;

/// Non-owning read-only view of an interleaved (y, x, rgb) image.
class ImageView {
public:
    ImageView(std::span<const float> data, std::size_t height, std::size_t width)
        : data_(data), height_(height), width_(width) {}

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::span<const float> data() const { return data_; }

    float operator()(std::size_t y, std::size_t x, std::size_t c) const {
        return data_[(y * width_ + x) * kChannels + c];
    }

private:
    std::span<const float> data_;
    std::size_t height_;
    std::size_t width_;
};

/// Owning RGB image with samples in [0,1].
class Image {
public:
    Image() = default;
    Image(std::size_t height, std::size_t width, float fill = 0.0f)
        : height_(height), width_(width), data_(height * width * kChannels, fill) {}

    explicit Image(ImageView view)
        : height_(view.height()), width_(view.width()),
          data_(view.data().begin(), view.data().end()) {}

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return data_.size(); }

    float& operator()(std::size_t y, std::size_t x, std::size_t c) {
        return data_[(y * width_ + x) * kChannels + c];
    }
    float operator()(std::size_t y, std::size_t x, std::size_t c) const {
        return data_[(y * width_ + x) * kChannels + c];
    }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    ImageView view() const { return {data_, height_, width_}; }
    operator ImageView() const { return view(); }

    bool operator==(const Image&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<float> data_;
};

/// Throws unless every sample is finite and inside [0,1].
inline void check_unit_range(std::span<const float> data, const std::string& what) {
    for (float v : data) {
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
            throw DomainError(what + ": sample outside [0,1] or non-finite");
        }
    }
}

}  // namespace lumiforge
