#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "lumiforge/error.hpp"
#include "lumiforge/image.hpp"

namespace lumiforge::png {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

/// Reads an 8- or 16-bit PNG (gray, RGB, with or without alpha) into [0,1] RGB.
inline Image read(const std::filesystem::path& path) {
    detail::FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw LoadError("cannot open image: " + path.string());

    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw LoadError("not a PNG file: " + path.string());
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError("libpng initialisation failed");
    }

    Image image;
    std::vector<png_byte> buffer;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError("corrupt PNG: " + path.string());
    }

    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const auto color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const auto width = png_get_image_width(png, info);
    const auto height = png_get_image_height(png, info);
    const int out_depth = png_get_bit_depth(png, info);
    const auto row_bytes = png_get_rowbytes(png, info);

    buffer.resize(row_bytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    image = Image(height, width);
    const std::size_t n = std::size_t(height) * width * kChannels;
    auto out = image.data();
    if (out_depth == 16) {
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned v = (unsigned(buffer[2 * i]) << 8) | buffer[2 * i + 1];
            out[i] = float(v) / 65535.0f;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) out[i] = float(buffer[i]) / 255.0f;
    }
    return image;
}

inline std::uint16_t quantize16(float v) {
    return std::uint16_t(std::lround(std::clamp(v, 0.0f, 1.0f) * 65535.0f));
}

/// Writes an RGB PNG at 8 or 16 bits per channel (values clamped to [0,1]).
inline void write(const std::filesystem::path& path, ImageView image, int bit_depth = 16) {
    if (bit_depth != 8 && bit_depth != 16) throw DomainError("PNG bit depth must be 8 or 16");
    detail::FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw IoError("cannot write image: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialisation failed");
    }

    const std::size_t w = image.width();
    const std::size_t h = image.height();
    const std::size_t bytes = bit_depth / 8;
    std::vector<png_byte> buffer(w * h * kChannels * bytes);
    const auto src = image.data();
    for (std::size_t i = 0; i < w * h * kChannels; ++i) {
        if (bit_depth == 16) {
            const auto q = quantize16(src[i]);
            buffer[2 * i] = png_byte(q >> 8);
            buffer[2 * i + 1] = png_byte(q & 0xff);
        } else {
            buffer[i] = png_byte(std::lround(std::clamp(src[i], 0.0f, 1.0f) * 255.0f));
        }
    }
    std::vector<png_bytep> rows(h);
    for (std::size_t y = 0; y < h; ++y) rows[y] = buffer.data() + y * w * kChannels * bytes;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), bit_depth, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(file.get()) != 0) throw IoError("PNG flush failed: " + path.string());
}

}  // namespace lumiforge::png
