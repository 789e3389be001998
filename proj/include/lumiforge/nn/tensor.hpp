#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lumiforge/error.hpp"

namespace lumiforge::nn {

/// Storage for anything Eigen maps. Eigen picks its summation order from the
/// pointer's alignment, so a fixed alignment keeps results bit-reproducible.
template <class T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

/// (batch, channel, height, width) array. Height is the angular axis of an
/// EPI and width the spatial one.
template <class T>
class Tensor4 {
public:
    Tensor4() = default;
    Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, T fill = T(0))
        : n_(n), c_(c), h_(h), w_(w), data_(n * c * h * w, fill) {}

    std::size_t n() const { return n_; }
    std::size_t c() const { return c_; }
    std::size_t h() const { return h_; }
    std::size_t w() const { return w_; }
    std::size_t size() const { return data_.size(); }
    std::size_t plane() const { return h_ * w_; }
    std::size_t sample_size() const { return c_ * h_ * w_; }

    bool same_shape(const Tensor4& o) const { return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

    T& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
        return data_[((n * c_ + c) * h_ + y) * w_ + x];
    }
    const T& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
        return data_[((n * c_ + c) * h_ + y) * w_ + x];
    }

    T* sample(std::size_t n) { return data_.data() + n * sample_size(); }
    const T* sample(std::size_t n) const { return data_.data() + n * sample_size(); }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    std::string shape_string() const {
        return "(" + std::to_string(n_) + "," + std::to_string(c_) + "," + std::to_string(h_) + "," +
               std::to_string(w_) + ")";
    }

    bool operator==(const Tensor4&) const = default;

private:
    std::size_t n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    AlignedVector<T> data_;
};

/// Debug check: every value finite.
template <class T>
void check_finite(const Tensor4<T>& t, const char* what) {
    for (T v : t.data()) {
        if (!std::isfinite(v)) throw DomainError(std::string(what) + ": non-finite tensor value");
    }
}

template <class T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
        throw ShapeError("concat: " + a.shape_string() + " vs " + b.shape_string());
    }
    Tensor4<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
    for (std::size_t n = 0; n < a.n(); ++n) {
        std::copy_n(a.sample(n), a.sample_size(), out.sample(n));
        std::copy_n(b.sample(n), b.sample_size(), out.sample(n) + a.sample_size());
    }
    return out;
}

/// Channels [first, first + count) of t.
template <class T>
Tensor4<T> slice_channels(const Tensor4<T>& t, std::size_t first, std::size_t count) {
    Tensor4<T> out(t.n(), count, t.h(), t.w());
    for (std::size_t n = 0; n < t.n(); ++n) {
        std::copy_n(t.sample(n) + first * t.plane(), count * t.plane(), out.sample(n));
    }
    return out;
}

/// Writes src into channels starting at `first` of dst.
template <class T>
void set_channels(Tensor4<T>& dst, std::size_t first, const Tensor4<T>& src) {
    for (std::size_t n = 0; n < src.n(); ++n) {
        std::copy_n(src.sample(n), src.sample_size(), dst.sample(n) + first * dst.plane());
    }
}

template <class T>
void add_inplace(Tensor4<T>& dst, const Tensor4<T>& src) {
    if (!dst.same_shape(src)) throw ShapeError("add: " + dst.shape_string() + " vs " + src.shape_string());
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

/// Swaps the height and width axes.
template <class T>
Tensor4<T> transpose_hw(const Tensor4<T>& t) {
    Tensor4<T> out(t.n(), t.c(), t.w(), t.h());
    for (std::size_t n = 0; n < t.n(); ++n)
        for (std::size_t c = 0; c < t.c(); ++c)
            for (std::size_t y = 0; y < t.h(); ++y)
                for (std::size_t x = 0; x < t.w(); ++x) out(n, c, x, y) = t(n, c, y, x);
    return out;
}

/// Reverses the height axis.
template <class T>
Tensor4<T> flip_h(const Tensor4<T>& t) {
    Tensor4<T> out(t.n(), t.c(), t.h(), t.w());
    for (std::size_t n = 0; n < t.n(); ++n)
        for (std::size_t c = 0; c < t.c(); ++c)
            for (std::size_t y = 0; y < t.h(); ++y)
                std::copy_n(&t(n, c, t.h() - 1 - y, 0), t.w(), &out(n, c, y, 0));
    return out;
}

template <class T>
Tensor4<T> flip_w(const Tensor4<T>& t) {
    return transpose_hw(flip_h(transpose_hw(t)));
}

template <class U, class T>
Tensor4<U> cast(const Tensor4<T>& t) {
    Tensor4<U> out(t.n(), t.c(), t.h(), t.w());
    std::transform(t.data().begin(), t.data().end(), out.data().begin(), [](T v) { return U(v); });
    return out;
}

}  // namespace lumiforge::nn
