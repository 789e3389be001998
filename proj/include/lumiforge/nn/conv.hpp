#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "lumiforge/error.hpp"
#include "lumiforge/nn/tensor.hpp"

namespace lumiforge::nn {

/// Geometry of a cross-correlation layer. For transposed layers the fields
/// describe the forward convolution that the layer is the adjoint of.
struct ConvSpec {
    std::size_t in_ch = 1;
    std::size_t out_ch = 1;
    std::size_t kh = 3;
    std::size_t kw = 3;
    std::size_t stride = 1;
    std::size_t pad_h = 1;
    std::size_t pad_w = 1;

    /// Stride-1 layer whose zero padding preserves the spatial size.
    static ConvSpec same(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw) {
        if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("'same' convolutions need odd kernels");
        return {in_ch, out_ch, kh, kw, 1, kh / 2, kw / 2};
    }
    /// 3x3 stride-2 layer halving each (even) dimension.
    static ConvSpec down(std::size_t in_ch, std::size_t out_ch) { return {in_ch, out_ch, 3, 3, 2, 1, 1}; }

    std::size_t out_h(std::size_t h) const { return (h + 2 * pad_h - kh) / stride + 1; }
    std::size_t out_w(std::size_t w) const { return (w + 2 * pad_w - kw) / stride + 1; }
    std::size_t patch() const { return in_ch * kh * kw; }
    std::size_t weight_count() const { return out_ch * patch(); }

    bool operator==(const ConvSpec&) const = default;
};

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

/// Unfolds one (C, H, W) sample into a (C kh kw) x (Ho Wo) matrix.
template <class T>
void im2col(const T* x, std::size_t h, std::size_t w, const ConvSpec& s, T* cols) {
    const std::size_t ho = s.out_h(h), wo = s.out_w(w);
    for (std::size_t c = 0; c < s.in_ch; ++c) {
        const T* plane = x + c * h * w;
        for (std::size_t i = 0; i < s.kh; ++i) {
            for (std::size_t j = 0; j < s.kw; ++j) {
                T* row = cols + ((c * s.kh + i) * s.kw + j) * ho * wo;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    const std::ptrdiff_t iy = std::ptrdiff_t(oy * s.stride + i) - std::ptrdiff_t(s.pad_h);
                    T* dst = row + oy * wo;
                    if (iy < 0 || iy >= std::ptrdiff_t(h)) {
                        std::fill_n(dst, wo, T(0));
                        continue;
                    }
                    const T* src = plane + std::size_t(iy) * w;
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                        const std::ptrdiff_t ix = std::ptrdiff_t(ox * s.stride + j) - std::ptrdiff_t(s.pad_w);
                        dst[ox] = (ix < 0 || ix >= std::ptrdiff_t(w)) ? T(0) : src[ix];
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: scatters-adds the column matrix back into (C, H, W).
template <class T>
void col2im(const T* cols, std::size_t h, std::size_t w, const ConvSpec& s, T* x) {
    const std::size_t ho = s.out_h(h), wo = s.out_w(w);
    for (std::size_t c = 0; c < s.in_ch; ++c) {
        T* plane = x + c * h * w;
        for (std::size_t i = 0; i < s.kh; ++i) {
            for (std::size_t j = 0; j < s.kw; ++j) {
                const T* row = cols + ((c * s.kh + i) * s.kw + j) * ho * wo;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    const std::ptrdiff_t iy = std::ptrdiff_t(oy * s.stride + i) - std::ptrdiff_t(s.pad_h);
                    if (iy < 0 || iy >= std::ptrdiff_t(h)) continue;
                    T* dst = plane + std::size_t(iy) * w;
                    const T* src = row + oy * wo;
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                        const std::ptrdiff_t ix = std::ptrdiff_t(ox * s.stride + j) - std::ptrdiff_t(s.pad_w);
                        if (ix >= 0 && ix < std::ptrdiff_t(w)) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

/// y = W * x + b (cross-correlation), weights laid out [out][in][kh][kw].
template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const ConvSpec& s, std::span<const T> weight,
                          std::span<const T> bias) {
    if (x.c() != s.in_ch) throw ShapeError("conv2d: input has " + std::to_string(x.c()) + " channels, expected " +
                                           std::to_string(s.in_ch));
    if (weight.size() != s.weight_count() || bias.size() != s.out_ch) throw ShapeError("conv2d: parameter size");
    const std::size_t ho = s.out_h(x.h()), wo = s.out_w(x.w());
    Tensor4<T> y(x.n(), s.out_ch, ho, wo);
    AlignedVector<T> cols(s.patch() * ho * wo);
    const ConstMatMap<T> wm(weight.data(), s.out_ch, s.patch());
    for (std::size_t n = 0; n < x.n(); ++n) {
        im2col(x.sample(n), x.h(), x.w(), s, cols.data());
        MatMap<T> ym(y.sample(n), s.out_ch, ho * wo);
        ym.noalias() = wm * ConstMatMap<T>(cols.data(), s.patch(), ho * wo);
        for (std::size_t o = 0; o < s.out_ch; ++o) ym.row(o).array() += bias[o];
    }
    return y;
}

/// Accumulates dW, db; returns dL/dx.
template <class T>
Tensor4<T> conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& dy, const ConvSpec& s,
                           std::span<const T> weight, std::span<T> dweight, std::span<T> dbias) {
    const std::size_t ho = s.out_h(x.h()), wo = s.out_w(x.w());
    if (dy.c() != s.out_ch || dy.h() != ho || dy.w() != wo || dy.n() != x.n()) {
        throw ShapeError("conv2d backward: gradient shape " + dy.shape_string());
    }
    Tensor4<T> dx(x.n(), x.c(), x.h(), x.w());
    AlignedVector<T> cols(s.patch() * ho * wo);
    const ConstMatMap<T> wm(weight.data(), s.out_ch, s.patch());
    MatMap<T> dwm(dweight.data(), s.out_ch, s.patch());
    RowMatrix<T> dcols(s.patch(), ho * wo);
    for (std::size_t n = 0; n < x.n(); ++n) {
        im2col(x.sample(n), x.h(), x.w(), s, cols.data());
        const ConstMatMap<T> dym(dy.sample(n), s.out_ch, ho * wo);
        dwm.noalias() += dym * ConstMatMap<T>(cols.data(), s.patch(), ho * wo).transpose();
        for (std::size_t o = 0; o < s.out_ch; ++o) dbias[o] += dym.row(o).sum();
        dcols.noalias() = wm.transpose() * dym;
        col2im(dcols.data(), x.h(), x.w(), s, dx.sample(n));
    }
    return dx;
}

/// Transposed (up) convolution: the adjoint of the stride-2 layer `s` that maps
/// (2H, 2W) to (H, W). Here s.in_ch is the up layer's output channel count and
/// s.out_ch its input channel count; weights are [in][out][kh][kw].
template <class T>
Tensor4<T> conv_transpose_forward(const Tensor4<T>& x, const ConvSpec& s, std::span<const T> weight,
                                  std::span<const T> bias) {
    if (x.c() != s.out_ch) throw ShapeError("up-conv: input channel mismatch");
    if (weight.size() != s.weight_count() || bias.size() != s.in_ch) throw ShapeError("up-conv: parameter size");
    const std::size_t ho = x.h() * s.stride, wo = x.w() * s.stride;
    if (s.out_h(ho) != x.h() || s.out_w(wo) != x.w()) throw ShapeError("up-conv: geometry mismatch");
    Tensor4<T> y(x.n(), s.in_ch, ho, wo);
    const ConstMatMap<T> wm(weight.data(), s.out_ch, s.patch());
    RowMatrix<T> cols(s.patch(), x.plane());
    for (std::size_t n = 0; n < x.n(); ++n) {
        cols.noalias() = wm.transpose() * ConstMatMap<T>(x.sample(n), s.out_ch, x.plane());
        col2im(cols.data(), ho, wo, s, y.sample(n));
        for (std::size_t c = 0; c < s.in_ch; ++c) {
            T* p = y.sample(n) + c * y.plane();
            for (std::size_t i = 0; i < y.plane(); ++i) p[i] += bias[c];
        }
    }
    return y;
}

template <class T>
Tensor4<T> conv_transpose_backward(const Tensor4<T>& x, const Tensor4<T>& dy, const ConvSpec& s,
                                   std::span<const T> weight, std::span<T> dweight, std::span<T> dbias) {
    if (dy.c() != s.in_ch || dy.h() != x.h() * s.stride || dy.w() != x.w() * s.stride) {
        throw ShapeError("up-conv backward: gradient shape " + dy.shape_string());
    }
    Tensor4<T> dx(x.n(), x.c(), x.h(), x.w());
    const ConstMatMap<T> wm(weight.data(), s.out_ch, s.patch());
    MatMap<T> dwm(dweight.data(), s.out_ch, s.patch());
    AlignedVector<T> cols(s.patch() * x.plane());
    for (std::size_t n = 0; n < x.n(); ++n) {
        im2col(dy.sample(n), dy.h(), dy.w(), s, cols.data());
        const ConstMatMap<T> cm(cols.data(), s.patch(), x.plane());
        const ConstMatMap<T> xm(x.sample(n), s.out_ch, x.plane());
        dwm.noalias() += xm * cm.transpose();
        MatMap<T>(dx.sample(n), s.out_ch, x.plane()).noalias() = wm * cm;
        for (std::size_t c = 0; c < s.in_ch; ++c) {
            const T* p = dy.sample(n) + c * dy.plane();
            T acc = 0;
            for (std::size_t i = 0; i < dy.plane(); ++i) acc += p[i];
            dbias[c] += acc;
        }
    }
    return dx;
}

template <class T>
void relu_inplace(Tensor4<T>& t) {
    for (T& v : t.data()) v = v > T(0) ? v : T(0);
}

/// dy *= (y > 0), with y the ReLU output.
template <class T>
void relu_backward_inplace(Tensor4<T>& dy, const Tensor4<T>& y) {
    auto d = dy.data();
    auto o = y.data();
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!(o[i] > T(0))) d[i] = T(0);
}

}  // namespace lumiforge::nn
