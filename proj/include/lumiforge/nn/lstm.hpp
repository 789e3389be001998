#pragma once

// Convolutional LSTM (no peepholes) scanned over an EPI.
//
//   [i f o g] = [sig sig sig tanh](Wx * x_t + Wh * h_{t-1} + b)
//   c_t = f . c_{t-1} + i . g
//   h_t = o . tanh(c_t)
//
// Wx and Wh are 1 x k convolutions along the slice consumed at each step.
// The scan runs in a canonical frame (sequence = rows, slice = columns);
// other directions flip and/or transpose into that frame and back.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lumiforge/error.hpp"
#include "lumiforge/nn/conv.hpp"
#include "lumiforge/nn/tensor.hpp"

namespace lumiforge::nn {

enum class ScanDirection { top_down, bottom_up, left_right, right_left };

inline constexpr ScanDirection kScanDirections[] = {ScanDirection::top_down, ScanDirection::bottom_up,
                                                    ScanDirection::left_right, ScanDirection::right_left};

inline const char* to_string(ScanDirection d) {
    switch (d) {
        case ScanDirection::top_down: return "top_down";
        case ScanDirection::bottom_up: return "bottom_up";
        case ScanDirection::left_right: return "left_right";
        case ScanDirection::right_left: return "right_left";
    }
    return "?";
}

struct ConvLstmSpec {
    std::size_t in_ch = 1;
    std::size_t hidden = 100;
    std::size_t kernel = 3;

    ConvSpec input_conv() const { return {in_ch, 4 * hidden, 1, kernel, 1, 0, kernel / 2}; }
    ConvSpec hidden_conv() const { return {hidden, 4 * hidden, 1, kernel, 1, 0, kernel / 2}; }
    bool operator==(const ConvLstmSpec&) const = default;
};

template <class T>
struct ConvLstmParams {
    std::span<const T> wx;  // [4H][C][1][k]
    std::span<const T> wh;  // [4H][H][1][k]
    std::span<const T> bias;  // [4H]
};

template <class T>
struct ConvLstmGrads {
    std::span<T> wx;
    std::span<T> wh;
    std::span<T> bias;
};

/// Saved activations of one canonical scan. Time-major buffers are laid out
/// (n, t, channel, column) so a step's slice is contiguous.
template <class T>
struct ConvLstmCache {
    Tensor4<T> x;      // (N, C, T, L)
    Tensor4<T> gates;  // (N, T, 4H, L), post-activation
    Tensor4<T> cell;   // (N, T, H, L)
    Tensor4<T> hidden; // (N, T, H, L)
    Tensor4<T> h0, c0; // (N, H, 1, L)
};

namespace detail {

template <class T>
T sigmoid(T v) {
    return T(1) / (T(1) + std::exp(-v));
}

}  // namespace detail

/// Scans rows top to bottom. Returns h for every step as (N, H, T, L);
/// `c_last` receives the final cell state (N, H, 1, L).
template <class T>
Tensor4<T> conv_lstm_scan_forward(const Tensor4<T>& x, const ConvLstmSpec& s, const ConvLstmParams<T>& p,
                                  const Tensor4<T>* h0, const Tensor4<T>* c0, ConvLstmCache<T>& cache,
                                  Tensor4<T>* c_last = nullptr) {
    if (x.c() != s.in_ch) throw ShapeError("c-LSTM: input has " + std::to_string(x.c()) + " channels, expected " +
                                           std::to_string(s.in_ch));
    const std::size_t N = x.n(), T_ = x.h(), L = x.w(), H = s.hidden, G = 4 * H;
    for (const Tensor4<T>* st : {h0, c0}) {
        if (st && (st->n() != N || st->c() != H || st->h() != 1 || st->w() != L)) {
            throw ShapeError("c-LSTM: state shape " + st->shape_string());
        }
    }
    cache.x = x;
    cache.h0 = h0 ? *h0 : Tensor4<T>(N, H, 1, L);
    cache.c0 = c0 ? *c0 : Tensor4<T>(N, H, 1, L);
    cache.gates = Tensor4<T>(N, T_, G, L);
    cache.cell = Tensor4<T>(N, T_, H, L);
    cache.hidden = Tensor4<T>(N, T_, H, L);

    const Tensor4<T> xg = conv2d_forward(x, s.input_conv(), p.wx, p.bias);  // (N, 4H, T, L)
    const ConvSpec hs = s.hidden_conv();
    const ConstMatMap<T> whm(p.wh.data(), G, hs.patch());
    AlignedVector<T> cols(hs.patch() * L);
    RowMatrix<T> pre(G, L);

    for (std::size_t n = 0; n < N; ++n) {
        const T* h_prev = cache.h0.sample(n);
        const T* c_prev = cache.c0.sample(n);
        for (std::size_t t = 0; t < T_; ++t) {
            for (std::size_t g = 0; g < G; ++g)
                for (std::size_t l = 0; l < L; ++l) pre(g, l) = xg(n, g, t, l);
            im2col(h_prev, 1, L, hs, cols.data());
            pre.noalias() += whm * ConstMatMap<T>(cols.data(), hs.patch(), L);

            T* gates = &cache.gates(n, t, 0, 0);
            T* cell = &cache.cell(n, t, 0, 0);
            T* hid = &cache.hidden(n, t, 0, 0);
            const T* pp = pre.data();
            for (std::size_t k = 0; k < 3 * H * L; ++k) gates[k] = detail::sigmoid(pp[k]);
            for (std::size_t k = 3 * H * L; k < G * L; ++k) gates[k] = std::tanh(pp[k]);
            const T* gi = gates;
            const T* gf = gates + H * L;
            const T* go = gates + 2 * H * L;
            const T* gg = gates + 3 * H * L;
            for (std::size_t k = 0; k < H * L; ++k) {
                cell[k] = gf[k] * c_prev[k] + gi[k] * gg[k];
                hid[k] = go[k] * std::tanh(cell[k]);
            }
            h_prev = hid;
            c_prev = cell;
        }
    }

    Tensor4<T> y(N, H, T_, L);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 0; t < T_; ++t)
            for (std::size_t h = 0; h < H; ++h)
                for (std::size_t l = 0; l < L; ++l) y(n, h, t, l) = cache.hidden(n, t, h, l);
    if (c_last) {
        *c_last = Tensor4<T>(N, H, 1, L);
        if (T_ > 0)
            for (std::size_t n = 0; n < N; ++n)
                std::copy_n(&cache.cell(n, T_ - 1, 0, 0), H * L, c_last->sample(n));
        else
            *c_last = cache.c0;
    }
    return y;
}

/// Backpropagation through time. dy is (N, H, T, L); dc_last optionally
/// carries a gradient on the final cell state. Returns dL/dx and writes the
/// gradients of the initial state when requested.
template <class T>
Tensor4<T> conv_lstm_scan_backward(const ConvLstmCache<T>& cache, const Tensor4<T>& dy, const ConvLstmSpec& s,
                                   const ConvLstmParams<T>& p, const ConvLstmGrads<T>& g,
                                   const Tensor4<T>* dc_last = nullptr, Tensor4<T>* dh0 = nullptr,
                                   Tensor4<T>* dc0 = nullptr) {
    const Tensor4<T>& x = cache.x;
    const std::size_t N = x.n(), T_ = x.h(), L = x.w(), H = s.hidden, G = 4 * H;
    if (dy.n() != N || dy.c() != H || dy.h() != T_ || dy.w() != L) {
        throw ShapeError("c-LSTM backward: gradient shape " + dy.shape_string());
    }
    const ConvSpec hs = s.hidden_conv();
    const ConstMatMap<T> whm(p.wh.data(), G, hs.patch());
    MatMap<T> dwhm(g.wh.data(), G, hs.patch());
    AlignedVector<T> cols(hs.patch() * L);
    RowMatrix<T> dpre(G, L);
    RowMatrix<T> dcols(hs.patch(), L);
    AlignedVector<T> dh(H * L), dh_next(H * L), dc(H * L), dc_next(H * L);
    Tensor4<T> dxg(N, G, T_, L);
    if (dh0) *dh0 = Tensor4<T>(N, H, 1, L);
    if (dc0) *dc0 = Tensor4<T>(N, H, 1, L);

    for (std::size_t n = 0; n < N; ++n) {
        std::fill(dh_next.begin(), dh_next.end(), T(0));
        if (dc_last)
            std::copy_n(dc_last->sample(n), H * L, dc_next.begin());
        else
            std::fill(dc_next.begin(), dc_next.end(), T(0));

        for (std::size_t t = T_; t-- > 0;) {
            const T* gates = &cache.gates(n, t, 0, 0);
            const T* gi = gates;
            const T* gf = gates + H * L;
            const T* go = gates + 2 * H * L;
            const T* gg = gates + 3 * H * L;
            const T* cell = &cache.cell(n, t, 0, 0);
            const T* c_prev = t > 0 ? &cache.cell(n, t - 1, 0, 0) : cache.c0.sample(n);
            const T* h_prev = t > 0 ? &cache.hidden(n, t - 1, 0, 0) : cache.h0.sample(n);
            T* dp = dpre.data();
            for (std::size_t k = 0; k < H * L; ++k) {
                const std::size_t h = k / L, l = k % L;
                const T dhk = dy(n, h, t, l) + dh_next[k];
                const T tc = std::tanh(cell[k]);
                const T d_o = dhk * tc;
                const T dck = dc_next[k] + dhk * go[k] * (T(1) - tc * tc);
                const T d_i = dck * gg[k];
                const T d_f = dck * c_prev[k];
                const T d_g = dck * gi[k];
                dc_next[k] = dck * gf[k];
                dp[k] = d_i * gi[k] * (T(1) - gi[k]);
                dp[H * L + k] = d_f * gf[k] * (T(1) - gf[k]);
                dp[2 * H * L + k] = d_o * go[k] * (T(1) - go[k]);
                dp[3 * H * L + k] = d_g * (T(1) - gg[k] * gg[k]);
            }
            for (std::size_t gch = 0; gch < G; ++gch)
                for (std::size_t l = 0; l < L; ++l) dxg(n, gch, t, l) = dpre(gch, l);

            im2col(h_prev, 1, L, hs, cols.data());
            dwhm.noalias() += dpre * ConstMatMap<T>(cols.data(), hs.patch(), L).transpose();
            dcols.noalias() = whm.transpose() * dpre;
            std::fill(dh_next.begin(), dh_next.end(), T(0));
            col2im(dcols.data(), 1, L, hs, dh_next.data());
        }
        if (dh0) std::copy(dh_next.begin(), dh_next.end(), dh0->sample(n));
        if (dc0) std::copy(dc_next.begin(), dc_next.end(), dc0->sample(n));
    }
    return conv2d_backward(x, dxg, s.input_conv(), p.wx, g.wx, g.bias);
}

template <class T>
Tensor4<T> to_scan_frame(const Tensor4<T>& t, ScanDirection d) {
    switch (d) {
        case ScanDirection::top_down: return t;
        case ScanDirection::bottom_up: return flip_h(t);
        case ScanDirection::left_right: return transpose_hw(t);
        case ScanDirection::right_left: return flip_h(transpose_hw(t));
    }
    return t;
}

template <class T>
Tensor4<T> from_scan_frame(const Tensor4<T>& t, ScanDirection d) {
    switch (d) {
        case ScanDirection::top_down: return t;
        case ScanDirection::bottom_up: return flip_h(t);
        case ScanDirection::left_right: return transpose_hw(t);
        case ScanDirection::right_left: return transpose_hw(flip_h(t));
    }
    return t;
}

/// Top-down/bottom-up treat rows (the angular axis) as the sequence;
/// left-right/right-left treat columns (the spatial axis) as the sequence.
/// Output has `hidden` channels and the input's spatial shape.
template <class T>
Tensor4<T> directional_scan_forward(const Tensor4<T>& x, ScanDirection d, const ConvLstmSpec& s,
                                    const ConvLstmParams<T>& p, ConvLstmCache<T>& cache) {
    const Tensor4<T> y = conv_lstm_scan_forward<T>(to_scan_frame(x, d), s, p, nullptr, nullptr, cache);
    return from_scan_frame(y, d);
}

template <class T>
Tensor4<T> directional_scan_backward(const ConvLstmCache<T>& cache, const Tensor4<T>& dy, ScanDirection d,
                                     const ConvLstmSpec& s, const ConvLstmParams<T>& p, const ConvLstmGrads<T>& g) {
    const Tensor4<T> dx = conv_lstm_scan_backward<T>(cache, to_scan_frame(dy, d), s, p, g);
    return from_scan_frame(dx, d);
}

/// One recurrence step on a single slice: x_t is (N, C, 1, L), states (N, H, 1, L).
template <class T>
struct LstmStepResult {
    Tensor4<T> h;
    Tensor4<T> c;
};

template <class T>
LstmStepResult<T> conv_lstm_step(const Tensor4<T>& x_t, const Tensor4<T>& h_prev, const Tensor4<T>& c_prev,
                                 const ConvLstmSpec& s, const ConvLstmParams<T>& p, ConvLstmCache<T>& cache) {
    if (x_t.h() != 1) throw ShapeError("c-LSTM step expects a single slice");
    LstmStepResult<T> r;
    r.h = conv_lstm_scan_forward(x_t, s, p, &h_prev, &c_prev, cache, &r.c);
    return r;
}

}  // namespace lumiforge::nn
