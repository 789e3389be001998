#pragma once

// Multi-level CNN-LSTM for EPI super-resolution.
//
// The LR EPI is first upsampled 2x (bicubic); the network then predicts a
// residual at that resolution. Level i (1-based) runs at 1/2^(i-1) scale:
//
//   encoder:  pre-block (4 conv 3x5, 25 i channels, ReLU) -> down conv 3x3/2
//   decoder:  [pre-block output | up-conv of level i+1] -> four directional
//             c-LSTMs (concatenated) -> post-block (conv 5x5: 64, 32, 32)
//             -> up conv 3x3/2 into level i-1
//   output:   conv 3x3 on level 1's post-block, zero-initialised, no ReLU.
//
// With use_lstm = false each c-LSTM is replaced by a ReLU conv with the same
// 1x3 kernel orientation and output width (the no-LSTM ablation).

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lumiforge/epi.hpp"
#include "lumiforge/error.hpp"
#include "lumiforge/nn/conv.hpp"
#include "lumiforge/nn/lstm.hpp"
#include "lumiforge/nn/params.hpp"
#include "lumiforge/nn/tensor.hpp"
#include "lumiforge/nn/upsample.hpp"
#include "lumiforge/resample.hpp"

namespace lumiforge::nn {

struct NetworkSpec {
    std::size_t levels = 4;
    std::size_t in_channels = 3;
    std::size_t pre_layers = 4;
    std::size_t pre_kh = 3;
    std::size_t pre_kw = 5;
    std::size_t pre_channels_per_level = 25;
    std::size_t lstm_hidden = 100;
    std::size_t lstm_kernel = 3;
    bool use_lstm = true;
    std::vector<std::size_t> post_channels{64, 32, 32};
    std::size_t post_kernel = 5;
    std::size_t out_kernel = 3;

    std::size_t pre_channels(std::size_t level) const { return pre_channels_per_level * level; }
    std::size_t lstm_block_channels() const { return 4 * lstm_hidden; }
    std::size_t post_out_channels() const { return post_channels.back(); }
    /// Smallest (post-upsample) extent the network accepts along either axis.
    std::size_t min_extent() const { return std::size_t{1} << levels; }
    /// Extents must be multiples of this for the stride-2 levels to line up.
    std::size_t extent_multiple() const { return std::size_t{1} << (levels - 1); }

    void validate() const {
        if (levels < 1 || levels > 8) throw DomainError("network levels must be in [1, 8]");
        if (pre_layers < 1 || post_channels.empty()) throw DomainError("network blocks must be non-empty");
        if (pre_kh % 2 == 0 || pre_kw % 2 == 0 || post_kernel % 2 == 0 || out_kernel % 2 == 0 ||
            lstm_kernel % 2 == 0) {
            throw DomainError("network kernels must be odd");
        }
        if (pre_channels_per_level == 0 || lstm_hidden == 0 || in_channels == 0) {
            throw DomainError("network widths must be positive");
        }
    }

    bool operator==(const NetworkSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const NetworkSpec& s) {
    j = nlohmann::json{{"levels", s.levels},
                       {"in_channels", s.in_channels},
                       {"pre_layers", s.pre_layers},
                       {"pre_kernel", {s.pre_kh, s.pre_kw}},
                       {"pre_channels_per_level", s.pre_channels_per_level},
                       {"lstm_hidden", s.lstm_hidden},
                       {"lstm_kernel", s.lstm_kernel},
                       {"use_lstm", s.use_lstm},
                       {"post_channels", s.post_channels},
                       {"post_kernel", s.post_kernel},
                       {"out_kernel", s.out_kernel}};
}

inline void from_json(const nlohmann::json& j, NetworkSpec& s) {
    s.levels = j.at("levels").get<std::size_t>();
    s.in_channels = j.at("in_channels").get<std::size_t>();
    s.pre_layers = j.at("pre_layers").get<std::size_t>();
    s.pre_kh = j.at("pre_kernel").at(0).get<std::size_t>();
    s.pre_kw = j.at("pre_kernel").at(1).get<std::size_t>();
    s.pre_channels_per_level = j.at("pre_channels_per_level").get<std::size_t>();
    s.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
    s.lstm_kernel = j.at("lstm_kernel").get<std::size_t>();
    s.use_lstm = j.at("use_lstm").get<bool>();
    s.post_channels = j.at("post_channels").get<std::vector<std::size_t>>();
    s.post_kernel = j.at("post_kernel").get<std::size_t>();
    s.out_kernel = j.at("out_kernel").get<std::size_t>();
}

template <class T>
class Network {
public:
    struct ConvLayer {
        ConvSpec spec;
        std::size_t weight = 0;
        std::size_t bias = 0;
        bool relu = true;
        bool transposed = false;
    };

    struct ScanUnit {
        ScanDirection direction = ScanDirection::top_down;
        ConvLstmSpec lstm;
        std::size_t wx = 0, wh = 0, bias = 0;  // when use_lstm
        ConvLayer replacement;                   // when !use_lstm
    };

    struct Level {
        std::vector<ConvLayer> pre;
        ConvLayer down;  // level i -> i+1 (absent on the last level)
        std::array<ScanUnit, 4> scans;
        std::vector<ConvLayer> post;
        ConvLayer up;  // level i+1 -> i, stored on level i (absent on the last level)
    };

    struct ConvCache {
        Tensor4<T> in, out;
    };

    struct LevelCache {
        std::vector<ConvCache> pre;
        ConvCache down;
        Tensor4<T> lstm_in;
        std::array<ConvLstmCache<T>, 4> lstm;
        std::array<ConvCache, 4> replacement;
        std::vector<ConvCache> post;
        ConvCache up;
    };

    struct Cache {
        std::vector<LevelCache> levels;
        ConvCache out;
    };

    explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        build();
    }

    const NetworkSpec& spec() const { return spec_; }
    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }
    const std::vector<Level>& levels() const { return levels_; }
    const ConvLayer& output_layer() const { return out_; }

    /// He-uniform convs, orthogonal c-LSTM kernels per gate, forget bias 1,
    /// zero output layer.
    void initialize(std::uint64_t seed) {
        std::size_t stream = 0;
        auto init_conv = [&](const ConvLayer& c) {
            auto rng = item_rng(seed, stream++, 0x1417);
            he_uniform(params_.value(c.weight), c.spec.patch(), rng);
            auto b = params_.value(c.bias);
            std::fill(b.begin(), b.end(), T(0));
        };
        for (const auto& lv : levels_) {
            for (const auto& c : lv.pre) init_conv(c);
            if (&lv != &levels_.back()) init_conv(lv.down);
            for (const auto& s : lv.scans) {
                if (!spec_.use_lstm) {
                    init_conv(s.replacement);
                    continue;
                }
                const std::size_t H = s.lstm.hidden;
                for (std::size_t id : {s.wx, s.wh}) {
                    auto w = params_.value(id);
                    const std::size_t per_gate = w.size() / 4;
                    for (std::size_t g = 0; g < 4; ++g) {
                        auto rng = item_rng(seed, stream++, 0x1417);
                        orthogonal(w.subspan(g * per_gate, per_gate), H, per_gate / H, rng);
                    }
                }
                auto b = params_.value(s.bias);
                std::fill(b.begin(), b.end(), T(0));
                std::fill(b.begin() + std::ptrdiff_t(H), b.begin() + std::ptrdiff_t(2 * H), T(1));
            }
            for (const auto& c : lv.post) init_conv(c);
            if (&lv != &levels_.back()) init_conv(lv.up);
        }
        auto w = params_.value(out_.weight);
        std::fill(w.begin(), w.end(), T(0));
        auto b = params_.value(out_.bias);
        std::fill(b.begin(), b.end(), T(0));
    }

    /// Residual prediction for a (N, in_channels, H, W) input whose extents
    /// satisfy the level constraints (see padded_extent).
    Tensor4<T> forward(const Tensor4<T>& x, Cache& cache) const {
        check_input(x);
        const std::size_t L = levels_.size();
        cache.levels.assign(L, {});
        std::vector<Tensor4<T>> enc(L);
        Tensor4<T> h = x;
        for (std::size_t i = 0; i < L; ++i) {
            auto& lc = cache.levels[i];
            lc.pre.resize(levels_[i].pre.size());
            for (std::size_t k = 0; k < levels_[i].pre.size(); ++k) h = conv(levels_[i].pre[k], h, lc.pre[k]);
            enc[i] = h;
            if (i + 1 < L) h = conv(levels_[i].down, enc[i], lc.down);
        }
        Tensor4<T> post;
        for (std::size_t i = L; i-- > 0;) {
            auto& lc = cache.levels[i];
            const Level& lv = levels_[i];
            lc.lstm_in = (i + 1 == L) ? enc[i] : concat_channels(enc[i], cache.levels[i].up.out);
            Tensor4<T> merged(lc.lstm_in.n(), 4 * spec_.lstm_hidden, lc.lstm_in.h(), lc.lstm_in.w());
            for (std::size_t d = 0; d < 4; ++d) {
                set_channels(merged, d * spec_.lstm_hidden, scan_forward(lv.scans[d], lc.lstm_in, lc, d));
            }
            h = std::move(merged);
            lc.post.resize(lv.post.size());
            for (std::size_t k = 0; k < lv.post.size(); ++k) h = conv(lv.post[k], h, lc.post[k]);
            post = h;
            if (i > 0) conv(levels_[i - 1].up, post, cache.levels[i - 1].up);
        }
        return conv(out_, post, cache.out);
    }

    /// Accumulates parameter gradients into `grads`; returns dL/dx.
    Tensor4<T> backward(Cache& cache, const Tensor4<T>& d_residual, GradBuffer<T>& grads) const {
        const std::size_t L = levels_.size();
        std::vector<Tensor4<T>> d_enc(L);
        Tensor4<T> d_post = conv_back(out_, cache.out, d_residual, grads);
        for (std::size_t i = 0; i < L; ++i) {
            auto& lc = cache.levels[i];
            const Level& lv = levels_[i];
            Tensor4<T> d = d_post;
            for (std::size_t k = lv.post.size(); k-- > 0;) d = conv_back(lv.post[k], lc.post[k], d, grads);
            Tensor4<T> d_in(lc.lstm_in.n(), lc.lstm_in.c(), lc.lstm_in.h(), lc.lstm_in.w());
            for (std::size_t s = 0; s < 4; ++s) {
                const Tensor4<T> ds = slice_channels(d, s * spec_.lstm_hidden, spec_.lstm_hidden);
                add_inplace(d_in, scan_backward(lv.scans[s], lc, s, ds, grads));
            }
            if (i + 1 < L) {
                const std::size_t ce = spec_.pre_channels(i + 1);
                d_enc[i] = slice_channels(d_in, 0, ce);
                const Tensor4<T> d_up = slice_channels(d_in, ce, d_in.c() - ce);
                d_post = conv_back(lv.up, lc.up, d_up, grads);
            } else {
                d_enc[i] = std::move(d_in);
            }
        }
        Tensor4<T> d_level_in;
        for (std::size_t i = L; i-- > 0;) {
            auto& lc = cache.levels[i];
            Tensor4<T> d = d_enc[i];
            if (i + 1 < L) add_inplace(d, conv_back(levels_[i].down, lc.down, d_level_in, grads));
            for (std::size_t k = levels_[i].pre.size(); k-- > 0;) d = conv_back(levels_[i].pre[k], lc.pre[k], d, grads);
            d_level_in = std::move(d);
        }
        return d_level_in;
    }

    /// Smallest valid extent >= n.
    std::size_t padded_extent(std::size_t n) const {
        const std::size_t m = spec_.extent_multiple();
        return std::max(spec_.min_extent(), (n + m - 1) / m * m);
    }

private:
    void build() {
        auto add_conv = [&](const std::string& name, ConvSpec s, bool relu, bool transposed = false) {
            ConvLayer c{s, 0, 0, relu, transposed};
            c.weight = params_.add(name + ".w", {transposed ? s.out_ch : s.out_ch, s.in_ch, s.kh, s.kw});
            c.bias = params_.add(name + ".b", {transposed ? s.in_ch : s.out_ch});
            return c;
        };
        const std::size_t L = spec_.levels;
        levels_.resize(L);
        for (std::size_t i = 0; i < L; ++i) {
            const std::string p = "L" + std::to_string(i + 1);
            Level& lv = levels_[i];
            const std::size_t c = spec_.pre_channels(i + 1);
            const std::size_t c_in = i == 0 ? spec_.in_channels : spec_.pre_channels(i);
            for (std::size_t k = 0; k < spec_.pre_layers; ++k) {
                lv.pre.push_back(add_conv(p + ".pre" + std::to_string(k),
                                          ConvSpec::same(k == 0 ? c_in : c, c, spec_.pre_kh, spec_.pre_kw), true));
            }
            if (i + 1 < L) lv.down = add_conv(p + ".down", ConvSpec::down(c, c), true);
            const std::size_t lstm_in = c + (i + 1 < L ? spec_.post_out_channels() : 0);
            for (std::size_t d = 0; d < 4; ++d) {
                ScanUnit& su = lv.scans[d];
                su.direction = kScanDirections[d];
                su.lstm = {lstm_in, spec_.lstm_hidden, spec_.lstm_kernel};
                const std::string sp = p + ".scan." + to_string(su.direction);
                if (spec_.use_lstm) {
                    const auto xs = su.lstm.input_conv();
                    const auto hs = su.lstm.hidden_conv();
                    su.wx = params_.add(sp + ".wx", {xs.out_ch, xs.in_ch, xs.kh, xs.kw});
                    su.wh = params_.add(sp + ".wh", {hs.out_ch, hs.in_ch, hs.kh, hs.kw});
                    su.bias = params_.add(sp + ".b", {4 * spec_.lstm_hidden});
                } else {
                    const bool rows = su.direction == ScanDirection::top_down || su.direction == ScanDirection::bottom_up;
                    const ConvSpec cs = rows ? ConvSpec::same(lstm_in, spec_.lstm_hidden, 1, spec_.lstm_kernel)
                                             : ConvSpec::same(lstm_in, spec_.lstm_hidden, spec_.lstm_kernel, 1);
                    su.replacement = add_conv(sp + ".conv", cs, true);
                }
            }
            std::size_t pc = 4 * spec_.lstm_hidden;
            for (std::size_t k = 0; k < spec_.post_channels.size(); ++k) {
                lv.post.push_back(add_conv(p + ".post" + std::to_string(k),
                                           ConvSpec::same(pc, spec_.post_channels[k], spec_.post_kernel,
                                                          spec_.post_kernel),
                                           true));
                pc = spec_.post_channels[k];
            }
        }
        // Up layers are registered after all levels so that parameter order
        // follows the data flow of the decoder (deepest first).
        for (std::size_t i = L - 1; i-- > 0;) {
            const std::size_t ch = spec_.post_out_channels();
            ConvSpec s = ConvSpec::down(ch, ch);  // adjoint geometry: in_ch = up output, out_ch = up input
            levels_[i].up = add_conv("L" + std::to_string(i + 2) + ".up", s, true, true);
        }
        out_ = add_conv("out", ConvSpec::same(spec_.post_out_channels(), spec_.in_channels, spec_.out_kernel,
                                              spec_.out_kernel),
                        false);
    }

    void check_input(const Tensor4<T>& x) const {
        if (x.c() != spec_.in_channels) throw ShapeError("network input channels " + x.shape_string());
        const std::size_t m = spec_.extent_multiple();
        if (x.h() % m != 0 || x.w() % m != 0 || x.h() < spec_.min_extent() || x.w() < spec_.min_extent()) {
            throw ShapeError("network input " + x.shape_string() + " must be >= " +
                             std::to_string(spec_.min_extent()) + " and a multiple of " + std::to_string(m));
        }
    }

    Tensor4<T> conv(const ConvLayer& c, const Tensor4<T>& x, ConvCache& cc) const {
        cc.in = x;
        cc.out = c.transposed ? conv_transpose_forward(x, c.spec, params_.value(c.weight), params_.value(c.bias))
                              : conv2d_forward(x, c.spec, params_.value(c.weight), params_.value(c.bias));
        if (c.relu) relu_inplace(cc.out);
        return cc.out;
    }

    Tensor4<T> conv_back(const ConvLayer& c, const ConvCache& cc, const Tensor4<T>& dy, GradBuffer<T>& g) const {
        Tensor4<T> d = dy;
        if (c.relu) relu_backward_inplace(d, cc.out);
        const ParamInfo& wi = params_.info(c.weight);
        const ParamInfo& bi = params_.info(c.bias);
        return c.transposed
                   ? conv_transpose_backward(cc.in, d, c.spec, params_.value(c.weight), g.view(wi), g.view(bi))
                   : conv2d_backward(cc.in, d, c.spec, params_.value(c.weight), g.view(wi), g.view(bi));
    }

    Tensor4<T> scan_forward(const ScanUnit& su, const Tensor4<T>& x, LevelCache& lc, std::size_t d) const {
        if (!spec_.use_lstm) return conv(su.replacement, x, lc.replacement[d]);
        const ConvLstmParams<T> p{params_.value(su.wx), params_.value(su.wh), params_.value(su.bias)};
        return directional_scan_forward(x, su.direction, su.lstm, p, lc.lstm[d]);
    }

    Tensor4<T> scan_backward(const ScanUnit& su, LevelCache& lc, std::size_t d, const Tensor4<T>& dy,
                             GradBuffer<T>& g) const {
        if (!spec_.use_lstm) return conv_back(su.replacement, lc.replacement[d], dy, g);
        const ConvLstmParams<T> p{params_.value(su.wx), params_.value(su.wh), params_.value(su.bias)};
        const ConvLstmGrads<T> gr{g.view(params_.info(su.wx)), g.view(params_.info(su.wh)),
                                  g.view(params_.info(su.bias))};
        return directional_scan_backward(lc.lstm[d], dy, su.direction, su.lstm, p, gr);
    }

    NetworkSpec spec_;
    ParamStore<T> params_;
    std::vector<Level> levels_;
    ConvLayer out_;
};

// ---------------------------------------------------------------------------
// EPI <-> tensor plumbing.

template <class T>
Tensor4<T> epi_to_tensor(const Epi& e) {
    Tensor4<T> t(1, kChannels, e.views(), e.pixels());
    for (std::size_t c = 0; c < kChannels; ++c)
        for (std::size_t u = 0; u < e.views(); ++u)
            for (std::size_t x = 0; x < e.pixels(); ++x) t(0, c, u, x) = T(e(u, x, c));
    return t;
}

/// Reflect-pads at the bottom and right up to (h, w).
template <class T>
Tensor4<T> pad_reflect(const Tensor4<T>& t, std::size_t h, std::size_t w) {
    Tensor4<T> out(t.n(), t.c(), h, w);
    for (std::size_t n = 0; n < t.n(); ++n)
        for (std::size_t c = 0; c < t.c(); ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    out(n, c, y, x) = t(n, c, reflect_index(std::ptrdiff_t(y), t.h()), reflect_index(std::ptrdiff_t(x), t.w()));
    return out;
}

template <class T>
Tensor4<T> crop(const Tensor4<T>& t, std::size_t h, std::size_t w) {
    Tensor4<T> out(t.n(), t.c(), h, w);
    for (std::size_t n = 0; n < t.n(); ++n)
        for (std::size_t c = 0; c < t.c(); ++c)
            for (std::size_t y = 0; y < h; ++y) std::copy_n(&t(n, c, y, 0), w, &out(n, c, y, 0));
    return out;
}

/// Zero-extends a cropped gradient back to the padded extent.
template <class T>
Tensor4<T> uncrop(const Tensor4<T>& t, std::size_t h, std::size_t w) {
    Tensor4<T> out(t.n(), t.c(), h, w);
    for (std::size_t n = 0; n < t.n(); ++n)
        for (std::size_t c = 0; c < t.c(); ++c)
            for (std::size_t y = 0; y < t.h(); ++y) std::copy_n(&t(n, c, y, 0), t.w(), &out(n, c, y, 0));
    return out;
}

/// Network input for an LR EPI: bicubic upsample, then reflect padding.
template <class T>
struct PreparedInput {
    Epi upsampled;
    Tensor4<T> padded;
};

template <class T>
PreparedInput<T> prepare_input(const Network<T>& net, const Epi& lr) {
    PreparedInput<T> p{bicubic_upsample(lr), {}};
    const Tensor4<T> t = epi_to_tensor<T>(p.upsampled);
    p.padded = pad_reflect(t, net.padded_extent(t.h()), net.padded_extent(t.w()));
    return p;
}

/// HR estimate = bicubic(lr) + residual. `clamp_output` clips to [0,1]
/// (inference only; training uses the raw sum).
template <class T>
Epi network_forward(const Network<T>& net, const Epi& lr, bool clamp_output = true) {
    const PreparedInput<T> in = prepare_input(net, lr);
    typename Network<T>::Cache cache;
    const Tensor4<T> res = net.forward(in.padded, cache);
    Epi out = in.upsampled;
    for (std::size_t c = 0; c < kChannels; ++c)
        for (std::size_t u = 0; u < out.views(); ++u)
            for (std::size_t x = 0; x < out.pixels(); ++x) {
                const T v = T(in.upsampled(u, x, c)) + res(0, c, u, x);
                out(u, x, c) = float(clamp_output ? std::clamp(v, T(0), T(1)) : v);
            }
    return out;
}

}  // namespace lumiforge::nn
