#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "lumiforge/nn/conv.hpp"
#include "lumiforge/nn/lstm.hpp"
#include "lumiforge/nn/network.hpp"
#include "lumiforge/nn/params.hpp"
#include "lumiforge/nn/upsample.hpp"

using namespace lumiforge;
using namespace lumiforge::nn;

namespace {

using Td = Tensor4<double>;

Td random_tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::mt19937_64& rng, double s = 1.0) {
    Td t(n, c, h, w);
    for (double& v : t.data()) v = draw_uniform(rng, -s, s);
    return t;
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double s = 0.5) {
    std::vector<double> v(n);
    for (double& e : v) e = draw_uniform(rng, -s, s);
    return v;
}

double dot(const Td& a, const Td& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

// Central differences of f with respect to every entry of `w`, compared to `analytic`.
void expect_gradient(std::vector<double>& w, const std::vector<double>& analytic, const std::function<double()>& f,
                     const char* what, double tol = 1e-5) {
    ASSERT_EQ(w.size(), analytic.size());
    const double eps = 1e-6;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double keep = w[i];
        w[i] = keep + eps;
        const double fp = f();
        w[i] = keep - eps;
        const double fm = f();
        w[i] = keep;
        const double num = (fp - fm) / (2 * eps);
        const double scale = std::max({std::abs(num), std::abs(analytic[i]), 1e-4});
        EXPECT_LT(std::abs(num - analytic[i]) / scale, tol) << what << " entry " << i << " numeric " << num
                                                             << " analytic " << analytic[i];
    }
}

std::vector<double> as_vec(const Td& t) { return {t.data().begin(), t.data().end()}; }

void load(Td& t, const std::vector<double>& v) { std::copy(v.begin(), v.end(), t.data().begin()); }

// Direct-loop convolution used as the reference for the im2col path.
Td naive_conv(const Td& x, const ConvSpec& s, const std::vector<double>& w, const std::vector<double>& b) {
    const std::size_t ho = (x.h() + 2 * s.pad_h - s.kh) / s.stride + 1;
    const std::size_t wo = (x.w() + 2 * s.pad_w - s.kw) / s.stride + 1;
    Td y(x.n(), s.out_ch, ho, wo);
    for (std::size_t n = 0; n < x.n(); ++n)
        for (std::size_t o = 0; o < s.out_ch; ++o)
            for (std::size_t oy = 0; oy < ho; ++oy)
                for (std::size_t ox = 0; ox < wo; ++ox) {
                    double acc = b[o];
                    for (std::size_t c = 0; c < s.in_ch; ++c)
                        for (std::size_t i = 0; i < s.kh; ++i)
                            for (std::size_t j = 0; j < s.kw; ++j) {
                                const long iy = long(oy * s.stride + i) - long(s.pad_h);
                                const long ix = long(ox * s.stride + j) - long(s.pad_w);
                                if (iy < 0 || ix < 0 || iy >= long(x.h()) || ix >= long(x.w())) continue;
                                acc += w[((o * s.in_ch + c) * s.kh + i) * s.kw + j] * x(n, c, iy, ix);
                            }
                    y(n, o, oy, ox) = acc;
                }
    return y;
}

// Reference c-LSTM written directly in the input frame for each direction.
Td naive_lstm(const Td& x, ScanDirection d, const ConvLstmSpec& s, const std::vector<double>& wx,
              const std::vector<double>& wh, const std::vector<double>& b) {
    const bool rows = d == ScanDirection::top_down || d == ScanDirection::bottom_up;
    const bool reverse = d == ScanDirection::bottom_up || d == ScanDirection::right_left;
    const std::size_t steps = rows ? x.h() : x.w(), len = rows ? x.w() : x.h(), H = s.hidden, C = s.in_ch;
    const long k = long(s.kernel), half = k / 2;
    auto X = [&](std::size_t n, std::size_t c, std::size_t t, long l) -> double {
        if (l < 0 || l >= long(len)) return 0.0;
        return rows ? x(n, c, t, std::size_t(l)) : x(n, c, std::size_t(l), t);
    };
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    Td y(x.n(), H, x.h(), x.w());
    for (std::size_t n = 0; n < x.n(); ++n) {
        std::vector<double> h(H * len, 0.0), c(H * len, 0.0);
        for (std::size_t step = 0; step < steps; ++step) {
            const std::size_t t = reverse ? steps - 1 - step : step;
            std::vector<double> pre(4 * H * len);
            for (std::size_t g = 0; g < 4 * H; ++g)
                for (std::size_t l = 0; l < len; ++l) {
                    double acc = b[g];
                    for (long j = 0; j < k; ++j) {
                        const long ll = long(l) + j - half;
                        for (std::size_t ci = 0; ci < C; ++ci) acc += wx[(g * C + ci) * k + j] * X(n, ci, t, ll);
                        if (ll < 0 || ll >= long(len)) continue;
                        for (std::size_t hi = 0; hi < H; ++hi) acc += wh[(g * H + hi) * k + j] * h[hi * len + ll];
                    }
                    pre[g * len + l] = acc;
                }
            for (std::size_t hi = 0; hi < H; ++hi)
                for (std::size_t l = 0; l < len; ++l) {
                    const double ig = sig(pre[(0 * H + hi) * len + l]);
                    const double fg = sig(pre[(1 * H + hi) * len + l]);
                    const double og = sig(pre[(2 * H + hi) * len + l]);
                    const double gg = std::tanh(pre[(3 * H + hi) * len + l]);
                    c[hi * len + l] = fg * c[hi * len + l] + ig * gg;
                    h[hi * len + l] = og * std::tanh(c[hi * len + l]);
                    if (rows)
                        y(n, hi, t, l) = h[hi * len + l];
                    else
                        y(n, hi, l, t) = h[hi * len + l];
                }
        }
    }
    return y;
}

}  // namespace

TEST(Conv, ForwardMatchesDirectLoops) {
    auto rng = item_rng(1, 0);
    for (const ConvSpec s : {ConvSpec::same(3, 4, 3, 5), ConvSpec::down(2, 3), ConvSpec::same(2, 2, 1, 3)}) {
        const Td x = random_tensor(2, s.in_ch, 6, 8, rng);
        const auto w = random_vec(s.weight_count(), rng);
        const auto b = random_vec(s.out_ch, rng);
        const Td y = conv2d_forward<double>(x, s, w, b);
        const Td ref = naive_conv(x, s, w, b);
        ASSERT_TRUE(y.same_shape(ref));
        for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.data()[i], ref.data()[i], 1e-12);
    }
}

TEST(Conv, GradientsMatchFiniteDifferences) {
    auto rng = item_rng(2, 0);
    const ConvSpec s = ConvSpec::same(2, 3, 3, 5);
    Td x = random_tensor(2, 2, 4, 6, rng);
    auto w = random_vec(s.weight_count(), rng);
    auto b = random_vec(s.out_ch, rng);
    const Td r = random_tensor(2, 3, 4, 6, rng);
    auto loss = [&] { return dot(conv2d_forward<double>(x, s, w, b), r); };
    std::vector<double> dw(w.size()), db(b.size());
    const Td dx = conv2d_backward<double>(x, r, s, w, dw, db);
    expect_gradient(w, dw, loss, "weight");
    expect_gradient(b, db, loss, "bias");
    auto xv = as_vec(x);
    expect_gradient(xv, as_vec(dx), [&] { load(x, xv); return loss(); }, "input");
}

TEST(Conv, TransposedIsAdjointOfStridedConv) {
    auto rng = item_rng(3, 0);
    const ConvSpec s = ConvSpec::down(3, 2);  // (3, 8, 6) -> (2, 4, 3)
    const auto w = random_vec(s.weight_count(), rng);
    const std::vector<double> zb3(3, 0.0), zb2(2, 0.0);
    const Td a = random_tensor(1, 3, 8, 6, rng);
    const Td z = random_tensor(1, 2, 4, 3, rng);
    // <conv(a), z> == <a, conv^T(z)>
    const double lhs = dot(conv2d_forward<double>(a, s, w, zb2), z);
    const double rhs = dot(a, conv_transpose_forward<double>(z, s, w, zb3));
    EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Conv, TransposedGradients) {
    auto rng = item_rng(4, 0);
    const ConvSpec s = ConvSpec::down(2, 3);
    Td x = random_tensor(2, 3, 3, 4, rng);
    auto w = random_vec(s.weight_count(), rng);
    auto b = random_vec(s.in_ch, rng);
    const Td r = random_tensor(2, 2, 6, 8, rng);
    auto loss = [&] { return dot(conv_transpose_forward<double>(x, s, w, b), r); };
    std::vector<double> dw(w.size()), db(b.size());
    const Td dx = conv_transpose_backward<double>(x, r, s, w, dw, db);
    expect_gradient(w, dw, loss, "weight");
    expect_gradient(b, db, loss, "bias");
    auto xv = as_vec(x);
    expect_gradient(xv, as_vec(dx), [&] { load(x, xv); return loss(); }, "input");
}

TEST(Conv, ReluBackwardMasksNonPositiveOutputs) {
    Td y(1, 1, 1, 4);
    y.data()[0] = 2.0;
    y.data()[1] = 0.0;
    y.data()[2] = 0.5;
    Td dy(1, 1, 1, 4, 1.0);
    relu_backward_inplace(dy, y);
    EXPECT_EQ(as_vec(dy), (std::vector<double>{1, 0, 1, 0}));
}

class LstmDirection : public ::testing::TestWithParam<ScanDirection> {};

TEST_P(LstmDirection, MatchesDirectRecurrence) {
    auto rng = item_rng(5, std::uint64_t(GetParam()));
    const ConvLstmSpec s{2, 3, 3};
    const Td x = random_tensor(2, 2, 5, 4, rng);
    const auto wx = random_vec(4 * 3 * 2 * 3, rng);
    const auto wh = random_vec(4 * 3 * 3 * 3, rng);
    const auto b = random_vec(12, rng);
    ConvLstmCache<double> cache;
    const Td y = directional_scan_forward<double>(x, GetParam(), s, {wx, wh, b}, cache);
    const Td ref = naive_lstm(x, GetParam(), s, wx, wh, b);
    ASSERT_TRUE(y.same_shape(ref)) << y.shape_string() << " vs " << ref.shape_string();
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.data()[i], ref.data()[i], 1e-12);
}

TEST_P(LstmDirection, GradientsMatchFiniteDifferences) {
    auto rng = item_rng(6, std::uint64_t(GetParam()));
    const ConvLstmSpec s{2, 2, 3};
    Td x = random_tensor(1, 2, 4, 3, rng);
    auto wx = random_vec(4 * 2 * 2 * 3, rng);
    auto wh = random_vec(4 * 2 * 2 * 3, rng);
    auto b = random_vec(8, rng);
    const Td r = random_tensor(1, 2, 4, 3, rng);
    auto loss = [&] {
        ConvLstmCache<double> c;
        return dot(directional_scan_forward<double>(x, GetParam(), s, {wx, wh, b}, c), r);
    };
    ConvLstmCache<double> cache;
    directional_scan_forward<double>(x, GetParam(), s, {wx, wh, b}, cache);
    std::vector<double> dwx(wx.size()), dwh(wh.size()), db(b.size());
    const Td dx = directional_scan_backward<double>(cache, r, GetParam(), s, {wx, wh, b}, {dwx, dwh, db});
    expect_gradient(wx, dwx, loss, "wx");
    expect_gradient(wh, dwh, loss, "wh");
    expect_gradient(b, db, loss, "bias");
    auto xv = as_vec(x);
    expect_gradient(xv, as_vec(dx), [&] { load(x, xv); return loss(); }, "input");
}

INSTANTIATE_TEST_SUITE_P(AllDirections, LstmDirection,
                         ::testing::Values(ScanDirection::top_down, ScanDirection::bottom_up,
                                           ScanDirection::left_right, ScanDirection::right_left));

TEST(Lstm, StepwiseEqualsFullScan) {
    auto rng = item_rng(7, 0);
    const ConvLstmSpec s{3, 2, 3};
    const Td x = random_tensor(1, 3, 4, 5, rng);
    const auto wx = random_vec(4 * 2 * 3 * 3, rng);
    const auto wh = random_vec(4 * 2 * 2 * 3, rng);
    const auto b = random_vec(8, rng);
    const ConvLstmParams<double> p{wx, wh, b};
    ConvLstmCache<double> cache;
    const Td y = conv_lstm_scan_forward<double>(x, s, p, nullptr, nullptr, cache);
    Td h(1, 2, 1, 5), c(1, 2, 1, 5);
    for (std::size_t t = 0; t < 4; ++t) {
        Td xt(1, 3, 1, 5);
        for (std::size_t ch = 0; ch < 3; ++ch)
            for (std::size_t l = 0; l < 5; ++l) xt(0, ch, 0, l) = x(0, ch, t, l);
        ConvLstmCache<double> sc;
        auto r = conv_lstm_step<double>(xt, h, c, s, p, sc);
        h = r.h;
        c = r.c;
        for (std::size_t ch = 0; ch < 2; ++ch)
            for (std::size_t l = 0; l < 5; ++l) EXPECT_NEAR(h(0, ch, 0, l), y(0, ch, t, l), 1e-14);
    }
}

TEST(Lstm, CellStateStaysBoundedForBoundedInputs) {
    // |c_t| <= |c_{t-1}| + 1, so after T steps |c| <= T and |h| < 1.
    auto rng = item_rng(8, 0);
    const ConvLstmSpec s{1, 2, 3};
    const Td x = random_tensor(1, 1, 30, 4, rng, 50.0);
    const auto wx = random_vec(24, rng, 3.0);
    const auto wh = random_vec(48, rng, 3.0);
    const auto b = random_vec(8, rng, 3.0);
    ConvLstmCache<double> cache;
    const Td y = conv_lstm_scan_forward<double>(x, s, {wx, wh, b}, nullptr, nullptr, cache);
    for (double v : y.data()) EXPECT_LT(std::abs(v), 1.0);
    for (std::size_t t = 0; t < 30; ++t)
        for (std::size_t k = 0; k < 2 * 4; ++k) EXPECT_LE(std::abs((&cache.cell(0, t, 0, 0))[k]), double(t + 1));
}

// ---------------------------------------------------------------------------

namespace {

NetworkSpec tiny_spec(bool lstm) {
    NetworkSpec s;
    s.levels = 2;
    s.pre_layers = 2;
    s.pre_channels_per_level = 2;
    s.lstm_hidden = 2;
    s.use_lstm = lstm;
    s.post_channels = {3, 2};
    s.post_kernel = 3;
    return s;
}

void randomize(Network<double>& net, std::uint64_t seed) {
    auto rng = item_rng(seed, 0);
    for (double& v : net.params().values()) v = draw_uniform(rng, -0.4, 0.4);
}

}  // namespace

class NetworkGrad : public ::testing::TestWithParam<bool> {};

TEST_P(NetworkGrad, FullNetworkGradientsMatchFiniteDifferences) {
    Network<double> net(tiny_spec(GetParam()));
    randomize(net, 9);
    auto rng = item_rng(10, 0);
    Td x = random_tensor(1, 3, 4, 8, rng);
    for (double& v : x.data()) v = std::abs(v);
    const Td r = random_tensor(1, 3, 4, 8, rng);
    typename Network<double>::Cache cache;
    net.forward(x, cache);
    auto g = net.params().make_grad_buffer();
    const Td dx = net.backward(cache, r, g);
    auto vals = net.params().values();
    std::vector<double> w(vals.begin(), vals.end());
    auto loss = [&] {
        std::copy(w.begin(), w.end(), net.params().values().begin());
        typename Network<double>::Cache c;
        return dot(net.forward(x, c), r);
    };
    expect_gradient(w, std::vector<double>(g.data.begin(), g.data.end()), loss, "network parameter", 1e-4);
    auto xv = as_vec(x);
    expect_gradient(xv, as_vec(dx), [&] { load(x, xv); return loss(); }, "network input", 1e-4);
}

INSTANTIATE_TEST_SUITE_P(WithAndWithoutLstm, NetworkGrad, ::testing::Values(true, false));

TEST(Network, ParameterCountMatchesClosedForm) {
    const NetworkSpec s;  // full-size configuration
    std::size_t expected = 0;
    auto conv = [](std::size_t ci, std::size_t co, std::size_t kh, std::size_t kw) { return co * ci * kh * kw + co; };
    for (std::size_t l = 1; l <= 4; ++l) {
        const std::size_t c = 25 * l, cin = l == 1 ? 3 : 25 * (l - 1);
        expected += conv(cin, c, 3, 5) + 3 * conv(c, c, 3, 5);
        if (l < 4) expected += conv(c, c, 3, 3) + conv(32, 32, 3, 3);  // down + up
        const std::size_t lin = c + (l < 4 ? 32 : 0);
        expected += 4 * (4 * 100 * lin * 3 + 4 * 100 * 100 * 3 + 400);
        expected += conv(400, 64, 5, 5) + conv(64, 32, 5, 5) + conv(32, 32, 5, 5);
    }
    expected += conv(32, 3, 3, 3);
    Network<float> net(s);
    EXPECT_EQ(net.params().count(), expected);
}

TEST(Network, ZeroOutputLayerGivesZeroResidual) {
    Network<float> net(tiny_spec(true));
    net.initialize(3);
    Epi lr(3, 5);
    auto rng = item_rng(11, 0);
    for (std::size_t u = 0; u < 3; ++u)
        for (std::size_t x = 0; x < 5; ++x)
            for (std::size_t c = 0; c < 3; ++c) lr(u, x, c) = float(draw_uniform(rng, 0, 1));
    EXPECT_EQ(network_forward(net, lr), bicubic_upsample(lr));
}

TEST(Network, RejectsBadExtents) {
    Network<double> net(tiny_spec(true));
    typename Network<double>::Cache c;
    EXPECT_THROW(net.forward(Td(1, 3, 4, 6 + 1), c), ShapeError);
    EXPECT_THROW(net.forward(Td(1, 3, 2, 8), c), ShapeError);
    EXPECT_THROW(net.forward(Td(1, 2, 4, 8), c), ShapeError);
    EXPECT_EQ(net.padded_extent(3), 4u);
    EXPECT_EQ(net.padded_extent(9), 10u);
}

TEST(Network, SpecRoundTripsThroughJson) {
    NetworkSpec s = tiny_spec(false);
    s.post_channels = {5, 6, 7};
    const nlohmann::json j = s;
    EXPECT_EQ(j.get<NetworkSpec>(), s);
}

TEST(Network, InitializationIsSeedDeterministic) {
    Network<float> a(tiny_spec(true)), b(tiny_spec(true)), c(tiny_spec(true));
    a.initialize(5);
    b.initialize(5);
    c.initialize(6);
    EXPECT_TRUE(std::equal(a.params().values().begin(), a.params().values().end(), b.params().values().begin()));
    EXPECT_FALSE(std::equal(a.params().values().begin(), a.params().values().end(), c.params().values().begin()));
}

TEST(Init, OrthogonalRowsAreOrthonormal) {
    auto rng = item_rng(12, 0);
    std::vector<double> w(4 * 9);
    orthogonal<double>(w, 4, 9, rng);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < 9; ++k) s += w[i * 9 + k] * w[j * 9 + k];
            EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-12);
        }
}

TEST(Adam, FirstStepMovesEachWeightByLearningRate) {
    // With bias correction the first update is lr * g / (|g| + eps).
    ParamStore<double> p;
    p.add("w", {3});
    auto g = p.grads();
    g[0] = 0.5;
    g[1] = -2.0;
    g[2] = 0.0;
    adam_step(p, AdamConfig{0.01});
    EXPECT_NEAR(p.values()[0], -0.01, 1e-9);
    EXPECT_NEAR(p.values()[1], 0.01, 1e-9);
    EXPECT_EQ(p.values()[2], 0.0);
}

TEST(Adam, ZeroLearningRateLeavesWeightsUnchanged) {
    ParamStore<float> p;
    p.add("w", {2});
    p.values()[0] = 0.25f;
    p.grads()[0] = 3.0f;
    adam_step(p, AdamConfig{0.0});
    EXPECT_EQ(p.values()[0], 0.25f);
    EXPECT_EQ(p.adam_step(), 1u);
}

// ---------------------------------------------------------------------------

namespace {

// 1D Catmull-Rom at position p over clamped samples.
double cr(const std::vector<double>& f, double p) {
    auto at = [&](long i) { return f[std::size_t(std::clamp<long>(i, 0, long(f.size()) - 1))]; };
    const long i = long(std::floor(p));
    const double t = p - double(i);
    const double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
    return 0.5 * (2 * p1 + (-p0 + p2) * t + (2 * p0 - 5 * p1 + 4 * p2 - p3) * t * t + (-p0 + 3 * p1 - 3 * p2 + p3) * t * t * t);
}

}  // namespace

TEST(Upsample, MatchesTensorProductCatmullRom) {
    auto rng = item_rng(13, 0);
    Epi lr(4, 6);
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t x = 0; x < 6; ++x)
            for (std::size_t c = 0; c < 3; ++c) lr(u, x, c) = float(draw_uniform(rng, 0, 1));
    const Epi hr = bicubic_upsample(lr);
    ASSERT_EQ(hr.views(), 7u);
    ASSERT_EQ(hr.pixels(), 12u);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t r = 0; r < 7; ++r)
            for (std::size_t col = 0; col < 12; ++col) {
                std::vector<double> rows(4);
                for (std::size_t u = 0; u < 4; ++u) {
                    std::vector<double> line(6);
                    for (std::size_t x = 0; x < 6; ++x) line[x] = lr(u, x, c);
                    rows[u] = cr(line, col / 2.0);
                }
                EXPECT_NEAR(hr(r, col, c), cr(rows, r / 2.0), 1e-6);
            }
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t x = 0; x < 6; ++x)
            for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(hr(2 * u, 2 * x, c), lr(u, x, c));
}

TEST(Upsample, LinearRampIsReproducedInTheInterior) {
    Epi lr(4, 8);
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t x = 0; x < 8; ++x)
            for (std::size_t c = 0; c < 3; ++c) lr(u, x, c) = float(0.05 * x + 0.1 * u);
    const Epi hr = bicubic_upsample(lr);
    for (std::size_t r = 2; r + 2 < hr.views(); ++r)
        for (std::size_t col = 2; col + 4 < hr.pixels(); ++col)
            EXPECT_NEAR(hr(r, col, 0), 0.05 * col / 2.0 + 0.1 * r / 2.0, 1e-6);
}

TEST(Upsample, RejectsDegenerateInput) { EXPECT_THROW(bicubic_upsample(Epi(1, 8)), DomainError); }

TEST(Padding, ReflectThenCropIsIdentity) {
    auto rng = item_rng(14, 0);
    const Td t = random_tensor(1, 3, 5, 7, rng);
    const Td p = pad_reflect(t, 8, 8);
    EXPECT_EQ(crop(p, 5, 7), t);
    EXPECT_EQ(p(0, 1, 5, 2), t(0, 1, 3, 2));  // reflect without edge repeat
    EXPECT_EQ(p(0, 1, 2, 7), t(0, 1, 2, 5));
}
