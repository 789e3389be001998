#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <initializer_list>
#include <random>
#include <utility>
#include <set>
#include <vector>

#include "lumiforge/optics.hpp"
#include "lumiforge/scene.hpp"
#include "support/oracles.hpp"

using namespace lumiforge;
using namespace lumiforge::optics;

namespace {

CameraConfig camera(std::size_t n_micro = 100, std::size_t n_views = 9) {
    CameraConfig c;
    c.n_micro = n_micro;
    c.n_views = n_views;
    return c;
}

// Thin-lens ray trace: image the point, send rays through two sub-aperture
// centres one baseline apart, intersect with the MLA plane.
double traced_disparity(const CameraConfig& c, double depth) {
    const double x_point = 0.3;
    const double z_img = 1.0 / (1.0 / c.f_main - 1.0 / depth);
    const double x_img = -x_point * z_img / depth;
    auto hit = [&](double a) { return a + (x_img - a) * (c.f_mla / z_img); };
    return (hit(c.baseline()) - hit(0.0)) / c.micro_pitch;
}

long floor_div(long a, long b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); }

}  // namespace

TEST(Optics, GaussianConjugate) {
    CameraConfig c;
    c.f_main = 50;
    c.f_mla = 100;
    EXPECT_DOUBLE_EQ(gaussian_conjugate(c), 100.0);
    c.f_mla = 75;
    EXPECT_NEAR(gaussian_conjugate(c), 150.0, 1e-9);
    c.f_mla = 50;
    EXPECT_THROW(gaussian_conjugate(c), DomainError);
}

TEST(Optics, ConfigValidation) {
    CameraConfig c;
    EXPECT_NO_THROW(c.validate());
    c.f_mla = 40;
    EXPECT_THROW(c.validate(), DomainError);
    c = CameraConfig{};
    c.n_views = 1;
    EXPECT_THROW(c.validate(), DomainError);
    c = CameraConfig{};
    c.micro_pitch = 0;
    EXPECT_THROW(c.validate(), DomainError);
}

TEST(Optics, DisparityIsZeroAtTheConjugateDepth) {
    const CameraConfig c;
    EXPECT_NEAR(disparity_of_depth(c, gaussian_conjugate(c)), 0.0, 1e-12);
    EXPECT_THROW(disparity_of_depth(c, 0.0), DomainError);
    EXPECT_THROW(disparity_of_depth(c, -5.0), DomainError);
}

TEST(Optics, DisparityMatchesRayTrace) {
    const CameraConfig c;
    for (double z : {60.0, 120.0, 800.0, 1300.0, 5000.0, 1e6}) {
        EXPECT_NEAR(disparity_of_depth(c, z), traced_disparity(c, z), 1e-9 * std::max(1.0, std::abs(traced_disparity(c, z))))
            << "Z = " << z;
    }
}

TEST(Optics, DisparityDecreasesWithDepthAndSaturates) {
    const CameraConfig c;
    const double zf = gaussian_conjugate(c);
    double prev = disparity_of_depth(c, 55.0);
    for (double z = 60.0; z < 1e7; z *= 1.3) {
        const double d = disparity_of_depth(c, z);
        EXPECT_LT(d, prev);
        EXPECT_EQ(d > 0, z < zf);
        prev = d;
    }
    EXPECT_NEAR(disparity_of_depth(c, 1e12), -disparity_scale(c) / zf, 1e-6);
}

TEST(Optics, GeneralizedFocusAgreesWithDefinitionOnRandomSets) {
    auto rng = item_rng(20, 0);
    std::size_t positives = 0;
    for (int k = 0; k < 1000; ++k) {
        std::vector<double> ds(1 + draw_index(rng, 6));
        for (double& d : ds) d = double(long(draw_index(rng, 21)) - 10);
        if (draw_uniform(rng, 0, 1) < 0.5) {
            ds[draw_index(rng, ds.size())] += draw_uniform(rng, -0.5, 0.5);
        } else {
            for (double& d : ds) d += draw_uniform(rng, -1e-9, 1e-9) * 0.99;
        }
        const bool expected = oracle::all_integral(ds, 1e-9);
        positives += expected;
        EXPECT_EQ(is_generalized_focus(ds, 1e-9), expected);
    }
    EXPECT_GT(positives, 400u);
}

TEST(Optics, GeneralizedFocus) {
    const std::vector<double> ints{0, 1, -3};
    EXPECT_TRUE(is_generalized_focus(ints, 1e-9));
    const std::vector<double> fifth{0.2};
    EXPECT_FALSE(is_generalized_focus(fifth, 1e-9));
    EXPECT_TRUE(is_generalized_focus({}, 1e-9));
    const std::vector<double> near{2.0 + 5e-10, -1.0 - 5e-10};
    EXPECT_TRUE(is_generalized_focus(near, 1e-9));
}

TEST(Optics, SamplePatternHasNMicroEntriesPerView) {
    for (double d : {0.0, 0.2, 1.0, -2.5}) {
        const auto p = sample_pattern(camera(37, 7), d);
        ASSERT_EQ(p.views.size(), 7u);
        for (const auto& v : p.views) EXPECT_EQ(v.size(), 37u);
    }
}

TEST(Optics, UnitDisparityViewsSampleTheSameLattice) {
    const auto p = sample_pattern(camera(), 1.0);
    for (const auto& v : p.views)
        for (double x : v) EXPECT_EQ(x, std::round(x));
}

TEST(Optics, TwoViewHalfDisparityInterleaves) {
    const auto p = sample_pattern(camera(10, 2), 0.5);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_DOUBLE_EQ(p.views[1][i] - p.views[0][i], 0.5);
        EXPECT_DOUBLE_EQ(p.views[0][i], double(i) - 0.25);
    }
    EXPECT_EQ(count_recorded_points(camera(10, 2), 0.5), 20u);
}

TEST(Optics, ViewsRepeatWithPeriodQ) {
    // d = p/q: views j and j+q see the same fractional offsets.
    for (auto [p, q] : std::initializer_list<std::pair<long, long>>{{1, 5}, {1, 3}, {2, 7}, {-3, 4}}) {
        const double d = double(p) / double(q);
        const auto pat = sample_pattern(camera(20, 9), d);
        for (std::size_t j = 0; j + std::size_t(q) < 9; ++j) {
            const double shift = pat.views[j + std::size_t(q)][0] - pat.views[j][0];
            EXPECT_NEAR(shift, double(p), 1e-12);
            const double fa = pat.views[j][0] - std::floor(pat.views[j][0] + 1e-12);
            const double fb = pat.views[j + std::size_t(q)][0] - std::floor(pat.views[j + std::size_t(q)][0] + 1e-12);
            EXPECT_NEAR(fa, fb, 1e-12);
        }
        // Views inside one period are pairwise distinct modulo 1.
        for (long a = 0; a < q && a < 9; ++a)
            for (long b = a + 1; b < q && b < 9; ++b) {
                const double diff = pat.views[std::size_t(b)][0] - pat.views[std::size_t(a)][0];
                EXPECT_GT(std::abs(diff - std::round(diff)), 1e-6);
            }
    }
}

TEST(Optics, CountMatchesExactRationalOracle) {
    for (long n_micro : {10L, 50L, 100L})
        for (long n_views : {2L, 5L, 9L})
            for (long q = 1; q <= 9; ++q)
                for (long p = -3 * q; p <= 3 * q; ++p) {
                    if (std::gcd(p, q) != 1) continue;
                    const std::size_t got = count_recorded_points(camera(std::size_t(n_micro), std::size_t(n_views)),
                                                                  double(p) / double(q));
                    EXPECT_EQ(got, oracle::rational_count(p, q, n_micro, n_views))
                        << "d=" << p << "/" << q << " n_micro=" << n_micro << " n_views=" << n_views;
                }
}

TEST(Optics, CountForFigureCases) {
    EXPECT_EQ(count_recorded_points(camera(), 1.0), 100u);
    EXPECT_EQ(count_recorded_points(camera(), 0.2), 500u);
    EXPECT_EQ(count_recorded_points(camera(), 1.0 / 3.0), 300u);
    EXPECT_EQ(count_recorded_points(camera(50, 9), 1.0 / 3.0), 150u);
    EXPECT_EQ(count_recorded_points(camera(), 0.0), 100u);
}

TEST(Optics, IntegerDisparityCountsEachMicroLensOnce) {
    for (int d = -6; d <= 6; ++d) EXPECT_EQ(count_recorded_points(camera(), double(d)), 100u) << d;
}

TEST(Optics, CountIsMirrorSymmetric) {
    auto rng = item_rng(21, 0);
    for (int k = 0; k < 200; ++k) {
        const double d = draw_uniform(rng, 0.0, 4.0);
        EXPECT_EQ(count_recorded_points(camera(), d), count_recorded_points(camera(), -d)) << d;
    }
}

TEST(Optics, CountNeverExceedsAllSamples) {
    auto rng = item_rng(22, 0);
    for (int k = 0; k < 100; ++k) {
        const double d = draw_uniform(rng, -5.0, 5.0);
        const auto n = count_recorded_points(camera(40, 9), d);
        EXPECT_LE(n, 40u * 9u);
        EXPECT_GE(n, 40u);  // the central view alone covers every micro-lens
    }
}

TEST(Optics, SketchMatchesExactRasterization) {
    const CameraConfig c = camera();
    for (auto [p, q] : std::initializer_list<std::pair<long, long>>{{0, 1}, {1, 1}, {1, 5}, {-1, 5}, {1, 3}, {2, 3}, {-3, 7}, {7, 2}})
        for (long x0 : {0L, 5L, -3L}) {
            const auto s = epi_sketch(c, double(p) / double(q), x0);
            ASSERT_EQ(s.columns.size(), 9u);
            for (long j = 0; j < 9; ++j) EXPECT_EQ(s.columns[std::size_t(j)], x0 + floor_div(j * p, q)) << p << "/" << q;
        }
}

TEST(Optics, SketchFigureCases) {
    const CameraConfig c = camera();
    EXPECT_EQ(epi_sketch(c, 0.0, 5).columns, std::vector<long>(9, 5));
    EXPECT_EQ(epi_sketch(c, 1.0).columns, (std::vector<long>{0, 1, 2, 3, 4, 5, 6, 7, 8}));
    EXPECT_EQ(epi_sketch(c, 0.2).columns, (std::vector<long>{0, 0, 0, 0, 0, 1, 1, 1, 1}));
    EXPECT_THROW(epi_sketch(c, std::nan("")), DomainError);
}

TEST(Optics, SweepRowsAndEndpoints) {
    const auto rows = disparity_sweep(camera(), 0.1, 2.0, 20);
    ASSERT_EQ(rows.size(), 20u);
    EXPECT_DOUBLE_EQ(rows.front().disparity, 0.1);
    EXPECT_DOUBLE_EQ(rows.back().disparity, 2.0);
    EXPECT_EQ(rows.back().effective_count, 100u);
    EXPECT_THROW(disparity_sweep(camera(), 0, 1, 0), DomainError);
}
