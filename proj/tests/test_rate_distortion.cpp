#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "compresslab/errors.hpp"
#include "compresslab/rate_distortion.hpp"
#include "compresslab/rng.hpp"
#include "test_util.hpp"

using namespace compresslab;

namespace {

std::vector<RatePoint> decay_points(double c, double b, double d0, double noise, std::uint64_t seed) {
    auto rng = seeded_rng(seed, "rd-noise");
    std::normal_distribution<double> eps(0.0, noise);
    std::vector<RatePoint> pts;
    for (int k = 0; k < 12; ++k) {
        const double r = 0.05 + 0.25 * k;
        pts.push_back({r, c * std::exp(-b * r) + d0 + (noise > 0 ? eps(rng) : 0.0), "p" + std::to_string(k), 0.0});
    }
    return pts;
}

double rss_of(const std::vector<RatePoint>& pts, double c, double b, double d0) {
    double s = 0;
    for (const auto& p : pts) s += std::pow(p.distortion - (c * std::exp(-b * p.rate) + d0), 2);
    return s;
}

// Grid over b with the closed-form (c, d0) for each b; a separate route to the
// unconstrained-in-b minimum, used as a yardstick.
double grid_best_rss(const std::vector<RatePoint>& pts) {
    double best = std::numeric_limits<double>::infinity();
    for (int g = 0; g <= 4000; ++g) {
        const double b = g * 0.005;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(pts.size());
        for (const auto& p : pts) {
            const double x = std::exp(-b * p.rate);
            sx += x;
            sy += p.distortion;
            sxx += x * x;
            sxy += x * p.distortion;
        }
        const double det = n * sxx - sx * sx;
        if (std::abs(det) < 1e-14) continue;
        double c = (n * sxy - sx * sy) / det;
        double d0 = (sy - c * sx) / n;
        if (c < 0 || d0 < 0 || d0 > 1) continue;
        best = std::min(best, rss_of(pts, c, b, d0));
    }
    return best;
}

}  // namespace

TEST(Distortion, Accuracy) {
    EXPECT_DOUBLE_EQ(accuracy_distortion(std::vector<bool>{true, true, false, false}), 0.5);
    EXPECT_DOUBLE_EQ(accuracy_distortion(std::vector<bool>{true, true}), 0.0);
    EXPECT_DOUBLE_EQ(accuracy_distortion(std::vector<bool>{false}), 1.0);
    EXPECT_THROW(accuracy_distortion(std::vector<bool>{}), std::invalid_argument);
}

TEST(Distortion, Cosine) {
    const std::vector<double> a{1, 2, 3}, o1{1, 0}, o2{0, 3}, neg{-1, -2, -3}, z{0, 0, 0};
    EXPECT_NEAR(cosine_distortion(a, a), 0.0, 1e-15);
    EXPECT_NEAR(cosine_distortion(o1, o2), 1.0, 1e-15);
    EXPECT_NEAR(cosine_distortion(a, neg), 2.0, 1e-15);
    EXPECT_THROW(cosine_distortion(a, z), std::invalid_argument);
    EXPECT_THROW(cosine_distortion(a, o1), std::invalid_argument);
}

TEST(GaussianReference, Values) {
    EXPECT_EQ(gaussian_reference({3.0}, 0.0), 3.0);
    EXPECT_EQ(gaussian_reference({1.0}, 1.0), 0.25);
    EXPECT_EQ(gaussian_reference({4.0}, 0.5), 2.0);
    double prev = gaussian_reference({1.0}, 0.0);
    for (int k = 1; k < 100; ++k) {
        const double d = gaussian_reference({1.0}, 0.1 * k);
        EXPECT_LT(d, prev);
        prev = d;
    }
    EXPECT_THROW(gaussian_reference({0.0}, 1.0), std::invalid_argument);
}

TEST(FitDecay, NoiselessRecovery) {
    const auto fit = fit_decay(decay_points(0.7, 1.5, 0.2, 0.0, 0));
    EXPECT_NEAR(fit.c, 0.7, 1e-6);
    EXPECT_NEAR(fit.b, 1.5, 1e-6);
    EXPECT_NEAR(fit.d0, 0.2, 1e-6);
    EXPECT_LT(fit.rss, 1e-12);
    EXPECT_EQ(fit.n_points, 12u);
}

// Asymptotic sd of the least-squares b at the truth: sigma * sqrt([(J'J)^-1]_bb).
double cramer_rao_sd_b(const std::vector<RatePoint>& pts, double c, double b, double sigma) {
    double m[3][3] = {};
    for (const auto& p : pts) {
        const double g[3] = {std::exp(-b * p.rate), -c * p.rate * std::exp(-b * p.rate), 1.0};
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 3; ++k) m[r][k] += g[r] * g[k];
    }
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    const double cof_bb = m[0][0] * m[2][2] - m[0][2] * m[2][0];
    return sigma * std::sqrt(cof_bb / det);
}

TEST(FitDecay, NoisyRecovery) {
    int c_ok = 0, d0_ok = 0;
    double b_ss = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto pts = decay_points(0.7, 1.5, 0.2, 0.01, seed);
        const auto fit = fit_decay(pts);
        c_ok += std::abs(fit.c - 0.7) <= 0.05;
        d0_ok += std::abs(fit.d0 - 0.2) <= 0.05;
        b_ss += (fit.b - 1.5) * (fit.b - 1.5) / 50.0;
        // a discrete b grid cannot beat the continuous optimum
        EXPECT_LE(fit.rss, grid_best_rss(pts) + 1e-9) << seed;
    }
    EXPECT_GE(c_ok, 45);
    EXPECT_GE(d0_ok, 45);
    // b is as precise as any unbiased estimator can be on this design, and no more
    const double bound = cramer_rao_sd_b(decay_points(0.7, 1.5, 0.2, 0.0, 0), 0.7, 1.5, 0.01);
    EXPECT_GT(bound, 0.03);
    EXPECT_LT(std::sqrt(b_ss), 1.4 * bound);
    EXPECT_GT(std::sqrt(b_ss), 0.6 * bound);
}

TEST(FitDecay, FlatDataTieBreak) {
    std::vector<RatePoint> pts;
    for (int k = 0; k < 6; ++k) pts.push_back({0.1 * k, 0.42, "", 0.0});
    const auto fit = fit_decay(pts);
    EXPECT_EQ(fit.c, 0.0);
    EXPECT_EQ(fit.b, 0.0);
    EXPECT_NEAR(fit.d0, 0.42, 1e-15);
}

TEST(FitDecay, NeverWorseThanFlatAndRespectsBox) {
    auto rng = seeded_rng(13, "rd-prop");
    for (int t = 0; t < 100; ++t) {
        std::vector<RatePoint> pts;
        const int n = 3 + static_cast<int>(rng.below(10));
        double mean = 0;
        for (int k = 0; k < n; ++k) {
            pts.push_back({3.0 * rng.uniform(), rng.uniform(), "", 0.0});
            mean += pts.back().distortion / n;
        }
        pts[0].rate = 0.0;
        pts[1].rate = 1.0;  // at least two distinct rates
        const auto fit = fit_decay(pts);
        EXPECT_LE(fit.rss, rss_of(pts, 0, 0, mean) + 1e-12);
        EXPECT_GE(fit.c, 0.0);
        EXPECT_GE(fit.b, 0.0);
        EXPECT_GE(fit.d0, 0.0);
        EXPECT_LE(fit.d0, 1.0);
        EXPECT_TRUE(std::isfinite(fit.rss));
    }
}

TEST(FitDecay, OrderInvariant) {
    auto pts = decay_points(0.5, 2.0, 0.1, 0.02, 7);
    const auto a = fit_decay(pts);
    std::reverse(pts.begin(), pts.end());
    std::swap(pts[2], pts[7]);
    const auto b = fit_decay(pts);
    EXPECT_DOUBLE_EQ(a.c, b.c);
    EXPECT_DOUBLE_EQ(a.b, b.b);
    EXPECT_DOUBLE_EQ(a.d0, b.d0);
}

TEST(FitDecay, Preconditions) {
    EXPECT_THROW(fit_decay({{0, 0.5, "", 0}, {1, 0.4, "", 0}}), std::invalid_argument);
    EXPECT_THROW(fit_decay({{1, 0.5, "", 0}, {1, 0.4, "", 0}, {1, 0.3, "", 0}}), std::invalid_argument);
}

TEST(FitDecay, WeightedDownweightsNoisyPoint) {
    auto pts = decay_points(0.7, 1.5, 0.2, 0.0, 0);
    for (auto& p : pts) p.stderr_d = 0.01;
    pts[3].distortion += 0.3;
    pts[3].stderr_d = 10.0;
    FitOptions w;
    w.weighted = true;
    const auto weighted = fit_decay(pts, w);
    const auto plain = fit_decay(pts);
    EXPECT_LT(std::abs(weighted.c - 0.7), std::abs(plain.c - 0.7));
    EXPECT_NEAR(weighted.d0, 0.2, 0.01);
}

TEST(FitDecay, CsvRoundTrip) {
    const auto pts = decay_points(0.7, 1.5, 0.2, 0.0, 0);
    TempDir dir;
    {
        std::ofstream out(dir / "pts.csv");
        write_points_csv(out, pts);
    }
    const auto back = read_points_csv(dir / "pts.csv");
    ASSERT_EQ(back.size(), pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) {
        EXPECT_DOUBLE_EQ(back[k].rate, pts[k].rate);
        EXPECT_DOUBLE_EQ(back[k].distortion, pts[k].distortion);
        EXPECT_EQ(back[k].label, pts[k].label);
    }
    std::ostringstream fit_csv;
    write_fit_csv(fit_csv, pts, fit_decay(pts));
    EXPECT_EQ(fit_csv.str().substr(0, fit_csv.str().find('\n')), "rate,distortion,fitted_distortion,label");
    EXPECT_THROW(read_points_csv(dir / "missing.csv"), ConfigError);
}
