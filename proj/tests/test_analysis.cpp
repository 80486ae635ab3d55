#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "compresslab/analysis.hpp"
#include "compresslab/rng.hpp"
#include "glm_oracle.hpp"

using namespace compresslab;

namespace {

RunRecord judged(std::uint64_t seed, bool ok) {
    RunRecord r;
    r.seed = seed;
    r.judgment = ok;
    return r;
}

}  // namespace

TEST(Summarize, HandArithmetic) {
    const std::vector<double> v{1, 2, 3};
    const auto g = summarize(v);
    EXPECT_DOUBLE_EQ(g.mean, 2.0);
    EXPECT_NEAR(g.stderr_mean, 1.0 / std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(g.stderr_mean, 0.5774, 1e-4);
    EXPECT_EQ(g.n, 3u);
    const std::vector<double> flat{0.4, 0.4, 0.4, 0.4};
    EXPECT_EQ(summarize(flat).stderr_mean, 0.0);
    const std::vector<double> one{7.0};
    EXPECT_TRUE(summarize(one).single);
    EXPECT_EQ(summarize(one).stderr_mean, 0.0);
    EXPECT_THROW(summarize(std::vector<double>{}), std::invalid_argument);
}

TEST(Aggregate, BySeedAndPermutationInvariant) {
    std::vector<RunRecord> recs;
    for (std::uint64_t s = 0; s < 5; ++s) {
        for (int k = 0; k < 7; ++k) recs.push_back(judged(s, (k * 3 + s) % 4 != 0));
    }
    RunRecord ppl_only;
    ppl_only.seed = 9;
    ppl_only.perplexity = 3.0;
    recs.push_back(ppl_only);
    const auto a = aggregate(recs, seed_key, correctness);
    EXPECT_EQ(a.size(), 5u);  // the perplexity record has no correctness
    auto rng = seeded_rng(2, "perm");
    for (int t = 0; t < 10; ++t) {
        std::shuffle(recs.begin(), recs.end(), rng);
        const auto b = aggregate(recs, seed_key, correctness);
        for (const auto& [k, g] : a) {
            EXPECT_EQ(b.at(k).mean, g.mean);
            EXPECT_EQ(b.at(k).stderr_mean, g.stderr_mean);
        }
    }
    EXPECT_EQ(aggregate(recs, seed_key, perplexity_value).at("9").mean, 3.0);
}

TEST(Design, ZScoredColumns) {
    const auto rows = glm_oracle::synthetic_rows(500, {0, 0, 0, 0, 0, 0, 0}, 4);
    const auto x = design_matrix(rows);
    for (int c = 1; c < 6; ++c) {
        double m = 0, v = 0;
        for (const auto& r : x) m += r[c] / 500.0;
        for (const auto& r : x) v += (r[c] - m) * (r[c] - m) / 500.0;
        EXPECT_NEAR(m, 0.0, 1e-9);
        EXPECT_NEAR(v, 1.0, 1e-9);
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
        EXPECT_EQ(x[k][0], 1.0);
        EXPECT_EQ(x[k][6], rows[k].comp_family);
    }
}

TEST(Glm, MatchesGradientDescentOracle) {
    const auto rows = glm_oracle::synthetic_rows(1500, {0.2, 0.5, -0.3, 0.8, 0.2, 0.9, 0.4}, 11);
    const auto fit = fit_logistic(rows);
    ASSERT_TRUE(fit.converged);
    const auto gd = glm_oracle::gradient_descent(rows);
    for (int c = 0; c < 7; ++c) EXPECT_NEAR(fit.coefficients[c], gd[c], 1e-4) << fit.names[c];
    EXPECT_NEAR(logistic_log_likelihood(rows, fit.coefficients), fit.log_likelihood.back(), 1e-9);
    EXPECT_GE(fit.log_likelihood.back(), logistic_log_likelihood(rows, gd) - 1e-9);
}

TEST(Glm, KnownBetaWithinIntervals) {
    const std::array<double, 7> beta{0.0, 0.5, -0.3, 0.8, 0.2, 0.9, 0.4};
    const auto fit = fit_logistic(glm_oracle::synthetic_rows(50000, beta, 1));
    ASSERT_TRUE(fit.converged);
    EXPECT_EQ(fit.n_obs, 50000u);
    for (int c = 0; c < 7; ++c) {
        EXPECT_LE(fit.ci95_low[c], beta[c]) << fit.names[c];
        EXPECT_GE(fit.ci95_high[c], beta[c]) << fit.names[c];
        EXPECT_NEAR(fit.ci95_high[c] - fit.coefficients[c], 1.96 * fit.stderrs[c], 1e-12);
    }
}

TEST(Glm, IntervalCoverageAcrossSeeds) {
    const std::array<double, 7> beta{-0.2, 0.5, -0.3, 0.8, 0.2, 0.9, 0.4};
    std::array<int, 7> covered{};
    const int trials = 40;
    for (int s = 0; s < trials; ++s) {
        const auto fit = fit_logistic(glm_oracle::synthetic_rows(3000, beta, 100 + s));
        for (int c = 0; c < 7; ++c) covered[c] += fit.ci95_low[c] <= beta[c] && beta[c] <= fit.ci95_high[c];
    }
    // nominal 95%; 32 of 40 is far below what a correct interval produces
    for (int c = 0; c < 7; ++c) EXPECT_GE(covered[c], 32) << c;
}

TEST(Glm, LogLikelihoodMonotone) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto fit = fit_logistic(glm_oracle::synthetic_rows(800, {0.3, 1.5, -2.0, 0.8, 0.0, 2.5, -1.0}, s));
        ASSERT_GE(fit.log_likelihood.size(), 2u);
        for (std::size_t k = 1; k < fit.log_likelihood.size(); ++k) {
            EXPECT_GE(fit.log_likelihood[k], fit.log_likelihood[k - 1]);
        }
        EXPECT_NEAR(fit.log_likelihood.front(), -800.0 * std::log(2.0), 1e-9);
    }
}

TEST(Glm, AffineRescalingInvariant) {
    const auto rows = glm_oracle::synthetic_rows(2000, {0.1, 0.5, -0.3, 0.8, 0.2, 0.9, 0.4}, 5);
    auto scaled = rows;
    for (auto& r : scaled) {
        r.doc_len = 3.5 * r.doc_len - 17;
        r.pred_len = 0.01 * r.pred_len + 4;
        r.comp_len = 1000 * r.comp_len;
        r.pred_size = r.pred_size / 1e9;
        r.comp_size = -2 * r.comp_size + 5;  // sign flip negates the coefficient
    }
    const auto a = fit_logistic(rows);
    const auto b = fit_logistic(scaled);
    for (int c = 0; c < 7; ++c) {
        const double expect = c == 5 ? -a.coefficients[c] : a.coefficients[c];
        EXPECT_NEAR(b.coefficients[c], expect, 1e-9) << a.names[c];
        EXPECT_NEAR(b.stderrs[c], a.stderrs[c], 1e-9);
    }
}

TEST(Glm, Preconditions) {
    auto rows = glm_oracle::synthetic_rows(100, {0, 0, 0, 0, 0, 0, 0}, 3);
    auto same = rows;
    for (auto& r : same) r.label = true;
    EXPECT_THROW(fit_logistic(same), std::invalid_argument);
    auto flat = rows;
    for (auto& r : flat) r.pred_size = 70e9;
    try {
        fit_logistic(flat);
        FAIL() << "expected a zero-variance error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("pred_size"), std::string::npos);
    }
    EXPECT_THROW(fit_logistic(std::vector<FeatureRow>{}), std::invalid_argument);
}

TEST(Glm, SeparationFlagged) {
    auto rows = glm_oracle::synthetic_rows(300, {0, 0, 0, 0, 0, 0, 0}, 8);
    for (auto& r : rows) r.label = r.doc_len > 800;
    const auto fit = fit_logistic(rows);
    EXPECT_TRUE(fit.separation);
    for (double c : fit.coefficients) EXPECT_TRUE(std::isfinite(c));

    GlmOptions ridge;
    ridge.ridge = 1e-6;
    const auto r = fit_logistic(rows, ridge);
    for (double c : r.coefficients) EXPECT_TRUE(std::isfinite(c));
}

TEST(Glm, FeatureRowsFromRecords) {
    const ModelSpec comp{"q", "Qwen", 7'000'000'000, 28, 3584, 0, 0};
    const ModelSpec pred{"g", "gpt", 70'000'000'000, 80, 8192, 1, 2};
    RunRecord r = judged(0, true);
    r.output_tokens = 55;
    r.usage = {{"q", 900, 55}, {"g", 80, 12}, {"g", 30, 5}};
    RunRecord skipped;
    skipped.perplexity = 2.0;
    const std::vector<RunRecord> recs{r, skipped};
    const auto rows = feature_rows(recs, comp, pred, "qwen");
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].doc_len, 900);
    EXPECT_EQ(rows[0].pred_len, 12);
    EXPECT_EQ(rows[0].comp_len, 55);
    EXPECT_EQ(rows[0].pred_size, 70e9);
    EXPECT_EQ(rows[0].comp_size, 7e9);
    EXPECT_EQ(rows[0].comp_family, 1.0);
    EXPECT_TRUE(rows[0].label);
    EXPECT_EQ(feature_rows(recs, comp, pred, "llama")[0].comp_family, 0.0);
}

TEST(Glm, CoefficientsCsv) {
    const auto fit = fit_logistic(glm_oracle::synthetic_rows(400, {0, 1, 0, 0, 0, 0, 0}, 2));
    std::ostringstream out;
    write_coefficients_csv(out, fit);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "feature,coefficient,stderr,ci95_low,ci95_high,p_value,significant");
    std::vector<std::string> names;
    while (std::getline(in, line)) names.push_back(line.substr(0, line.find(',')));
    EXPECT_EQ(names, (std::vector<std::string>{"intercept", "doc_len", "pred_len", "comp_len", "pred_size",
                                               "comp_size", "comp_family"}));
    EXPECT_TRUE(fit.significant[1]);
}
