#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <mutex>
#include <map>

#include "compresslab/mi_estimator.hpp"
#include "compresslab/oracle.hpp"
#include "compresslab/rng.hpp"
#include "compresslab/scripted_client.hpp"
#include "test_util.hpp"

using namespace compresslab;

namespace {

// Direct translation of the estimator with plain exp/log, for moderate entries.
double naive_estimate(const ScoreMatrix& s) {
    long double total = 0;
    for (std::size_t i = 0; i < s.n(); ++i) {
        for (std::size_t j = 0; j < s.m(); ++j) {
            long double denom = 0;
            for (std::size_t l = 0; l < s.n(); ++l) denom += std::exp(static_cast<long double>(s.at(i, j, l)));
            denom /= static_cast<long double>(s.n());
            total += s.at(i, j, i) - std::log(denom);
        }
    }
    return static_cast<double>(total / static_cast<long double>(s.n() * s.m()));
}

ScoreMatrix random_matrix(RngStream& rng, std::size_t n, std::size_t m, double lo, double hi) {
    ScoreMatrix s(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t l = 0; l < n; ++l) s.at(i, j, l) = lo + (hi - lo) * rng.uniform();
    return s;
}

}  // namespace

TEST(Estimator, ConstantOverContextsIsZero) {
    ScoreMatrix s(3, 2);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t l = 0; l < 3; ++l) s.at(i, j, l) = -4.0 - static_cast<double>(i + j);
    const auto e = estimate_mi(s);
    EXPECT_EQ(e.raw_nats, 0.0);
    EXPECT_EQ(e.value_nats, 0.0);
}

TEST(Estimator, HandExampleTwoByOne) {
    ScoreMatrix s(2, 1);
    s.at(0, 0, 0) = std::log(0.9);
    s.at(0, 0, 1) = std::log(0.1);
    s.at(1, 0, 0) = std::log(0.1);
    s.at(1, 0, 1) = std::log(0.9);
    const auto e = estimate_mi(s);
    // term_i = ln .9 - ln .5
    EXPECT_NEAR(e.raw_nats, std::log(1.8), 1e-12);
    EXPECT_NEAR(e.raw_nats, 0.5878, 1e-4);
    EXPECT_NEAR(e.bound_nats, std::log(2.0), 0.0);
    ASSERT_EQ(e.per_term.size(), 2u);
}

TEST(Estimator, NearDeterministicApproachesLnN) {
    ScoreMatrix s(20, 4, -50.0);
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 4; ++j) s.at(i, j, i) = -1.0;
    const auto e = estimate_mi(s);
    EXPECT_NEAR(e.value_nats, std::log(20.0), 1e-6);
    EXPECT_NEAR(e.value_nats, 3.00, 0.01);
}

TEST(Estimator, MatchesNaiveOracle) {
    auto rng = seeded_rng(11, "naive");
    for (int t = 0; t < 200; ++t) {
        const auto s = random_matrix(rng, 2 + rng.below(10), 1 + rng.below(5), -30.0, 0.0);
        EXPECT_NEAR(estimate_mi(s).raw_nats, naive_estimate(s), 1e-10);
    }
}

TEST(Estimator, BoundAndClipProperty) {
    auto rng = seeded_rng(5, "bound");
    for (int t = 0; t < 1000; ++t) {
        const auto n = 2 + rng.below(15);
        const auto s = random_matrix(rng, n, 1 + rng.below(8), -200.0, 0.0);
        const auto e = estimate_mi(s);
        EXPECT_LE(e.raw_nats, std::log(static_cast<double>(n)) + 1e-9);
        EXPECT_GE(e.value_nats, 0.0);
        if (e.raw_nats >= 0) EXPECT_EQ(e.value_nats, e.raw_nats);
        else EXPECT_EQ(e.value_nats, 0.0);
    }
}

TEST(Estimator, PerTermsKeepTheirSign) {
    ScoreMatrix s(2, 1);
    s.at(0, 0, 0) = -5.0;  // own context less likely than the other one
    s.at(0, 0, 1) = -1.0;
    s.at(1, 0, 0) = -1.0;
    s.at(1, 0, 1) = -5.0;
    const auto e = estimate_mi(s);
    EXPECT_LT(e.raw_nats, 0.0);
    EXPECT_EQ(e.value_nats, 0.0);
    EXPECT_LT(e.per_term[0], 0.0);
    EXPECT_LT(e.per_term[1], 0.0);
}

TEST(Estimator, ShiftInvariance) {
    auto rng = seeded_rng(2, "shift");
    auto s = random_matrix(rng, 6, 3, -40.0, -1.0);
    const auto before = estimate_mi(s);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            const double c = -1000.0 * rng.uniform();
            for (double& v : s.row(i, j)) v += c;
        }
    }
    const auto after = estimate_mi(s);
    for (std::size_t k = 0; k < before.per_term.size(); ++k) EXPECT_NEAR(before.per_term[k], after.per_term[k], 1e-9);
}

TEST(Estimator, StableForHugeNegativeEntries) {
    auto rng = seeded_rng(3, "stable");
    for (int t = 0; t < 50; ++t) {
        const auto s = random_matrix(rng, 2 + rng.below(15), 1 + rng.below(8), -1e5, -1e4);
        const auto e = estimate_mi(s);
        EXPECT_TRUE(std::isfinite(e.raw_nats));
        EXPECT_LE(e.raw_nats, e.bound_nats + 1e-9);
    }
}

TEST(Estimator, NonFiniteEntryNamed) {
    ScoreMatrix s(2, 2, -1.0);
    s.at(1, 0, 1) = std::nan("");
    try {
        estimate_mi(s);
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("i=1, j=0, l=1"), std::string::npos) << e.what();
    }
}

TEST(Estimator, ShapePreconditions) {
    EXPECT_THROW(estimate_mi(ScoreMatrix(1, 1)), std::invalid_argument);
    EXPECT_THROW(estimate_mi(ScoreMatrix(2, 0)), std::invalid_argument);
}

TEST(BitEfficiency, HandArithmetic) {
    MIEstimate mi;
    mi.value_nats = 2.0;
    const std::vector<std::int64_t> lengths(10, 100);
    const auto r = bit_efficiency(mi, lengths);
    EXPECT_NEAR(r.bits_per_token, 0.02885, 1e-5);
    EXPECT_DOUBLE_EQ(r.bits_per_token, (2.0 / std::log(2.0)) / 100.0);
    EXPECT_DOUBLE_EQ(r.mean_output_tokens, 100.0);
}

TEST(BitEfficiency, ZeroMiAndMeanInvariance) {
    MIEstimate zero;
    EXPECT_EQ(bit_efficiency(zero, std::vector<std::int64_t>{7}).bits_per_token, 0.0);
    MIEstimate mi;
    mi.value_nats = 1.3;
    EXPECT_DOUBLE_EQ(bit_efficiency(mi, std::vector<std::int64_t>{50, 150}).bits_per_token,
                     bit_efficiency(mi, std::vector<std::int64_t>{100, 100}).bits_per_token);
}

TEST(BitEfficiency, Preconditions) {
    MIEstimate mi;
    EXPECT_THROW(bit_efficiency(mi, std::vector<std::int64_t>{}), std::invalid_argument);
    EXPECT_THROW(bit_efficiency(mi, std::vector<std::int64_t>{3, 0}), std::invalid_argument);
}

namespace {

std::vector<QARecord> make_records(std::size_t n) {
    std::vector<QARecord> r;
    for (std::size_t k = 0; k < n; ++k) {
        r.push_back({"d" + std::to_string(k), "context " + std::to_string(k), "query " + std::to_string(k), "g", ""});
    }
    return r;
}

std::vector<std::vector<CompressionSample>> make_samples(const std::vector<QARecord>& recs, std::size_t m) {
    std::vector<std::vector<CompressionSample>> out;
    for (const auto& r : recs) {
        std::vector<CompressionSample> s;
        for (std::size_t j = 0; j < m; ++j) {
            s.push_back({r.id, static_cast<int>(j), "z" + std::to_string(j) + " of " + r.id, 3, j});
        }
        out.push_back(s);
    }
    return out;
}

ScoringPromptFn simple_prompt() {
    return [](const QARecord& ctx, const QARecord& q) { return ctx.context + " | " + q.query; };
}

}  // namespace

TEST(ScoreMatrixBuild, TwoByOneFixedSums) {
    const auto recs = make_records(2);
    const auto samples = make_samples(recs, 1);
    ScriptedClient fake;
    fake.on_score([](const std::string& model, std::string_view prompt, std::string_view z) {
        EXPECT_EQ(model, "proxy");
        // sample of doc i scored under context l
        const double i = z.find("d1") != std::string_view::npos ? 1 : 0;
        const double l = prompt.find("context 1") != std::string_view::npos ? 1 : 0;
        return TokenLogProbs::from_tokens({-(1 + 10 * i + l)});
    });
    const auto s = build_score_matrix(recs, samples, "proxy", fake, simple_prompt(), 2);
    EXPECT_EQ(s.at(0, 0, 0), -1.0);
    EXPECT_EQ(s.at(0, 0, 1), -2.0);
    EXPECT_EQ(s.at(1, 0, 0), -11.0);
    EXPECT_EQ(s.at(1, 0, 1), -12.0);
}

TEST(ScoreMatrixBuild, QueryTravelsWithTheSample) {
    const auto recs = make_records(3);
    const auto samples = make_samples(recs, 1);
    ScriptedClient fake;
    std::mutex mu;
    std::vector<std::pair<std::string, std::string>> seen;
    fake.on_score([&](const std::string&, std::string_view prompt, std::string_view z) {
        std::lock_guard lock(mu);
        seen.emplace_back(std::string(prompt), std::string(z));
        return TokenLogProbs::from_tokens({-1.0});
    });
    build_score_matrix(recs, samples, "proxy", fake, simple_prompt(), 1);
    for (const auto& [prompt, z] : seen) {
        const auto owner = z.substr(z.find("of ") + 4);  // record index of z's source
        EXPECT_NE(prompt.find("query " + owner), std::string::npos) << prompt << " / " << z;
    }
}

TEST(ScoreMatrixBuild, TwentyByTwentyIssuesEightThousandCalls) {
    const auto recs = make_records(20);
    const auto samples = make_samples(recs, 20);
    ScriptedClient fake;
    fake.on_score([](const std::string&, std::string_view p, std::string_view z) {
        return TokenLogProbs::from_tokens({-static_cast<double>(p.size() % 7) - static_cast<double>(z.size() % 5)});
    });
    std::size_t unique = 0;
    build_score_matrix(recs, samples, "proxy", fake, simple_prompt(), 4, &unique);
    EXPECT_EQ(unique, 8000u);
    EXPECT_EQ(fake.score_calls(), 8000u);
}

TEST(ScoreMatrixBuild, DuplicateCallsDeduplicated) {
    auto recs = make_records(2);
    auto samples = make_samples(recs, 3);
    for (auto& row : samples)
        for (auto& s : row) s.text = "same";
    ScriptedClient fake;
    fake.on_score([](const std::string&, std::string_view, std::string_view) { return TokenLogProbs::from_tokens({-1}); });
    std::size_t unique = 0;
    build_score_matrix(recs, samples, "proxy", fake, simple_prompt(), 1, &unique);
    // prompts differ per (i, l); completions are all identical
    EXPECT_EQ(unique, 4u);
    EXPECT_EQ(fake.score_calls(), 4u);
}

TEST(ScoreMatrixBuild, FailureAbortsWholeMatrix) {
    const auto recs = make_records(3);
    const auto samples = make_samples(recs, 2);
    ScriptedClient fake;
    std::atomic<int> calls{0};
    fake.on_score([&](const std::string&, std::string_view, std::string_view) {
        if (++calls == 5) throw ContextOverflow("too long");
        return TokenLogProbs::from_tokens({-1});
    });
    EXPECT_THROW(build_score_matrix(recs, samples, "proxy", fake, simple_prompt(), 1), ContextOverflow);
}

TEST(ScoreMatrixBuild, RaggedSamplesRejected) {
    const auto recs = make_records(2);
    auto samples = make_samples(recs, 2);
    samples[1].pop_back();
    ScriptedClient fake;
    EXPECT_THROW(build_score_matrix(recs, samples, "proxy", fake, simple_prompt(), 1), std::invalid_argument);
}

TEST(ScoreMatrixBuild, ExactChannelGivesTrueLogConditionals) {
    // records carry context indices; samples carry symbols; the scorer knows p(z|x)
    auto rng = seeded_rng(9, "channel");
    const auto ch = DiscreteChannel::random(4, 6, rng);
    const auto recs = make_records(4);
    std::vector<std::vector<CompressionSample>> samples(4);
    for (int i = 0; i < 4; ++i) {
        std::discrete_distribution<int> draw(ch.cond()[i].begin(), ch.cond()[i].end());
        for (int j = 0; j < 5; ++j) samples[i].push_back({recs[i].id, j, std::to_string(draw(rng)), 1, 0});
    }
    ScriptedClient fake;
    fake.on_score([&](const std::string&, std::string_view prompt, std::string_view z) {
        const auto l = static_cast<std::size_t>(prompt[8] - '0');  // "context k | ..."
        return TokenLogProbs::from_tokens({std::log(ch.p(l, std::stoul(std::string(z))))});
    });
    const auto s = build_score_matrix(recs, samples, "proxy", fake, simple_prompt(), 3);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            for (std::size_t l = 0; l < 4; ++l)
                EXPECT_DOUBLE_EQ(s.at(i, j, l), std::log(ch.p(l, std::stoul(samples[i][j].text))));
}

TEST(MatrixCache, RoundTrip) {
    auto rng = seeded_rng(4, "cache");
    const auto s = random_matrix(rng, 3, 2, -20, 0);
    TempDir dir;
    write_matrix_cache(dir / "m.jsonl", s);
    const auto back = read_matrix_cache(dir / "m.jsonl");
    ASSERT_EQ(back.n(), 3u);
    ASSERT_EQ(back.m(), 2u);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(back.at(i, j, l), s.at(i, j, l));
}
