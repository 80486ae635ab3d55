#include "compresslab/oracle_suite.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "compresslab/mi_estimator.hpp"
#include "compresslab/oracle.hpp"
#include "compresslab/rng.hpp"

namespace compresslab {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

CheckResult bound_check(std::uint64_t seed) {
    auto rng = seeded_rng(seed, "oracle-suite/bound");
    double worst_gap = -1e300;
    bool clipped_ok = true;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 2 + rng.below(15);
        const std::size_t m = 1 + rng.below(8);
        ScoreMatrix mat(n, m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                for (std::size_t l = 0; l < n; ++l) mat.at(i, j, l) = -50.0 * rng.uniform();
        const auto e = estimate_mi(mat);
        worst_gap = std::max(worst_gap, e.raw_nats - std::log(static_cast<double>(n)));
        clipped_ok = clipped_ok && e.value_nats >= 0.0;
    }
    return {"estimator bound", worst_gap <= 1e-9 && clipped_ok,
            "max(raw - ln N) = " + fmt(worst_gap) + " over 1000 matrices"};
}

CheckResult exactness_check(std::uint64_t seed) {
    auto rng = seeded_rng(seed, "oracle-suite/exact");
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng.below(15);
        const std::size_t z = 2 + rng.below(63);
        const auto ch = DiscreteChannel::random(n, z, rng);
        worst = std::max(worst, std::abs(estimator_expectation(ch) - exact_mi(ch)));
    }
    const double det = estimator_expectation(DiscreteChannel::deterministic(8));
    const double ind = estimator_expectation(DiscreteChannel::independent(5, {0.2, 0.3, 0.5}));
    const bool ok = worst <= 1e-9 && std::abs(det - std::log(8.0)) <= 1e-6 && ind == 0.0;
    return {"estimator exactness", ok,
            "max |E[I] - I| = " + fmt(worst) + ", deterministic N=8 " + fmt(det) + ", independent " + fmt(ind)};
}

CheckResult monte_carlo_check(std::uint64_t seed) {
    const auto ch = DiscreteChannel::binary_symmetric(0.1);
    const double truth = exact_mi(ch);
    int within = 0;
    std::vector<double> err_small, err_large;
    for (int t = 0; t < 50; ++t) {
        auto rng = seeded_rng(seed + static_cast<std::uint64_t>(t), "oracle-suite/bsc");
        const double big = estimate_mi(sample_channel(ch, 4096, rng)).value_nats;
        const double small = estimate_mi(sample_channel(ch, 64, rng)).value_nats;
        if (std::abs(big - truth) <= 0.05) ++within;
        err_large.push_back(std::abs(big - truth));
        err_small.push_back(std::abs(small - truth));
    }
    const double ml = median(err_large), ms = median(err_small);
    return {"monte carlo consistency", within >= 45 && ml < ms,
            std::to_string(within) + "/50 within 0.05 of " + fmt(truth) + "; median error m=4096 " + fmt(ml) +
                " vs m=64 " + fmt(ms)};
}

CheckResult stability_check(std::uint64_t seed) {
    auto rng = seeded_rng(seed, "oracle-suite/stability");
    bool ok = true;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng.below(15);
        const std::size_t m = 1 + rng.below(8);
        ScoreMatrix mat(n, m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                for (std::size_t l = 0; l < n; ++l) mat.at(i, j, l) = -1e5 + 9e4 * rng.uniform();
        const auto e = estimate_mi(mat);
        ok = ok && std::isfinite(e.raw_nats) && std::isfinite(e.value_nats);
    }
    return {"log-sum-exp stability", ok, "entries in [-1e5, -1e4], 100 matrices"};
}

}  // namespace

std::vector<CheckResult> run_oracle_suite(std::uint64_t seed) {
    return {bound_check(seed), exactness_check(seed), monte_carlo_check(seed), stability_check(seed)};
}

bool print_checks(std::ostream& out, const std::vector<CheckResult>& checks) {
    bool all = true;
    for (const auto& c : checks) {
        out << (c.passed ? "PASS" : "FAIL") << "  " << std::left << std::setw(26) << c.name << c.detail << '\n';
        all = all && c.passed;
    }
    return all;
}

}  // namespace compresslab
