#include "compresslab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace compresslab {

DiscreteChannel::DiscreteChannel(std::vector<std::vector<double>> cond) : cond_(std::move(cond)) {
    if (cond_.size() < 2) throw std::invalid_argument("channel needs at least 2 contexts");
    const auto width = cond_.front().size();
    if (width < 1) throw std::invalid_argument("channel alphabet is empty");
    for (std::size_t x = 0; x < cond_.size(); ++x) {
        const auto& row = cond_[x];
        if (row.size() != width) throw std::invalid_argument("channel rows differ in length");
        double sum = 0.0;
        for (double v : row) {
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw std::invalid_argument("channel row " + std::to_string(x) + " has a negative or non-finite entry");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw std::invalid_argument("channel row " + std::to_string(x) + " sums to " + std::to_string(sum));
        }
    }
}

DiscreteChannel DiscreteChannel::random(std::size_t n, std::size_t alphabet, RngStream& rng) {
    std::exponential_distribution<double> expo(1.0);
    std::vector<std::vector<double>> cond(n, std::vector<double>(alphabet));
    for (auto& row : cond) {
        double sum = 0.0;
        for (auto& v : row) sum += (v = expo(rng) + 1e-12);
        for (auto& v : row) v /= sum;
        // push the rounding residue into the largest entry
        const double total = std::accumulate(row.begin(), row.end(), 0.0);
        *std::max_element(row.begin(), row.end()) += 1.0 - total;
    }
    return DiscreteChannel(std::move(cond));
}

DiscreteChannel DiscreteChannel::binary_symmetric(double flip) {
    if (!(flip >= 0.0 && flip <= 1.0)) throw std::invalid_argument("flip probability must be in [0, 1]");
    return DiscreteChannel({{1.0 - flip, flip}, {flip, 1.0 - flip}});
}

DiscreteChannel DiscreteChannel::deterministic(std::size_t n) {
    std::vector<std::vector<double>> cond(n, std::vector<double>(n, 0.0));
    for (std::size_t x = 0; x < n; ++x) cond[x][x] = 1.0;
    return DiscreteChannel(std::move(cond));
}

DiscreteChannel DiscreteChannel::independent(std::size_t n, std::vector<double> row) {
    return DiscreteChannel(std::vector<std::vector<double>>(n, row));
}

void to_json(Json& j, const DiscreteChannel& ch) {
    j = Json{{"n_contexts", ch.n_contexts()}, {"alphabet_size", ch.alphabet_size()}, {"cond", ch.cond()}};
}

DiscreteChannel channel_from_json(const Json& j) {
    return DiscreteChannel(j.at("cond").get<std::vector<std::vector<double>>>());
}

double exact_mi(const DiscreteChannel& ch) {
    const std::size_t n = ch.n_contexts();
    const double w = 1.0 / static_cast<double>(n);
    double mi = 0.0;
    for (std::size_t z = 0; z < ch.alphabet_size(); ++z) {
        double marginal = 0.0;
        for (std::size_t l = 0; l < n; ++l) marginal += ch.p(l, z);
        marginal *= w;
        if (marginal == 0.0) continue;
        // identical rows contribute log 1 = 0; skip so rounding in the mean cannot leave a residue
        bool flat = true;
        for (std::size_t l = 1; l < n && flat; ++l) flat = ch.p(l, z) == ch.p(0, z);
        if (flat) continue;
        for (std::size_t x = 0; x < n; ++x) {
            const double p = ch.p(x, z);
            if (p > 0.0) mi += w * p * std::log(p / marginal);
        }
    }
    return mi;
}

double estimator_expectation(const DiscreteChannel& ch) {
    const std::size_t n = ch.n_contexts();
    std::vector<double> logp(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t z = 0; z < ch.alphabet_size(); ++z) {
            const double weight = ch.p(i, z) / static_cast<double>(n);
            if (weight == 0.0) continue;
            for (std::size_t l = 0; l < n; ++l) {
                const double p = ch.p(l, z);
                logp[l] = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
            }
            total += weight * estimator_term(logp, i);
        }
    }
    return total;
}

ScoreMatrix sample_channel(const DiscreteChannel& ch, std::size_t m, RngStream& rng) {
    if (m < 1) throw std::invalid_argument("sample_channel needs m >= 1");
    const std::size_t n = ch.n_contexts();
    std::vector<std::vector<double>> logs(n, std::vector<double>(ch.alphabet_size()));
    for (std::size_t l = 0; l < n; ++l) {
        for (std::size_t z = 0; z < ch.alphabet_size(); ++z) {
            const double p = ch.p(l, z);
            logs[l][z] = p > 0.0 ? std::max(std::log(p), kLogFloor) : kLogFloor;
        }
    }
    ScoreMatrix matrix(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        std::discrete_distribution<std::size_t> draw(ch.cond()[i].begin(), ch.cond()[i].end());
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t z = draw(rng);
            for (std::size_t l = 0; l < n; ++l) matrix.at(i, j, l) = logs[l][z];
        }
    }
    return matrix;
}

}  // namespace compresslab
