#include "compresslab/mi_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string_view>

#include "compresslab/concurrency.hpp"
#include "compresslab/errors.hpp"

namespace compresslab {

ScoreMatrix::ScoreMatrix(std::size_t n, std::size_t m, double fill) : n_(n), m_(m), data_(n * m * n, fill) {}

void ScoreMatrix::validate() const {
    if (n_ < 2) throw std::invalid_argument("score matrix needs n >= 2 contexts");
    if (m_ < 1) throw std::invalid_argument("score matrix needs m >= 1 samples");
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < m_; ++j) {
            for (std::size_t l = 0; l < n_; ++l) {
                if (!std::isfinite(at(i, j, l))) {
                    throw std::invalid_argument("non-finite score at (i=" + std::to_string(i) + ", j=" +
                                                std::to_string(j) + ", l=" + std::to_string(l) + ")");
                }
            }
        }
    }
}

double log_sum_exp(std::span<const double> x) {
    if (x.empty()) return -std::numeric_limits<double>::infinity();
    const double hi = *std::max_element(x.begin(), x.end());
    double acc = 0.0;
    for (double v : x) acc += std::exp(v - hi);
    return hi + std::log(acc);
}

double estimator_term(std::span<const double> logp_over_contexts, std::size_t own) {
    const double n = static_cast<double>(logp_over_contexts.size());
    // Shifted by the max: both parts are <= 0, so the term never exceeds ln N,
    // and equal scores give exactly ln N - ln N = 0.
    const double hi = *std::max_element(logp_over_contexts.begin(), logp_over_contexts.end());
    double acc = 0.0;
    for (double v : logp_over_contexts) acc += std::exp(v - hi);
    return (logp_over_contexts[own] - hi) - std::log(acc) + std::log(n);
}

MIEstimate estimate_mi(const ScoreMatrix& matrix) {
    matrix.validate();
    MIEstimate e;
    e.n = matrix.n();
    e.m = matrix.m();
    e.bound_nats = std::log(static_cast<double>(e.n));
    e.per_term.reserve(e.n * e.m);
    double total = 0.0;
    for (std::size_t i = 0; i < e.n; ++i) {
        for (std::size_t j = 0; j < e.m; ++j) {
            const double term = estimator_term(matrix.row(i, j), i);
            e.per_term.push_back(term);
            total += term;
        }
    }
    e.raw_nats = total / static_cast<double>(e.n * e.m);
    e.value_nats = std::max(e.raw_nats, 0.0);
    return e;
}

RateValue bit_efficiency(const MIEstimate& mi, std::span<const std::int64_t> lengths) {
    if (lengths.empty()) throw std::invalid_argument("bit_efficiency needs at least one output length");
    if (std::any_of(lengths.begin(), lengths.end(), [](std::int64_t v) { return v < 1; })) {
        throw std::invalid_argument("output lengths must all be >= 1");
    }
    RateValue r;
    r.mi_nats = mi.value_nats;
    r.mean_output_tokens = static_cast<double>(std::accumulate(lengths.begin(), lengths.end(), std::int64_t{0})) /
                           static_cast<double>(lengths.size());
    r.bits_per_token = (r.mi_nats / std::log(2.0)) / r.mean_output_tokens;
    return r;
}

ScoreMatrix build_score_matrix(std::span<const QARecord> records,
                               const std::vector<std::vector<CompressionSample>>& samples,
                               const std::string& proxy_model, LmClient& scorer, const ScoringPromptFn& prompt_for,
                               std::size_t max_concurrency, std::size_t* unique_calls) {
    const std::size_t n = records.size();
    if (n < 2) throw std::invalid_argument("build_score_matrix needs at least 2 records");
    if (samples.size() != n) throw std::invalid_argument("one sample list per record is required");
    const std::size_t m = samples.front().size();
    if (m < 1) throw std::invalid_argument("each record needs at least one sample");
    for (const auto& s : samples) {
        if (s.size() != m) throw std::invalid_argument("all records must have the same number of samples");
    }

    // Prompt text per (query record i, context record l); shared by every j.
    std::vector<std::string> prompts(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < n; ++l) prompts[i * n + l] = prompt_for(records[l], records[i]);
    }

    // (prompt index, flat sample index) of the first cell needing each unique call
    std::vector<std::pair<std::size_t, std::size_t>> calls;
    std::vector<std::size_t> cell_call(n * m * n);

    std::map<std::pair<std::string_view, std::string_view>, std::size_t> seen;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const auto& z = samples[i][j].text;
            if (z.empty()) throw std::invalid_argument("cannot score an empty compression (record " + records[i].id + ")");
            for (std::size_t l = 0; l < n; ++l) {
                const auto& prompt = prompts[i * n + l];
                auto [it, inserted] = seen.emplace(std::pair<std::string_view, std::string_view>(prompt, z), calls.size());
                if (inserted) calls.emplace_back(i * n + l, i * m + j);
                cell_call[(i * m + j) * n + l] = it->second;
            }
        }
    }
    if (unique_calls) *unique_calls = calls.size();

    const auto sums = parallel_map<double>(calls.size(), max_concurrency, [&](std::size_t k) {
        const auto [p, s] = calls[k];
        return scorer.score_completion(proxy_model, prompts[p], samples[s / m][s % m].text).sum;
    });

    ScoreMatrix matrix(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t l = 0; l < n; ++l) matrix.at(i, j, l) = sums[cell_call[(i * m + j) * n + l]];
        }
    }
    return matrix;
}

void write_matrix_cache(const std::filesystem::path& path, const ScoreMatrix& matrix) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write matrix cache " + path.string());
    out << Json{{"n", matrix.n()}, {"m", matrix.m()}}.dump() << '\n';
    for (std::size_t i = 0; i < matrix.n(); ++i) {
        for (std::size_t j = 0; j < matrix.m(); ++j) {
            for (std::size_t l = 0; l < matrix.n(); ++l) {
                out << Json{{"i", i}, {"j", j}, {"l", l}, {"logp", matrix.at(i, j, l)}}.dump() << '\n';
            }
        }
    }
}

ScoreMatrix read_matrix_cache(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open matrix cache " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DatasetError(1, "empty matrix cache");
    const auto header = Json::parse(line);
    const auto n = header.at("n").get<std::size_t>();
    const auto m = header.at("m").get<std::size_t>();
    ScoreMatrix matrix(n, m, std::numeric_limits<double>::quiet_NaN());
    std::size_t line_no = 1;
    std::size_t filled = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto e = Json::parse(line);
            const auto i = e.at("i").get<std::size_t>();
            const auto j = e.at("j").get<std::size_t>();
            const auto l = e.at("l").get<std::size_t>();
            if (i >= n || j >= m || l >= n) throw DatasetError(line_no, "index out of range");
            matrix.at(i, j, l) = e.at("logp").get<double>();
            ++filled;
        } catch (const Json::exception& ex) {
            throw DatasetError(line_no, ex.what());
        }
    }
    if (filled != n * m * n) throw DatasetError(0, "matrix cache is incomplete");
    return matrix;
}

void to_json(Json& j, const MIEstimate& e) {
    j = Json{{"value_nats", e.value_nats}, {"raw_nats", e.raw_nats}, {"n", e.n},
             {"m", e.m},                   {"bound_nats", e.bound_nats}, {"per_term", e.per_term}};
}

}  // namespace compresslab
