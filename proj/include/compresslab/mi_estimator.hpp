#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "compresslab/inference.hpp"
#include "compresslab/types.hpp"

namespace compresslab {

/// logp(i, j, l) = log p(z_ij | x_l, q_i) in nats: sample j of context i,
/// scored under context l with record i's query.
class ScoreMatrix {
public:
    ScoreMatrix() = default;
    ScoreMatrix(std::size_t n, std::size_t m, double fill = 0.0);

    std::size_t n() const noexcept { return n_; }
    std::size_t m() const noexcept { return m_; }

    double& at(std::size_t i, std::size_t j, std::size_t l) { return data_[index(i, j, l)]; }
    double at(std::size_t i, std::size_t j, std::size_t l) const { return data_[index(i, j, l)]; }

    /// The N scores of sample (i, j) across all contexts l.
    std::span<const double> row(std::size_t i, std::size_t j) const {
        return {data_.data() + index(i, j, 0), n_};
    }
    std::span<double> row(std::size_t i, std::size_t j) { return {data_.data() + index(i, j, 0), n_}; }

    /// Throws std::invalid_argument on n < 2, m < 1, or a non-finite entry
    /// (the message names i, j, l).
    void validate() const;

private:
    std::size_t index(std::size_t i, std::size_t j, std::size_t l) const { return (i * m_ + j) * n_ + l; }

    std::size_t n_ = 0;
    std::size_t m_ = 0;
    std::vector<double> data_;
};

struct MIEstimate {
    double value_nats = 0.0;  // max(raw_nats, 0)
    double raw_nats = 0.0;
    std::size_t n = 0;
    std::size_t m = 0;
    double bound_nats = 0.0;       // ln n
    std::vector<double> per_term;  // n*m bracketed terms, (i, j) row-major, unclipped
};

struct RateValue {
    double bits_per_token = 0.0;
    double mi_nats = 0.0;
    double mean_output_tokens = 0.0;
};

/// One bracketed estimator term for a sample drawn from context `own`:
/// logp[own] - logsumexp(logp) + ln N.
double estimator_term(std::span<const double> logp_over_contexts, std::size_t own);

/// Numerically stable log(sum(exp(x))).
double log_sum_exp(std::span<const double> x);

/// Monte Carlo estimate of I(X; Z | Q). Clipping to zero is applied to the
/// aggregate only; per-term values keep their sign.
MIEstimate estimate_mi(const ScoreMatrix& matrix);

/// Rate R = (MI in bits) / mean compressor output length.
/// Throws std::invalid_argument on empty lengths or any length < 1.
RateValue bit_efficiency(const MIEstimate& mi, std::span<const std::int64_t> lengths);

/// Builds the prompt under which a sample is scored, from the record that
/// supplies the context (x_l) and the record that supplies the query (q_i).
using ScoringPromptFn = std::function<std::string(const QARecord& context_record, const QARecord& query_record)>;

/// Scores every sample of every record against every record's context.
/// Identical (model, prompt, completion) calls are issued once. Any scoring
/// failure aborts the whole matrix.
ScoreMatrix build_score_matrix(std::span<const QARecord> records,
                               const std::vector<std::vector<CompressionSample>>& samples,
                               const std::string& proxy_model, LmClient& scorer, const ScoringPromptFn& prompt_for,
                               std::size_t max_concurrency, std::size_t* unique_calls = nullptr);

/// JSONL cache: a header line {"n":..,"m":..} then one {"i","j","l","logp"}
/// object per entry.
void write_matrix_cache(const std::filesystem::path& path, const ScoreMatrix& matrix);
ScoreMatrix read_matrix_cache(const std::filesystem::path& path);

void to_json(Json& j, const MIEstimate& e);

}  // namespace compresslab
