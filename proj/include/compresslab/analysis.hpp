#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "compresslab/run_record.hpp"
#include "compresslab/types.hpp"

namespace compresslab {

struct GroupStat {
    double mean = 0.0;
    double stderr_mean = 0.0;  // sample standard deviation / sqrt(n)
    std::size_t n = 0;
    bool single = false;  // n == 1, stderr reported as 0
};

/// Throws std::invalid_argument on an empty sample.
GroupStat summarize(std::span<const double> values);

using GroupKey = std::function<std::string(const RunRecord&)>;
using RecordValue = std::function<std::optional<double>(const RunRecord&)>;

/// Groups records by `key` and summarizes `value` per group; records whose
/// value is empty are skipped.
std::map<std::string, GroupStat> aggregate(std::span<const RunRecord> records, const GroupKey& key,
                                           const RecordValue& value);

std::string seed_key(const RunRecord& r);
/// 1 for a correct judgment, 0 otherwise (failed predictions included).
std::optional<double> correctness(const RunRecord& r);
std::optional<double> perplexity_value(const RunRecord& r);

inline constexpr std::array<const char*, 6> kGlmFeatures{"doc_len", "pred_len", "comp_len",
                                                         "pred_size", "comp_size", "comp_family"};

/// Raw (un-normalised) predictors of one prediction's correctness.
struct FeatureRow {
    double doc_len = 0.0;
    double pred_len = 0.0;
    double comp_len = 0.0;
    double pred_size = 0.0;
    double comp_size = 0.0;
    double comp_family = 0.0;  // 0 or 1, not normalised
    bool label = false;

    std::array<double, 6> values() const { return {doc_len, pred_len, comp_len, pred_size, comp_size, comp_family}; }
};

struct GlmOptions {
    double ridge = 0.0;  // added to the diagonal of the Fisher information (intercept excluded)
    int max_iterations = 100;
    double tolerance = 1e-10;
};

struct GLMFit {
    std::vector<std::string> names;  // "intercept" then kGlmFeatures
    std::vector<double> coefficients;
    std::vector<double> stderrs;
    std::vector<double> ci95_low;
    std::vector<double> ci95_high;
    std::vector<double> p_values;
    std::vector<bool> significant;  // p < 0.05
    bool converged = false;
    bool separation = false;  // fitted probabilities collapsed onto the labels
    int iterations = 0;
    std::size_t n_obs = 0;
    std::vector<double> log_likelihood;  // after each accepted iteration, starting at beta = 0
};

/// Column-wise standardisation with the population standard deviation.
/// Throws std::invalid_argument naming a zero-variance column.
struct ZScore {
    double mean = 0.0;
    double sd = 1.0;
};
ZScore zscore_params(std::span<const double> column, const std::string& name);

/// Design matrix rows: 1, z-scored continuous features, raw indicator.
std::vector<std::array<double, 7>> design_matrix(std::span<const FeatureRow> rows);

/// Logistic regression with intercept by iteratively reweighted least
/// squares with step halving. Throws std::invalid_argument when all labels
/// agree or a feature column is constant.
GLMFit fit_logistic(std::span<const FeatureRow> rows, const GlmOptions& options = {});

/// Bernoulli log-likelihood of `beta` on the design matrix of `rows`.
double logistic_log_likelihood(std::span<const FeatureRow> rows, std::span<const double> beta);

/// Features for judged records of one run. doc_len is the compressor prompt
/// length; usage entries are ordered compressor, predictor, judge.
std::vector<FeatureRow> feature_rows(std::span<const RunRecord> records, const ModelSpec& compressor,
                                     const ModelSpec& predictor, const std::string& indicator_family);

/// Columns: feature,coefficient,stderr,ci95_low,ci95_high,p_value,significant.
void write_coefficients_csv(std::ostream& out, const GLMFit& fit);
void to_json(Json& j, const GLMFit& fit);
void to_json(Json& j, const GroupStat& g);

}  // namespace compresslab
