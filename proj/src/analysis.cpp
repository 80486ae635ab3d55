#include "compresslab/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

namespace compresslab {

GroupStat summarize(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("cannot summarize an empty group");
    GroupStat g;
    g.n = values.size();
    g.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(g.n);
    if (g.n == 1) {
        g.single = true;
        return g;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - g.mean) * (v - g.mean);
    g.stderr_mean = std::sqrt(ss / static_cast<double>(g.n - 1)) / std::sqrt(static_cast<double>(g.n));
    return g;
}

std::map<std::string, GroupStat> aggregate(std::span<const RunRecord> records, const GroupKey& key,
                                           const RecordValue& value) {
    std::map<std::string, std::vector<double>> groups;
    for (const auto& r : records) {
        if (auto v = value(r)) groups[key(r)].push_back(*v);
    }
    std::map<std::string, GroupStat> out;
    for (auto& [k, vals] : groups) {
        // sort so the float sum does not depend on record order
        std::sort(vals.begin(), vals.end());
        out.emplace(k, summarize(vals));
    }
    return out;
}

std::string seed_key(const RunRecord& r) { return std::to_string(r.seed); }

std::optional<double> correctness(const RunRecord& r) {
    if (!r.judgment) return std::nullopt;
    return *r.judgment ? 1.0 : 0.0;
}

std::optional<double> perplexity_value(const RunRecord& r) { return r.perplexity; }

ZScore zscore_params(std::span<const double> column, const std::string& name) {
    if (column.empty()) throw std::invalid_argument("no rows");
    ZScore z;
    z.mean = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(column.size());
    double ss = 0.0;
    for (double v : column) ss += (v - z.mean) * (v - z.mean);
    z.sd = std::sqrt(ss / static_cast<double>(column.size()));
    if (!(z.sd > 0.0) || z.sd <= 1e-12 * std::max(1.0, std::abs(z.mean))) {
        throw std::invalid_argument("feature '" + name + "' has zero variance");
    }
    return z;
}

std::vector<std::array<double, 7>> design_matrix(std::span<const FeatureRow> rows) {
    const std::size_t n = rows.size();
    std::vector<std::array<double, 7>> x(n);
    std::vector<double> col(n);
    for (std::size_t f = 0; f < kGlmFeatures.size(); ++f) {
        for (std::size_t k = 0; k < n; ++k) col[k] = rows[k].values()[f];
        const auto z = zscore_params(col, kGlmFeatures[f]);
        const bool indicator = f + 1 == kGlmFeatures.size();
        for (std::size_t k = 0; k < n; ++k) {
            x[k][0] = 1.0;
            x[k][f + 1] = indicator ? col[k] : (col[k] - z.mean) / z.sd;
        }
    }
    return x;
}

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, 7>;
using Vec7 = Eigen::Matrix<double, 7, 1>;

// log(1 + exp(t)) without overflow
double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double log_lik(const Mat& x, const Eigen::VectorXd& y, const Vec7& beta) {
    const Eigen::VectorXd eta = x * beta;
    double ll = 0.0;
    for (Eigen::Index k = 0; k < eta.size(); ++k) ll += y[k] * eta[k] - softplus(eta[k]);
    return ll;
}

double sigmoid(double t) { return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

Mat to_eigen(const std::vector<std::array<double, 7>>& rows) {
    Mat x(static_cast<Eigen::Index>(rows.size()), 7);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        for (int c = 0; c < 7; ++c) x(static_cast<Eigen::Index>(k), c) = rows[k][static_cast<std::size_t>(c)];
    }
    return x;
}

}  // namespace

double logistic_log_likelihood(std::span<const FeatureRow> rows, std::span<const double> beta) {
    if (beta.size() != 7) throw std::invalid_argument("expected 7 coefficients");
    const Mat x = to_eigen(design_matrix(rows));
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index k = 0; k < x.rows(); ++k) y[k] = rows[static_cast<std::size_t>(k)].label ? 1.0 : 0.0;
    Vec7 b;
    for (int c = 0; c < 7; ++c) b[c] = beta[static_cast<std::size_t>(c)];
    return log_lik(x, y, b);
}

GLMFit fit_logistic(std::span<const FeatureRow> rows, const GlmOptions& options) {
    if (rows.empty()) throw std::invalid_argument("fit_logistic needs rows");
    const auto positives = std::count_if(rows.begin(), rows.end(), [](const FeatureRow& r) { return r.label; });
    if (positives == 0 || positives == static_cast<long>(rows.size())) {
        throw std::invalid_argument("fit_logistic needs both correct and incorrect labels");
    }
    const Mat x = to_eigen(design_matrix(rows));
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index k = 0; k < x.rows(); ++k) y[k] = rows[static_cast<std::size_t>(k)].label ? 1.0 : 0.0;

    Vec7 ridge = Vec7::Constant(options.ridge);
    ridge[0] = 0.0;
    auto penalised = [&](const Vec7& b) { return log_lik(x, y, b) - 0.5 * (ridge.array() * b.array().square()).sum(); };

    GLMFit fit;
    fit.n_obs = rows.size();
    Vec7 beta = Vec7::Zero();
    double ll = penalised(beta);
    fit.log_likelihood.push_back(ll);

    Eigen::Matrix<double, 7, 7> info;
    for (int it = 1; it <= options.max_iterations; ++it) {
        const Eigen::VectorXd eta = x * beta;
        Eigen::VectorXd mu(eta.size()), w(eta.size());
        for (Eigen::Index k = 0; k < eta.size(); ++k) {
            mu[k] = sigmoid(eta[k]);
            w[k] = mu[k] * (1.0 - mu[k]);
        }
        info = x.transpose() * w.asDiagonal() * x;
        info.diagonal() += ridge;
        const Vec7 grad = x.transpose() * (y - mu) - ridge.cwiseProduct(beta);
        Vec7 step = info.ldlt().solve(grad);
        if (!step.allFinite()) break;

        // halve until the likelihood does not drop
        double cand_ll = penalised(beta + step);
        int halvings = 0;
        while (!(cand_ll >= ll) && halvings < 40) {
            step *= 0.5;
            cand_ll = penalised(beta + step);
            ++halvings;
        }
        if (!(cand_ll >= ll)) break;
        beta += step;
        ll = cand_ll;
        fit.log_likelihood.push_back(ll);
        fit.iterations = it;
        if (step.cwiseAbs().maxCoeff() < options.tolerance) {
            fit.converged = true;
            break;
        }
    }

    // Fisher information at the final estimate
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd w(eta.size());
    double max_gap = 0.0;
    for (Eigen::Index k = 0; k < eta.size(); ++k) {
        const double mu = sigmoid(eta[k]);
        w[k] = mu * (1.0 - mu);
        max_gap = std::max(max_gap, std::abs(mu - y[k]));
    }
    info = x.transpose() * w.asDiagonal() * x;
    info.diagonal() += ridge;
    const Eigen::Matrix<double, 7, 7> cov = info.inverse();
    fit.separation = max_gap < 1e-6 || beta.cwiseAbs().maxCoeff() > 30.0;

    fit.names.emplace_back("intercept");
    for (const char* f : kGlmFeatures) fit.names.emplace_back(f);
    for (int c = 0; c < 7; ++c) {
        const double se = std::sqrt(std::max(cov(c, c), 0.0));
        const double z = se > 0.0 ? beta[c] / se : 0.0;
        const double p = std::erfc(std::abs(z) / std::sqrt(2.0));
        fit.coefficients.push_back(beta[c]);
        fit.stderrs.push_back(se);
        fit.ci95_low.push_back(beta[c] - 1.96 * se);
        fit.ci95_high.push_back(beta[c] + 1.96 * se);
        fit.p_values.push_back(p);
        fit.significant.push_back(p < 0.05);
    }
    return fit;
}

std::vector<FeatureRow> feature_rows(std::span<const RunRecord> records, const ModelSpec& compressor,
                                     const ModelSpec& predictor, const std::string& indicator_family) {
    auto lower = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        return s;
    };
    const double family = lower(compressor.family) == lower(indicator_family) ? 1.0 : 0.0;
    std::vector<FeatureRow> rows;
    for (const auto& r : records) {
        if (!r.judgment) continue;
        FeatureRow row;
        row.doc_len = r.usage.empty() ? 0.0 : static_cast<double>(r.usage[0].prompt_tokens);
        row.pred_len = r.usage.size() > 1 ? static_cast<double>(r.usage[1].output_tokens) : 0.0;
        row.comp_len = static_cast<double>(r.output_tokens);
        row.pred_size = static_cast<double>(predictor.n_params);
        row.comp_size = static_cast<double>(compressor.n_params);
        row.comp_family = family;
        row.label = *r.judgment;
        rows.push_back(row);
    }
    return rows;
}

void write_coefficients_csv(std::ostream& out, const GLMFit& fit) {
    out.precision(12);
    out << "feature,coefficient,stderr,ci95_low,ci95_high,p_value,significant\n";
    for (std::size_t c = 0; c < fit.names.size(); ++c) {
        out << fit.names[c] << ',' << fit.coefficients[c] << ',' << fit.stderrs[c] << ',' << fit.ci95_low[c] << ','
            << fit.ci95_high[c] << ',' << fit.p_values[c] << ',' << (fit.significant[c] ? "true" : "false") << '\n';
    }
}

void to_json(Json& j, const GLMFit& fit) {
    Json coefs = Json::array();
    for (std::size_t c = 0; c < fit.names.size(); ++c) {
        coefs.push_back(Json{{"feature", fit.names[c]},
                             {"coefficient", fit.coefficients[c]},
                             {"stderr", fit.stderrs[c]},
                             {"ci95_low", fit.ci95_low[c]},
                             {"ci95_high", fit.ci95_high[c]},
                             {"p_value", fit.p_values[c]},
                             {"significant", static_cast<bool>(fit.significant[c])}});
    }
    j = Json{{"coefficients", coefs},   {"converged", fit.converged}, {"separation", fit.separation},
             {"iterations", fit.iterations}, {"n_obs", fit.n_obs},     {"log_likelihood", fit.log_likelihood}};
}

void to_json(Json& j, const GroupStat& g) {
    j = Json{{"mean", g.mean}, {"stderr", g.stderr_mean}, {"n", g.n}};
}

}  // namespace compresslab
