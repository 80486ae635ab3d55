#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "compresslab/types.hpp"

namespace compresslab {

struct RatePoint {
    double rate = 0.0;        // bits per output token
    double distortion = 0.0;  // in [0, 1]
    std::string label;
    double stderr_d = 0.0;
};

/// D(R) = c * exp(-b R) + d0.
struct DecayFit {
    double c = 0.0;
    double b = 0.0;
    double d0 = 0.0;
    double rss = 0.0;
    std::size_t n_points = 0;
    bool converged = true;  // false: best-so-far after the iteration cap

    double operator()(double rate) const;
};

struct GaussianSource {
    double variance = 1.0;
};

struct FitOptions {
    bool weighted = false;  // weight residuals by 1/stderr_d^2 (zero stderrs are ignored)
    int max_iterations = 200;
    double step_tolerance = 1e-8;
};

/// 1 - fraction correct. Throws std::invalid_argument when empty.
double accuracy_distortion(std::span<const bool> judgments);
double accuracy_distortion(const std::vector<bool>& judgments);

/// 1 - cosine similarity, clamped to [0, 2].
/// Throws std::invalid_argument on a dimension mismatch or zero vector.
double cosine_distortion(std::span<const double> a, std::span<const double> b);

/// sigma^2 * 2^(-2R).
double gaussian_reference(const GaussianSource& src, double rate_bits);

/// Box-constrained least squares (c >= 0, b >= 0, 0 <= d0 <= 1) by damped
/// Gauss-Newton from several starting decay rates. Flat data, or any data the
/// decay cannot fit better than a constant, yields c = 0, b = 0, d0 = mean.
/// Throws std::invalid_argument with < 3 points or < 2 distinct rates.
DecayFit fit_decay(std::vector<RatePoint> points, const FitOptions& options = {});

/// Columns: rate,distortion,label,stderr_d (label and stderr_d optional on read).
std::vector<RatePoint> read_points_csv(const std::filesystem::path& path);
void write_points_csv(std::ostream& out, std::span<const RatePoint> points);
/// Columns: rate,distortion,fitted_distortion,label.
void write_fit_csv(std::ostream& out, std::span<const RatePoint> points, const DecayFit& fit);

void to_json(Json& j, const DecayFit& f);

}  // namespace compresslab
