#pragma once

#include <cstddef>
#include <vector>

#include "compresslab/mi_estimator.hpp"
#include "compresslab/rng.hpp"
#include "compresslab/types.hpp"

namespace compresslab {

/// A discrete channel p(z|x) over N contexts and an alphabet of |Z| symbols.
/// The prior over contexts is uniform.
class DiscreteChannel {
public:
    /// Throws std::invalid_argument unless n >= 2, rows are equally long,
    /// entries are >= 0 and each row sums to 1 within 1e-12.
    explicit DiscreteChannel(std::vector<std::vector<double>> cond);

    std::size_t n_contexts() const noexcept { return cond_.size(); }
    std::size_t alphabet_size() const noexcept { return cond_.front().size(); }
    double p(std::size_t x, std::size_t z) const { return cond_[x][z]; }
    const std::vector<std::vector<double>>& cond() const noexcept { return cond_; }

    /// Rows drawn from a flat Dirichlet, renormalised exactly.
    static DiscreteChannel random(std::size_t n, std::size_t alphabet, RngStream& rng);
    /// Two contexts, two symbols, each flipped with probability `flip`.
    static DiscreteChannel binary_symmetric(double flip);
    /// Context x always emits symbol x.
    static DiscreteChannel deterministic(std::size_t n);
    /// Every context shares the same output distribution.
    static DiscreteChannel independent(std::size_t n, std::vector<double> row);

private:
    std::vector<std::vector<double>> cond_;
};

void to_json(Json& j, const DiscreteChannel& ch);
DiscreteChannel channel_from_json(const Json& j);

/// I(X;Z) under the uniform prior, in nats, via the KL form.
double exact_mi(const DiscreteChannel& ch);

/// The estimator's expectation, computed by enumerating every (x_i, z) with
/// weight p(z|x_i)/N and applying the estimator's own per-sample term.
double estimator_expectation(const DiscreteChannel& ch);

/// Draws m symbols per context and fills logp(i, j, l) = ln p(z_ij | x_l).
/// Zero probabilities become ln(1e-300).
ScoreMatrix sample_channel(const DiscreteChannel& ch, std::size_t m, RngStream& rng);

inline constexpr double kLogFloor = -690.7755278982137;  // ln(1e-300)

}  // namespace compresslab
