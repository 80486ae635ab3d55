#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "compresslab/types.hpp"

namespace compresslab {

struct FlopsReport {
    double per_token = 0.0;       // at the first decoded position
    double per_generation = 0.0;  // decode (+ prefill if requested)
    bool includes_prefill = false;
};

struct ModelCost {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    double usd = 0.0;
};

struct LineItem {
    std::string description;
    double usd = 0.0;
};

struct CostReport {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    double usd = 0.0;  // token charges only
    std::map<std::string, ModelCost> per_model;
    std::vector<LineItem> line_items;

    void add_line_item(std::string description, double usd);
    double total_usd() const;  // token charges plus line items
};

inline constexpr double kSearchFeeUsd = 0.12;

/// 2 n_params + 2 n_layer n_ctx d_attn.
double flops_per_token(const ModelSpec& spec, std::int64_t n_ctx);

/// Sum of flops_per_token(spec, P + t) for t < L in closed form. L = 0 gives 0.
double decode_flops(const ModelSpec& spec, std::int64_t prompt_tokens, std::int64_t output_tokens);
/// Sum of flops_per_token(spec, t) for t < P.
double prefill_flops(const ModelSpec& spec, std::int64_t prompt_tokens);

/// Sum of flops_per_token over each decoded position, P + t for t < L, in
/// closed form; with prefill, also every prompt position t < P.
/// Throws std::invalid_argument when trace.output_tokens < 1.
FlopsReport flops_per_generation(const ModelSpec& spec, const GenerationTrace& trace, bool includes_prefill = false);

using PriceLookup = std::function<const ModelSpec*(const std::string& model)>;

/// Throws ConfigError naming the first model without prices.
CostReport dollar_cost(std::span<const GenerationTrace> usages, const PriceLookup& prices);

void to_json(Json& j, const FlopsReport& f);
void to_json(Json& j, const CostReport& c);

}  // namespace compresslab
