#include "compresslab/cost_model.hpp"

#include <stdexcept>

#include "compresslab/errors.hpp"

namespace compresslab {

void CostReport::add_line_item(std::string description, double amount) {
    line_items.push_back({std::move(description), amount});
}

double CostReport::total_usd() const {
    double total = usd;
    for (const auto& item : line_items) total += item.usd;
    return total;
}

double flops_per_token(const ModelSpec& spec, std::int64_t n_ctx) {
    if (n_ctx < 0) throw std::invalid_argument("n_ctx must be >= 0");
    return 2.0 * static_cast<double>(spec.n_params) +
           2.0 * static_cast<double>(spec.n_layer) * static_cast<double>(n_ctx) * static_cast<double>(spec.d_attn);
}

double decode_flops(const ModelSpec& spec, std::int64_t prompt_tokens, std::int64_t output_tokens) {
    if (prompt_tokens < 0 || output_tokens < 0) throw std::invalid_argument("token counts must be >= 0");
    const double p = static_cast<double>(prompt_tokens);
    const double l = static_cast<double>(output_tokens);
    const double attn = static_cast<double>(spec.n_layer) * static_cast<double>(spec.d_attn);
    return 2.0 * static_cast<double>(spec.n_params) * l + 2.0 * attn * (l * p + l * (l - 1.0) / 2.0);
}

double prefill_flops(const ModelSpec& spec, std::int64_t prompt_tokens) {
    // positions 0..P-1 of the prompt, i.e. decode_flops from an empty context
    return decode_flops(spec, 0, prompt_tokens);
}

FlopsReport flops_per_generation(const ModelSpec& spec, const GenerationTrace& trace, bool includes_prefill) {
    if (trace.output_tokens < 1) throw std::invalid_argument("flops_per_generation needs output_tokens >= 1");
    if (trace.prompt_tokens < 0) throw std::invalid_argument("prompt_tokens must be >= 0");
    FlopsReport r;
    r.includes_prefill = includes_prefill;
    r.per_token = flops_per_token(spec, trace.prompt_tokens);
    r.per_generation = decode_flops(spec, trace.prompt_tokens, trace.output_tokens);
    if (includes_prefill) r.per_generation += prefill_flops(spec, trace.prompt_tokens);
    return r;
}

CostReport dollar_cost(std::span<const GenerationTrace> usages, const PriceLookup& prices) {
    CostReport report;
    for (const auto& u : usages) {
        const ModelSpec* spec = prices ? prices(u.model_name) : nullptr;
        if (!spec) throw ConfigError("models", "no prices for model '" + u.model_name + "'");
        auto& m = report.per_model[u.model_name];
        m.input_tokens += u.prompt_tokens;
        m.output_tokens += u.output_tokens;
        report.input_tokens += u.prompt_tokens;
        report.output_tokens += u.output_tokens;
    }
    // Price once per model so the total does not depend on call order.
    for (auto& [name, m] : report.per_model) {
        const ModelSpec* spec = prices(name);
        m.usd = (static_cast<double>(m.input_tokens) * spec->price_in +
                 static_cast<double>(m.output_tokens) * spec->price_out) /
                1e6;
        report.usd += m.usd;
    }
    return report;
}

void to_json(Json& j, const FlopsReport& f) {
    j = Json{{"per_token", f.per_token}, {"per_generation", f.per_generation}, {"includes_prefill", f.includes_prefill}};
}

void to_json(Json& j, const CostReport& c) {
    Json per_model = Json::object();
    for (const auto& [name, m] : c.per_model) {
        per_model[name] = Json{{"input_tokens", m.input_tokens}, {"output_tokens", m.output_tokens}, {"usd", m.usd}};
    }
    Json items = Json::array();
    for (const auto& item : c.line_items) items.push_back(Json{{"description", item.description}, {"usd", item.usd}});
    j = Json{{"input_tokens", c.input_tokens}, {"output_tokens", c.output_tokens}, {"token_usd", c.usd},
             {"per_model", per_model},         {"line_items", items},              {"total_usd", c.total_usd()}};
}

}  // namespace compresslab
