#include "compresslab/types.hpp"

#include <cmath>

#include "compresslab/errors.hpp"

namespace compresslab {

void ModelSpec::validate() const {
    if (name.empty()) throw ConfigError("name", "model name must be non-empty");
    if (n_params <= 0) throw ConfigError(name + ".n_params", "must be > 0");
    if (n_layer <= 0) throw ConfigError(name + ".n_layer", "must be > 0");
    if (d_attn <= 0) throw ConfigError(name + ".d_attn", "must be > 0");
    if (!(price_in >= 0.0) || !std::isfinite(price_in)) throw ConfigError(name + ".price_in", "must be >= 0");
    if (!(price_out >= 0.0) || !std::isfinite(price_out)) throw ConfigError(name + ".price_out", "must be >= 0");
}

void to_json(Json& j, const QARecord& r) {
    j = Json{{"id", r.id}, {"context", r.context}, {"query", r.query}, {"gold_answer", r.gold_answer}};
    if (!r.source_tag.empty()) j["source_tag"] = r.source_tag;
}

void to_json(Json& j, const GenerationTrace& t) {
    j = Json{{"model", t.model_name}, {"prompt_tokens", t.prompt_tokens}, {"output_tokens", t.output_tokens}};
}

void from_json(const Json& j, GenerationTrace& t) {
    t.model_name = j.at("model").get<std::string>();
    t.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
    t.output_tokens = j.at("output_tokens").get<std::int64_t>();
}

void to_json(Json& j, const ModelSpec& m) {
    j = Json{{"name", m.name},       {"family", m.family},     {"n_params", m.n_params}, {"n_layer", m.n_layer},
             {"d_attn", m.d_attn},   {"price_in", m.price_in}, {"price_out", m.price_out}};
}

ModelSpec model_spec_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("model", "model spec must be an object");
    ModelSpec m;
    auto field = [&](const char* key) -> const Json& {
        auto it = j.find(key);
        if (it == j.end()) {
            const std::string owner = j.contains("name") && j["name"].is_string() ? j["name"].get<std::string>() : "model";
            throw ConfigError(owner + "." + key, "missing");
        }
        return *it;
    };
    try {
        m.name = field("name").get<std::string>();
        m.family = j.value("family", std::string{});
        m.n_params = field("n_params").get<std::int64_t>();
        m.n_layer = field("n_layer").get<std::int64_t>();
        m.d_attn = field("d_attn").get<std::int64_t>();
        m.price_in = j.value("price_in", 0.0);
        m.price_out = j.value("price_out", 0.0);
    } catch (const Json::type_error& e) {
        throw ConfigError(m.name.empty() ? "model" : m.name, e.what());
    }
    m.validate();
    return m;
}

}  // namespace compresslab
