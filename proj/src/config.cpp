#include "compresslab/config.hpp"

#include <cmath>
#include <fstream>

#include "compresslab/errors.hpp"

namespace compresslab {

std::string_view to_string(Conciseness c) {
    switch (c) {
        case Conciseness::concise3: return "concise3";
        case Conciseness::normal6: return "normal6";
        case Conciseness::elaborate9: return "elaborate9";
        case Conciseness::unconstrained: return "unconstrained";
    }
    return "unconstrained";
}

Conciseness parse_conciseness(std::string_view s) {
    if (s == "concise3") return Conciseness::concise3;
    if (s == "normal6") return Conciseness::normal6;
    if (s == "elaborate9") return Conciseness::elaborate9;
    if (s == "unconstrained") return Conciseness::unconstrained;
    throw ConfigError("conciseness", "expected concise3|normal6|elaborate9|unconstrained, got '" + std::string(s) + "'");
}

std::string_view to_string(EvalMode m) { return m == EvalMode::judge ? "judge" : "perplexity"; }

ModelRegistry::ModelRegistry(std::vector<ModelSpec> specs) {
    for (auto& s : specs) put(std::move(s));
}

ModelRegistry ModelRegistry::from_json(const Json& array) {
    if (!array.is_array()) throw ConfigError("models", "model registry must be a JSON array");
    ModelRegistry reg;
    for (const auto& item : array) reg.put(model_spec_from_json(item));
    return reg;
}

ModelRegistry ModelRegistry::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("registry", "cannot open model registry " + path.string());
    try {
        return from_json(Json::parse(in));
    } catch (const Json::parse_error& e) {
        throw ConfigError("registry", std::string("invalid JSON: ") + e.what());
    }
}

void ModelRegistry::put(ModelSpec spec) {
    spec.validate();
    auto name = spec.name;
    specs_.insert_or_assign(std::move(name), std::move(spec));
}

const ModelSpec* ModelRegistry::find(const std::string& name) const {
    auto it = specs_.find(name);
    return it == specs_.end() ? nullptr : &it->second;
}

const ModelSpec& ModelRegistry::at(const std::string& name) const {
    if (const auto* s = find(name)) return *s;
    throw ConfigError("models", "unknown model '" + name + "'");
}

namespace {

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const Json::type_error&) {
        throw ConfigError(key, "has the wrong type");
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative()) path = base / path;
    return path.lexically_normal();
}

}  // namespace

ModelSpec resolve_model(const Json& j, const char* role, const ModelRegistry& reg) {
    auto it = j.find(role);
    if (it == j.end()) throw ConfigError(role, "missing");
    if (it->is_string()) {
        const auto name = it->get<std::string>();
        if (const auto* s = reg.find(name)) return *s;
        throw ConfigError(role, "unknown model '" + name + "'");
    }
    if (it->is_object()) {
        try {
            return model_spec_from_json(*it);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(role) + "." + e.field(), e.what());
        }
    }
    throw ConfigError(role, "must be a model name or a model spec object");
}

EndpointConfig parse_endpoint(const Json& j, const std::string& field) {
    if (!j.is_object()) throw ConfigError(field, "endpoint must be an object");
    EndpointConfig e;
    try {
        e.kind = j.value("kind", e.kind);
        e.base_url = j.value("base_url", e.base_url);
        e.api_key_env = j.value("api_key_env", e.api_key_env);
        e.remote_model = j.value("remote_model", e.remote_model);
        e.supports_scoring = j.value("supports_scoring", e.supports_scoring);
        e.timeout_s = j.value("timeout_s", e.timeout_s);
    } catch (const Json::type_error& ex) {
        throw ConfigError(field, ex.what());
    }
    if (e.kind != "http" && e.kind != "simulated") {
        throw ConfigError(field + ".kind", "expected 'http' or 'simulated', got '" + e.kind + "'");
    }
    if (!(e.timeout_s > 0.0)) throw ConfigError(field + ".timeout_s", "must be > 0");
    return e;
}

ModelRegistry registry_from_config(const Json& j, const std::filesystem::path& base_dir) {
    ModelRegistry reg;
    if (auto it = j.find("registry"); it != j.end()) {
        if (!it->is_string()) throw ConfigError("registry", "must be a path");
        reg = ModelRegistry::load(resolve(base_dir, it->get<std::string>()));
    }
    if (auto it = j.find("models"); it != j.end()) {
        const auto inline_models = ModelRegistry::from_json(*it);
        for (const auto& m : inline_models.all()) reg.put(m.second);
    }
    return reg;
}

void parse_endpoints(const Json& j, std::map<std::string, EndpointConfig>& endpoints, EndpointConfig& fallback) {
    auto it = j.find("endpoints");
    if (it == j.end()) return;
    if (!it->is_object()) throw ConfigError("endpoints", "must be an object keyed by model name");
    for (const auto& [model, ep] : it->items()) {
        if (model == "default") {
            fallback = parse_endpoint(ep, "endpoints.default");
        } else {
            endpoints[model] = parse_endpoint(ep, "endpoints." + model);
        }
    }
}

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) { return resolve(base, p); }

RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    RunConfig c;

    c.registry = registry_from_config(j, base_dir);

    c.name = get_or<std::string>(j, "name", c.name);
    const auto dataset = get_or<std::string>(j, "dataset_path", "");
    if (dataset.empty()) throw ConfigError("dataset_path", "missing");
    c.dataset_path = resolve(base_dir, dataset);

    c.compressor = resolve_model(j, "compressor", c.registry);
    c.predictor = resolve_model(j, "predictor", c.registry);
    c.proxy = j.contains("proxy") ? resolve_model(j, "proxy", c.registry) : c.compressor;
    c.judge = resolve_model(j, "judge", c.registry);
    for (const auto* m : {&c.compressor, &c.predictor, &c.proxy, &c.judge}) c.registry.put(*m);

    const auto n_docs = get_or<std::int64_t>(j, "n_documents", static_cast<std::int64_t>(c.n_documents));
    const auto m_samp = get_or<std::int64_t>(j, "m_samples", static_cast<std::int64_t>(c.m_samples));
    if (n_docs < 2) throw ConfigError("n_documents", "must be >= 2");
    if (m_samp < 1) throw ConfigError("m_samples", "must be >= 1");
    c.n_documents = static_cast<std::size_t>(n_docs);
    c.m_samples = static_cast<std::size_t>(m_samp);
    c.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", c.seeds);

    if (auto it = j.find("temperatures"); it != j.end()) {
        if (!it->is_object()) throw ConfigError("temperatures", "must be an object");
        c.temperatures.compressor = get_or<double>(*it, "compressor", c.temperatures.compressor);
        c.temperatures.predictor = get_or<double>(*it, "predictor", c.temperatures.predictor);
        c.temperatures.judge = get_or<double>(*it, "judge", c.temperatures.judge);
    }
    c.max_output_tokens = get_or<std::int64_t>(j, "max_output_tokens", c.max_output_tokens);
    c.predictor_max_tokens = get_or<std::int64_t>(j, "predictor_max_tokens", c.predictor_max_tokens);
    const auto conc = get_or<std::int64_t>(j, "max_concurrency", static_cast<std::int64_t>(c.max_concurrency));
    if (conc < 1) throw ConfigError("max_concurrency", "must be >= 1");
    c.max_concurrency = static_cast<std::size_t>(conc);
    c.conciseness = parse_conciseness(get_or<std::string>(j, "conciseness", "unconstrained"));

    const auto mode = get_or<std::string>(j, "eval_mode", "judge");
    if (mode == "judge") {
        c.eval_mode = EvalMode::judge;
    } else if (mode == "perplexity") {
        c.eval_mode = EvalMode::perplexity;
    } else {
        throw ConfigError("eval_mode", "expected 'judge' or 'perplexity'");
    }
    c.compress_template = get_or<std::string>(j, "compress_template", c.compress_template);
    c.predict_template = get_or<std::string>(j, "predict_template", c.predict_template);
    c.score_mi = get_or<bool>(j, "score_mi", c.score_mi);

    parse_endpoints(j, c.endpoints, c.default_endpoint);
    c.validate();
    return c;
}

void RunConfig::validate() const {
    if (n_documents < 2) throw ConfigError("n_documents", "must be >= 2");
    if (m_samples < 1) throw ConfigError("m_samples", "must be >= 1");
    if (seeds.empty()) throw ConfigError("seeds", "must be non-empty");
    if (max_output_tokens < 1) throw ConfigError("max_output_tokens", "must be >= 1");
    if (predictor_max_tokens < 1) throw ConfigError("predictor_max_tokens", "must be >= 1");
    if (max_concurrency < 1) throw ConfigError("max_concurrency", "must be >= 1");
    for (auto [name, t] : {std::pair{"temperatures.compressor", temperatures.compressor},
                           std::pair{"temperatures.predictor", temperatures.predictor},
                           std::pair{"temperatures.judge", temperatures.judge}}) {
        if (!std::isfinite(t) || t < 0.0) throw ConfigError(name, "must be finite and >= 0");
    }
    if (compress_template != "query_specific" && compress_template != "memory" &&
        compress_template != "query_agnostic") {
        throw ConfigError("compress_template", "expected query_specific|memory|query_agnostic");
    }
    if (predict_template != "base" && predict_template != "memory") {
        throw ConfigError("predict_template", "expected base|memory");
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open config file " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
    }
    auto base = path.parent_path();
    if (base.empty()) base = ".";
    return parse_run_config(j, std::filesystem::absolute(base));
}

namespace {
Json endpoint_json(const EndpointConfig& e) {
    return Json{{"kind", e.kind},
                {"base_url", e.base_url},
                {"api_key_env", e.api_key_env},
                {"remote_model", e.remote_model},
                {"supports_scoring", e.supports_scoring},
                {"timeout_s", e.timeout_s}};
}
}  // namespace

Json to_json(const RunConfig& c) {
    Json models = Json::array();
    for (const auto& [name, spec] : c.registry.all()) models.push_back(spec);
    Json endpoints = Json::object();
    endpoints["default"] = endpoint_json(c.default_endpoint);
    for (const auto& [name, ep] : c.endpoints) endpoints[name] = endpoint_json(ep);
    return Json{{"name", c.name},
                {"dataset_path", c.dataset_path.string()},
                {"models", models},
                {"compressor", c.compressor},
                {"predictor", c.predictor},
                {"proxy", c.proxy},
                {"judge", c.judge},
                {"n_documents", c.n_documents},
                {"m_samples", c.m_samples},
                {"seeds", c.seeds},
                {"temperatures",
                 {{"compressor", c.temperatures.compressor},
                  {"predictor", c.temperatures.predictor},
                  {"judge", c.temperatures.judge}}},
                {"max_output_tokens", c.max_output_tokens},
                {"predictor_max_tokens", c.predictor_max_tokens},
                {"max_concurrency", c.max_concurrency},
                {"conciseness", to_string(c.conciseness)},
                {"eval_mode", to_string(c.eval_mode)},
                {"compress_template", c.compress_template},
                {"predict_template", c.predict_template},
                {"score_mi", c.score_mi},
                {"endpoints", endpoints}};
}

}  // namespace compresslab
