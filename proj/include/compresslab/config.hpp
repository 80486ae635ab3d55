#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "compresslab/types.hpp"

namespace compresslab {

enum class Conciseness { concise3, normal6, elaborate9, unconstrained };
enum class EvalMode { judge, perplexity };

std::string_view to_string(Conciseness c);
Conciseness parse_conciseness(std::string_view s);  // throws ConfigError
std::string_view to_string(EvalMode m);

/// Looks models up by name. Loaded from a JSON array of ModelSpec objects.
class ModelRegistry {
public:
    ModelRegistry() = default;
    explicit ModelRegistry(std::vector<ModelSpec> specs);

    static ModelRegistry load(const std::filesystem::path& path);
    static ModelRegistry from_json(const Json& array);

    /// Adds or replaces by name.
    void put(ModelSpec spec);
    const ModelSpec& at(const std::string& name) const;  // throws ConfigError
    const ModelSpec* find(const std::string& name) const;
    const std::map<std::string, ModelSpec>& all() const noexcept { return specs_; }

private:
    std::map<std::string, ModelSpec> specs_;
};

/// Where calls for one model go.
struct EndpointConfig {
    std::string kind = "http";  // "http" or "simulated"
    std::string base_url;       // empty: $COMPRESSLAB_BASE_URL
    std::string api_key_env = "COMPRESSLAB_API_KEY";
    std::string remote_model;   // model id sent on the wire; empty: the spec name
    bool supports_scoring = true;
    double timeout_s = 120.0;
};

struct Temperatures {
    double compressor = 0.7;
    double predictor = 0.6;
    double judge = 0.0;
};

struct RunConfig {
    std::string name = "run";
    std::filesystem::path dataset_path;
    ModelSpec compressor;
    ModelSpec predictor;
    ModelSpec proxy;
    ModelSpec judge;  // also the evaluation model in perplexity mode
    std::size_t n_documents = 20;
    std::size_t m_samples = 20;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    Temperatures temperatures;
    std::int64_t max_output_tokens = 4096;
    std::int64_t predictor_max_tokens = 1024;
    std::size_t max_concurrency = 8;
    Conciseness conciseness = Conciseness::unconstrained;
    EvalMode eval_mode = EvalMode::judge;
    std::string compress_template = "query_specific";  // query_specific | memory | query_agnostic
    std::string predict_template = "base";             // base | memory
    bool score_mi = false;
    std::map<std::string, EndpointConfig> endpoints;  // keyed by model name
    EndpointConfig default_endpoint;
    ModelRegistry registry;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Parses a run config. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir);
/// Reads and parses a UTF-8 JSON config file. Missing file or bad JSON is a
/// ConfigError.
RunConfig load_run_config(const std::filesystem::path& path);
/// Fully resolved form (model specs inline, absolute paths).
Json to_json(const RunConfig& c);

EndpointConfig parse_endpoint(const Json& j, const std::string& field);

/// Shared config pieces: "registry" (path) and inline "models"; a role given
/// as a model name or an inline spec; the "endpoints" object.
ModelRegistry registry_from_config(const Json& j, const std::filesystem::path& base_dir);
ModelSpec resolve_model(const Json& j, const char* role, const ModelRegistry& reg);
void parse_endpoints(const Json& j, std::map<std::string, EndpointConfig>& endpoints, EndpointConfig& fallback);
std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p);

}  // namespace compresslab
