#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace compresslab {

using Json = nlohmann::json;

/// One question-answering item: the context X, the query Q and the
/// reference answer for the target Y.
struct QARecord {
    std::string id;
    std::string context;
    std::string query;
    std::string gold_answer;
    std::string source_tag;

    bool operator==(const QARecord&) const = default;
};

/// One sampled compression Z of a record's context.
struct CompressionSample {
    std::string record_id;
    int sample_index = 0;
    std::string text;
    std::int64_t output_tokens = 0;  // as reported by the compressor endpoint
    std::uint64_t seed = 0;

    bool operator==(const CompressionSample&) const = default;
};

/// Token counts for one endpoint call.
struct GenerationTrace {
    std::string model_name;
    std::int64_t prompt_tokens = 0;
    std::int64_t output_tokens = 0;

    bool operator==(const GenerationTrace&) const = default;
};

/// Architecture and price constants of a dense transformer.
///
/// `d_attn` is the attention embedding width per layer (heads x head_dim).
/// Prices are USD per one million tokens.
struct ModelSpec {
    std::string name;
    std::string family;
    std::int64_t n_params = 0;
    std::int64_t n_layer = 0;
    std::int64_t d_attn = 0;
    double price_in = 0.0;
    double price_out = 0.0;

    /// Throws ConfigError naming the first violated field.
    void validate() const;

    bool operator==(const ModelSpec&) const = default;
};

void to_json(Json& j, const QARecord& r);
void to_json(Json& j, const GenerationTrace& t);
void from_json(const Json& j, GenerationTrace& t);
void to_json(Json& j, const ModelSpec& m);
/// Parses and validates a ModelSpec; errors are ConfigError.
ModelSpec model_spec_from_json(const Json& j);

}  // namespace compresslab
