#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "compresslab/config.hpp"
#include "compresslab/inference.hpp"
#include "compresslab/prompts.hpp"
#include "compresslab/types.hpp"

namespace compresslab {

/// Compression prompt for context `context_record` and query `query_record`,
/// including any conciseness instruction. Also the scoring prompt of the
/// MI estimator's cross terms.
std::string compression_prompt(const PromptTemplate& tmpl, const QARecord& context_record,
                               const QARecord& query_record, Conciseness conciseness);

std::string prediction_prompt(const PromptTemplate& tmpl, std::string_view compression, std::string_view query);

/// Seed of sample j of a record: the j-th draw of seeded_rng(seed, "compress/<id>").
std::uint64_t sample_seed(std::uint64_t run_seed, const std::string& record_id, int sample_index);

struct CompressOptions {
    double temperature = 0.7;
    std::int64_t max_tokens = 4096;
    Conciseness conciseness = Conciseness::unconstrained;
    std::uint64_t run_seed = 0;
    std::size_t max_concurrency = 1;
};

struct SampleFailure {
    int sample_index = 0;
    std::string error;
};

struct CompressionResult {
    std::vector<CompressionSample> samples;  // successes, ascending sample_index
    std::vector<GenerationTrace> traces;     // parallel to samples
    std::vector<SampleFailure> failures;
};

/// Draws the requested sample indices. A request-level failure is recorded
/// against its sample; RetriesExhausted (endpoint outage) propagates. Throws
/// EvaluationError when every requested sample fails.
CompressionResult compress_samples(LmClient& client, const QARecord& record, const std::string& compressor,
                                   const PromptTemplate& tmpl, const std::vector<int>& sample_indices,
                                   const CompressOptions& options);

/// Samples 0..m-1.
CompressionResult compress(LmClient& client, const QARecord& record, const std::string& compressor,
                           const PromptTemplate& tmpl, std::size_t m, const CompressOptions& options);

struct PredictOptions {
    double temperature = 0.6;
    std::int64_t max_tokens = 1024;
    std::optional<std::uint64_t> seed;
};

struct Prediction {
    std::string answer;
    GenerationTrace trace;
};

/// The "answer" field of the predictor's JSON. Throws NoJsonFound /
/// MalformedJson on unparseable output and EvaluationError when the field
/// is missing; `trace_out` is filled whenever the endpoint answered.
Prediction predict(LmClient& client, std::string_view compression, std::string_view query,
                   const std::string& predictor, const PromptTemplate& tmpl, const PredictOptions& options,
                   GenerationTrace* trace_out = nullptr);

struct Judgment {
    bool correct = false;
    std::string rationale;
};

struct JudgeResult {
    Judgment judgment;
    std::vector<GenerationTrace> traces;  // one per attempt that returned text
};

/// Asks the judge for {"correct": bool, "rationale": str}; retries once on
/// unparseable output, then throws EvaluationError. `traces_out` collects
/// usage even when the judge ultimately fails.
JudgeResult judge(LmClient& client, std::string_view prediction, std::string_view gold, std::string_view query,
                  const std::string& judge_model, double temperature = 0.0, std::int64_t max_tokens = 256,
                  std::vector<GenerationTrace>* traces_out = nullptr);

/// exp(-mean per-token log-prob) of `target` after `context_prompt`.
double perplexity(LmClient& client, std::string_view context_prompt, std::string_view target,
                  const std::string& eval_model);

struct TurnStep {
    std::string query;  // what the compressor was asked this turn
    CompressionSample compression;
    GenerationTrace compressor_trace;
    std::optional<GenerationTrace> follow_up_trace;
};

struct MultiTurnTrace {
    std::vector<TurnStep> turns;
    std::string prediction;
    bool prediction_failed = false;
    std::optional<GenerationTrace> predictor_trace;
    std::vector<GenerationTrace> usage() const;
};

/// The predictor asks `turns - 1` follow-up questions; each turn's question
/// is compressed from the full context, and the final answer uses all
/// accumulated compressions.
MultiTurnTrace run_multi_turn(LmClient& client, const QARecord& record, const RunConfig& config, std::size_t turns,
                              std::uint64_t run_seed);

enum class QaStyle { memory_style, web_style };

/// Generates QA records from `context` with the matching template. Records
/// are tagged "synthetic/<style>" (web style appends "/qa" or "/generation").
/// Retries once on malformed output, then throws EvaluationError.
std::vector<QARecord> synthesize_qa(LmClient& client, const std::string& context, const std::string& generator,
                                    QaStyle style, double temperature = 0.7, std::int64_t max_tokens = 4096);

/// Resolves the config's template names to prompt roles.
PromptTemplate compress_template_for(const RunConfig& config);
PromptTemplate predict_template_for(const RunConfig& config);

}  // namespace compresslab
