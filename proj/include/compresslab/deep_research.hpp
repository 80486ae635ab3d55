#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "compresslab/config.hpp"
#include "compresslab/cost_model.hpp"
#include "compresslab/inference.hpp"
#include "compresslab/search.hpp"

namespace compresslab {

struct ResearchPair {
    std::string search_query;
    std::string sub_task;
};

struct ResearchPlan {
    std::string research_plan;
    std::vector<ResearchPair> pairs;  // exactly 8
    std::string synthesis_strategy;
};

inline constexpr std::size_t kResearchPairs = 8;

/// Parses a plan object. Throws EvaluationError naming the problem when the
/// pair count is not 8 or any field is empty.
ResearchPlan parse_research_plan(const Json& j);

struct Extraction {
    std::size_t pair_index = 0;
    std::string explanation;
    bool relevant = false;
    std::vector<std::string> source_urls;
    std::vector<GenerationTrace> usage;
};

/// Every prompt and output of one task, in a deterministic order.
class TraceLog {
public:
    void add(std::string stage, int index, const std::string& model, const std::string& prompt,
             const std::string& output);
    /// Sorted by stage order (plan, extract, synthesize), then index, then insertion.
    std::vector<Json> entries() const;

private:
    mutable std::mutex mu_;
    std::vector<Json> entries_;
};

struct DeepResearchOptions {
    std::size_t top_k = 3;
    std::size_t max_source_chars = 8000;
    double compressor_temperature = 0.7;
    std::int64_t compressor_max_tokens = 2000;
    double predictor_temperature = 0.6;
    std::int64_t predictor_max_tokens = 16000;  // 4000 for mid-tier predictors
    std::size_t max_concurrency = 8;
    double search_fee_usd = kSearchFeeUsd;
};

/// 16000 for "frontier", 4000 for "mid"; throws ConfigError otherwise.
std::int64_t predictor_max_tokens_for_profile(const std::string& profile);

/// Fills the planning template, retrying once with a corrective suffix when
/// the reply is unparseable or has the wrong number of pairs.
ResearchPlan decompose(LmClient& client, const std::string& task, const std::string& predictor,
                       const DeepResearchOptions& options, std::vector<GenerationTrace>* usage = nullptr,
                       TraceLog* trace = nullptr);

/// Searches, truncates each source, and asks the compressor for an
/// extraction (one retry on unparseable output). No results: relevant=false
/// and no compressor call.
Extraction execute_subtask(LmClient& client, SearchClient& search, const std::string& task,
                           const ResearchPair& pair, std::size_t pair_index, const std::string& compressor,
                           const DeepResearchOptions& options, TraceLog* trace = nullptr);

/// Findings block for the synthesis prompt, ordered by pair index.
std::string format_findings(const ResearchPlan& plan, const std::vector<Extraction>& extractions);

struct Report {
    std::string text;
    CostReport cost;
};

/// Writes the report and prices every usage of the task (plan, extractions,
/// synthesis) plus the search fee, added once.
Report synthesize_report(LmClient& client, const std::string& task, const ResearchPlan& plan,
                         const std::vector<Extraction>& extractions, const std::string& predictor,
                         const DeepResearchOptions& options, const std::vector<GenerationTrace>& prior_usage,
                         const PriceLookup& prices, TraceLog* trace = nullptr);

struct DeepResearchConfig {
    ModelSpec predictor;
    ModelSpec compressor;
    ModelRegistry registry;
    std::map<std::string, EndpointConfig> endpoints;
    EndpointConfig default_endpoint;
    DeepResearchOptions options;
    std::string search_kind = "simulated";  // simulated | fixture | http
    std::filesystem::path search_fixture;
    std::string search_url;
};

DeepResearchConfig parse_deep_research_config(const Json& j, const std::filesystem::path& base_dir);
DeepResearchConfig load_deep_research_config(const std::filesystem::path& path);
std::shared_ptr<SearchClient> make_search_client(const DeepResearchConfig& config);

struct DeepResearchResult {
    ResearchPlan plan;
    std::vector<Extraction> extractions;
    Report report;
};

/// Plan, 8 concurrent subtasks, synthesis. Writes report.md, cost.json and
/// trace.jsonl into `out_dir` when it is non-empty.
DeepResearchResult run_deep_research(const std::string& task, const DeepResearchConfig& config, LmClient& client,
                                     SearchClient& search, const std::filesystem::path& out_dir);

}  // namespace compresslab
