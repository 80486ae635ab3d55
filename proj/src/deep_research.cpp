#include "compresslab/deep_research.hpp"

#include <algorithm>
#include <fstream>

#include "compresslab/concurrency.hpp"
#include "compresslab/errors.hpp"
#include "compresslab/json_extract.hpp"
#include "compresslab/prompts.hpp"

namespace compresslab {

namespace {

std::string non_empty_string(const Json& j, const char* key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
        throw EvaluationError(where + " needs a non-empty \"" + key + "\"");
    }
    return it->get<std::string>();
}

int stage_rank(const std::string& stage) {
    if (stage == "plan") return 0;
    if (stage == "extract") return 1;
    return 2;
}

}  // namespace

ResearchPlan parse_research_plan(const Json& j) {
    if (!j.is_object()) throw EvaluationError("research plan is not a JSON object");
    ResearchPlan plan;
    plan.research_plan = non_empty_string(j, "research_plan", "research plan");
    plan.synthesis_strategy = non_empty_string(j, "synthesis_strategy", "research plan");
    const auto q = j.find("queries");
    if (q == j.end() || !q->is_array()) throw EvaluationError("research plan has no \"queries\" array");
    if (q->size() != kResearchPairs) {
        throw EvaluationError("research plan has " + std::to_string(q->size()) + " query pairs, expected 8");
    }
    for (const auto& item : *q) {
        if (!item.is_object()) throw EvaluationError("query pair is not an object");
        plan.pairs.push_back(
            {non_empty_string(item, "search_query", "query pair"), non_empty_string(item, "sub_task", "query pair")});
    }
    return plan;
}

void TraceLog::add(std::string stage, int index, const std::string& model, const std::string& prompt,
                   const std::string& output) {
    std::lock_guard lock(mu_);
    entries_.push_back(Json{{"stage", std::move(stage)},
                            {"index", index},
                            {"model", model},
                            {"prompt", prompt},
                            {"output", output},
                            {"seq", entries_.size()}});
}

std::vector<Json> TraceLog::entries() const {
    std::lock_guard lock(mu_);
    auto out = entries_;
    std::stable_sort(out.begin(), out.end(), [](const Json& a, const Json& b) {
        const auto ka = std::make_pair(stage_rank(a["stage"].get<std::string>()), a["index"].get<int>());
        const auto kb = std::make_pair(stage_rank(b["stage"].get<std::string>()), b["index"].get<int>());
        return ka < kb;
    });
    // per-stage insertion order is already kept by stable_sort; seq is only bookkeeping
    for (auto& e : out) e.erase("seq");
    return out;
}

std::int64_t predictor_max_tokens_for_profile(const std::string& profile) {
    if (profile == "frontier") return 16000;
    if (profile == "mid") return 4000;
    throw ConfigError("predictor_profile", "expected 'frontier' or 'mid'");
}

ResearchPlan decompose(LmClient& client, const std::string& task, const std::string& predictor,
                       const DeepResearchOptions& options, std::vector<GenerationTrace>* usage, TraceLog* trace) {
    if (task.empty()) throw std::invalid_argument("research task is empty");
    const std::string base = PromptTemplate::builtin(PromptRole::research_plan).render({{"query", task}});
    std::string prompt = base;
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const auto gen = client.generate(
            GenerationRequest{predictor, prompt, options.predictor_temperature, options.predictor_max_tokens, {}});
        if (usage) usage->push_back(gen.trace);
        if (trace) trace->add("plan", attempt, predictor, prompt, gen.text);
        try {
            return parse_research_plan(extract_json(gen.text));
        } catch (const Error& e) {
            last_error = e.what();
        }
        prompt = base + "\n\nYour previous response was rejected (" + last_error +
                 "). Return ONLY the JSON object, with EXACTLY 8 entries in \"queries\", each having a non-empty "
                 "\"search_query\" and \"sub_task\".";
    }
    throw EvaluationError("research plan rejected after retry: " + last_error);
}

Extraction execute_subtask(LmClient& client, SearchClient& search, const std::string& task,
                           const ResearchPair& pair, std::size_t pair_index, const std::string& compressor,
                           const DeepResearchOptions& options, TraceLog* trace) {
    Extraction ex;
    ex.pair_index = pair_index;
    auto results = search.search(pair.search_query, options.top_k);
    if (results.size() > options.top_k) results.resize(options.top_k);
    if (results.empty()) return ex;

    std::string content;
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto& r = results[k];
        ex.source_urls.push_back(r.url);
        if (!content.empty()) content += "\n\n";
        content += "### Source " + std::to_string(k + 1) + ": " + r.title + "\nURL: " + r.url + "\n";
        content += r.content.substr(0, options.max_source_chars);
    }
    const std::string prompt = PromptTemplate::builtin(PromptRole::source_extraction)
                                   .render({{"query", task}, {"sub_task", pair.sub_task}, {"content", content}});
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const auto gen = client.generate(GenerationRequest{compressor, prompt, options.compressor_temperature,
                                                           options.compressor_max_tokens, {}});
        ex.usage.push_back(gen.trace);
        if (trace) trace->add("extract", static_cast<int>(pair_index), compressor, prompt, gen.text);
        try {
            const Json j = extract_json(gen.text);
            const auto answer = non_empty_string(j, "answer", "extraction");
            if (answer != "relevant" && answer != "not relevant") {
                throw EvaluationError("extraction answer must be 'relevant' or 'not relevant'");
            }
            const auto it = j.find("explanation");
            if (it == j.end() || !it->is_string()) throw EvaluationError("extraction has no \"explanation\" string");
            ex.explanation = it->get<std::string>();
            ex.relevant = answer == "relevant";
            return ex;
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    throw EvaluationError("extraction for pair " + std::to_string(pair_index) + " unparseable after retry: " +
                          last_error);
}

std::string format_findings(const ResearchPlan& plan, const std::vector<Extraction>& extractions) {
    std::vector<const Extraction*> ordered(plan.pairs.size(), nullptr);
    for (const auto& e : extractions) {
        if (e.pair_index >= ordered.size()) throw std::invalid_argument("extraction pair_index out of range");
        ordered[e.pair_index] = &e;
    }
    std::string out;
    for (std::size_t k = 0; k < plan.pairs.size(); ++k) {
        if (!ordered[k]) throw std::invalid_argument("missing extraction for pair " + std::to_string(k));
        const auto& e = *ordered[k];
        if (!out.empty()) out += "\n\n";
        out += "Query " + std::to_string(k + 1) + ": " + plan.pairs[k].search_query + "\n";
        out += "Sub-task: " + plan.pairs[k].sub_task + "\n";
        out += "Findings: " + (e.relevant && !e.explanation.empty() ? e.explanation
                                                                     : std::string("No relevant information found.")) +
               "\n";
        out += "Sources: ";
        for (std::size_t s = 0; s < e.source_urls.size(); ++s) out += (s ? ", " : "") + e.source_urls[s];
        if (e.source_urls.empty()) out += "none";
    }
    return out;
}

Report synthesize_report(LmClient& client, const std::string& task, const ResearchPlan& plan,
                         const std::vector<Extraction>& extractions, const std::string& predictor,
                         const DeepResearchOptions& options, const std::vector<GenerationTrace>& prior_usage,
                         const PriceLookup& prices, TraceLog* trace) {
    if (extractions.size() != plan.pairs.size()) throw std::invalid_argument("synthesis needs all 8 extractions");
    const std::string prompt = PromptTemplate::builtin(PromptRole::research_synthesis)
                                   .render({{"original_task", task},
                                            {"research_plan", plan.research_plan},
                                            {"qa_pairs", format_findings(plan, extractions)},
                                            {"synthesis_strategy", plan.synthesis_strategy}});
    const auto gen = client.generate(
        GenerationRequest{predictor, prompt, options.predictor_temperature, options.predictor_max_tokens, {}});
    if (trace) trace->add("synthesize", 0, predictor, prompt, gen.text);

    std::vector<GenerationTrace> usage = prior_usage;
    for (const auto& e : extractions) usage.insert(usage.end(), e.usage.begin(), e.usage.end());
    usage.push_back(gen.trace);
    Report report;
    report.text = gen.text;
    report.cost = dollar_cost(usage, prices);
    report.cost.add_line_item("web search", options.search_fee_usd);
    return report;
}

DeepResearchConfig parse_deep_research_config(const Json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    DeepResearchConfig c;
    c.registry = registry_from_config(j, base_dir);
    c.predictor = resolve_model(j, "predictor", c.registry);
    c.compressor = resolve_model(j, "compressor", c.registry);
    c.registry.put(c.predictor);
    c.registry.put(c.compressor);
    parse_endpoints(j, c.endpoints, c.default_endpoint);

    auto& o = c.options;
    try {
        o.predictor_max_tokens = predictor_max_tokens_for_profile(j.value("predictor_profile", std::string("frontier")));
        o.predictor_max_tokens = j.value("predictor_max_tokens", o.predictor_max_tokens);
        o.top_k = j.value("top_k", o.top_k);
        o.max_source_chars = j.value("max_source_chars", o.max_source_chars);
        o.compressor_temperature = j.value("compressor_temperature", o.compressor_temperature);
        o.compressor_max_tokens = j.value("compressor_max_tokens", o.compressor_max_tokens);
        o.predictor_temperature = j.value("predictor_temperature", o.predictor_temperature);
        o.max_concurrency = j.value("max_concurrency", o.max_concurrency);
        o.search_fee_usd = j.value("search_fee_usd", o.search_fee_usd);
    } catch (const Json::type_error& e) {
        throw ConfigError("<root>", e.what());
    }
    if (o.top_k < 1) throw ConfigError("top_k", "must be >= 1");
    if (o.max_concurrency < 1) throw ConfigError("max_concurrency", "must be >= 1");
    if (o.compressor_max_tokens < 1 || o.predictor_max_tokens < 1) throw ConfigError("max_tokens", "must be >= 1");

    if (auto it = j.find("search"); it != j.end()) {
        if (!it->is_object()) throw ConfigError("search", "must be an object");
        c.search_kind = it->value("kind", c.search_kind);
        if (c.search_kind == "fixture") {
            const auto path = it->value("fixture", std::string());
            if (path.empty()) throw ConfigError("search.fixture", "missing");
            c.search_fixture = resolve_path(base_dir, path);
        } else if (c.search_kind == "http") {
            c.search_url = it->value("url", std::string());
            if (c.search_url.empty()) throw ConfigError("search.url", "missing");
        } else if (c.search_kind != "simulated") {
            throw ConfigError("search.kind", "expected simulated, fixture or http");
        }
    }
    return c;
}

DeepResearchConfig load_deep_research_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("--config", e.what());
    }
    return parse_deep_research_config(j, path.parent_path());
}

std::shared_ptr<SearchClient> make_search_client(const DeepResearchConfig& config) {
    if (config.search_kind == "fixture") return load_search_fixture(config.search_fixture);
    if (config.search_kind == "http") return std::make_shared<HttpSearch>(config.search_url);
    return make_simulated_search();
}

DeepResearchResult run_deep_research(const std::string& task, const DeepResearchConfig& config, LmClient& client,
                                     SearchClient& search, const std::filesystem::path& out_dir) {
    TraceLog trace;
    std::vector<GenerationTrace> plan_usage;
    DeepResearchResult result;
    const auto& o = config.options;
    result.plan = decompose(client, task, config.predictor.name, o, &plan_usage, &trace);
    result.extractions = parallel_map<Extraction>(result.plan.pairs.size(), o.max_concurrency, [&](std::size_t k) {
        return execute_subtask(client, search, task, result.plan.pairs[k], k, config.compressor.name, o, &trace);
    });
    result.report = synthesize_report(client, task, result.plan, result.extractions, config.predictor.name, o,
                                      plan_usage, [&](const std::string& m) { return config.registry.find(m); },
                                      &trace);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream(out_dir / "report.md", std::ios::trunc) << result.report.text;
        Json cost = result.report.cost;
        cost["subtasks"] = result.extractions.size();
        cost["relevant_subtasks"] = std::count_if(result.extractions.begin(), result.extractions.end(),
                                                  [](const Extraction& e) { return e.relevant; });
        std::ofstream(out_dir / "cost.json", std::ios::trunc) << cost.dump(2) << '\n';
        std::ofstream tl(out_dir / "trace.jsonl", std::ios::trunc);
        for (const auto& e : trace.entries()) tl << e.dump() << '\n';
    }
    return result;
}

}  // namespace compresslab
