#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

#include "compresslab/config.hpp"
#include "compresslab/rng.hpp"
#include "compresslab/scripted_client.hpp"

// A scripted endpoint that recognises the built-in prompts by their wording.
// Everything is a pure function of (model, prompt, seed), so repeated runs
// produce identical outputs whatever the thread interleaving.
namespace fakes {

inline std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline bool has(const std::string& s, const char* needle) { return s.find(needle) != std::string::npos; }

inline std::shared_ptr<compresslab::ScriptedClient> pipeline_fake() {
    using namespace compresslab;
    auto fake = std::make_shared<ScriptedClient>();
    fake->on_generate([](const GenerationRequest& r) {
        const std::uint64_t h = stable_hash(r.prompt, stable_hash(r.model, r.seed.value_or(0) + 1));
        Generation g;
        g.trace = {r.model, count_words(r.prompt), 1};
        if (has(r.prompt, "\"correct\": true or false")) {
            g.text = std::string("{\"correct\": ") + (h % 3 ? "true" : "false") + ", \"rationale\": \"scripted\"}";
        } else if (has(r.prompt, "follow_up_query")) {
            g.text = "{\"follow_up_query\": \"what else about " + hex(h).substr(0, 4) + "?\"}";
        } else if (has(r.prompt, "Please answer the following question")) {
            g.text = "```json\n{\"explanation\": \"x\", \"answer\": \"A" + std::to_string(h % 4) + "\"}\n```";
        } else {
            g.text = "summary " + hex(h) + " of the text";
            g.trace.output_tokens = 4 + static_cast<std::int64_t>(h % 7);
            return g;
        }
        g.trace.output_tokens = count_words(g.text);
        return g;
    });
    fake->on_score([](const std::string& model, std::string_view prompt, std::string_view completion) {
        const std::uint64_t h = stable_hash(completion, stable_hash(prompt, stable_hash(model)));
        return TokenLogProbs::from_tokens({-1.0 - static_cast<double>(h % 1000) / 250.0, -0.5});
    });
    return fake;
}

inline std::string research_plan_json(std::size_t pairs) {
    compresslab::Json q = compresslab::Json::array();
    for (std::size_t k = 0; k < pairs; ++k) {
        q.push_back({{"search_query", "query " + std::to_string(k)}, {"sub_task", "subtask " + std::to_string(k)}});
    }
    return compresslab::Json{{"research_plan", "plan"}, {"queries", q}, {"synthesis_strategy", "by theme"}}.dump();
}

// Deep research endpoint with fixed token counts per stage: plan 1000/500,
// each extraction 2000/100, synthesis 5000/3000. The first plan reply has
// `first_pairs` pairs, later ones `retry_pairs`.
inline std::shared_ptr<compresslab::ScriptedClient> research_fake(std::size_t first_pairs = 8,
                                                                  std::size_t retry_pairs = 8) {
    using namespace compresslab;
    auto fake = std::make_shared<ScriptedClient>();
    auto plans = std::make_shared<std::atomic<int>>(0);
    fake->on_generate([=](const GenerationRequest& r) {
        if (has(r.prompt, "EXACTLY 8 different search queries")) {
            const std::size_t n = (*plans)++ == 0 ? first_pairs : retry_pairs;
            return Generation{"```json\n" + research_plan_json(n) + "\n```", {r.model, 1000, 500}};
        }
        if (has(r.prompt, "**Specific Sub-task/Question:**")) {
            const bool relevant = !has(r.prompt, "subtask 3\n");
            return Generation{Json{{"explanation", "found facts"}, {"answer", relevant ? "relevant" : "not relevant"}}.dump(),
                              {r.model, 2000, 100}};
        }
        return Generation{"# Report\n", {r.model, 5000, 3000}};
    });
    return fake;
}

// A run over `dataset` with priced judge/predictor models and the given shape.
inline compresslab::RunConfig run_config(const std::filesystem::path& dataset, std::vector<std::uint64_t> seeds,
                                         std::size_t n_documents, std::size_t m_samples) {
    using namespace compresslab;
    RunConfig c;
    c.name = "fake-run";
    c.dataset_path = dataset;
    c.compressor = {"qwen-small", "qwen", 1'500'000'000, 28, 1536, 0.0, 0.0};
    c.predictor = {"gpt-big", "gpt", 200'000'000'000, 96, 12288, 2.5, 10.0};
    c.proxy = c.compressor;
    c.judge = c.predictor;
    c.registry.put(c.compressor);
    c.registry.put(c.predictor);
    c.seeds = std::move(seeds);
    c.n_documents = n_documents;
    c.m_samples = m_samples;
    c.max_concurrency = 4;
    c.default_endpoint.kind = "simulated";
    return c;
}

}  // namespace fakes
