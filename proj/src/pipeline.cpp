#include "compresslab/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "compresslab/concurrency.hpp"
#include "compresslab/errors.hpp"
#include "compresslab/json_extract.hpp"
#include "compresslab/rng.hpp"

namespace compresslab {

std::string compression_prompt(const PromptTemplate& tmpl, const QARecord& context_record,
                               const QARecord& query_record, Conciseness conciseness) {
    if (!is_compress_role(tmpl.role)) throw std::invalid_argument("not a compression template");
    std::string prompt = tmpl.render({{"query", query_record.query},
                                      {"text", context_record.context},
                                      {"conversation", context_record.context}});
    if (const auto extra = conciseness_instruction(conciseness); !extra.empty()) prompt += "\n\n" + extra;
    return prompt;
}

std::string prediction_prompt(const PromptTemplate& tmpl, std::string_view compression, std::string_view query) {
    if (!is_predict_role(tmpl.role)) throw std::invalid_argument("not a prediction template");
    return tmpl.render({{"query", std::string(query)},
                        {"summary", std::string(compression)},
                        {"memory", std::string(compression)}});
}

std::uint64_t sample_seed(std::uint64_t run_seed, const std::string& record_id, int sample_index) {
    if (sample_index < 0) throw std::invalid_argument("sample_index must be >= 0");
    auto rng = seeded_rng(run_seed, "compress/" + record_id);
    std::uint64_t s = rng();
    for (int k = 0; k < sample_index; ++k) s = rng();
    return s;
}

CompressionResult compress_samples(LmClient& client, const QARecord& record, const std::string& compressor,
                                   const PromptTemplate& tmpl, const std::vector<int>& sample_indices,
                                   const CompressOptions& options) {
    const std::string prompt = compression_prompt(tmpl, record, record, options.conciseness);

    struct Outcome {
        std::optional<Generation> gen;
        std::string error;
        std::uint64_t seed = 0;
    };
    const auto outcomes = parallel_map<Outcome>(sample_indices.size(), options.max_concurrency, [&](std::size_t k) {
        Outcome o;
        o.seed = sample_seed(options.run_seed, record.id, sample_indices[k]);
        GenerationRequest req{compressor, prompt, options.temperature, options.max_tokens, o.seed};
        try {
            o.gen = client.generate(req);
            if (o.gen->text.empty()) {
                o.gen.reset();
                o.error = "empty compression";
            }
        } catch (const FatalRequestError& e) {
            o.error = e.what();
        } catch (const ContextOverflow& e) {
            o.error = e.what();
        }
        return o;
    });

    CompressionResult result;
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
        const auto& o = outcomes[k];
        if (!o.gen) {
            result.failures.push_back({sample_indices[k], o.error});
            continue;
        }
        result.samples.push_back(
            CompressionSample{record.id, sample_indices[k], o.gen->text, o.gen->trace.output_tokens, o.seed});
        result.traces.push_back(o.gen->trace);
    }
    if (!sample_indices.empty() && result.samples.empty()) {
        throw EvaluationError("every compression of record '" + record.id + "' failed: " + result.failures[0].error);
    }
    return result;
}

CompressionResult compress(LmClient& client, const QARecord& record, const std::string& compressor,
                           const PromptTemplate& tmpl, std::size_t m, const CompressOptions& options) {
    if (m < 1) throw std::invalid_argument("compress needs m >= 1");
    std::vector<int> indices(m);
    for (std::size_t j = 0; j < m; ++j) indices[j] = static_cast<int>(j);
    return compress_samples(client, record, compressor, tmpl, indices, options);
}

Prediction predict(LmClient& client, std::string_view compression, std::string_view query,
                   const std::string& predictor, const PromptTemplate& tmpl, const PredictOptions& options,
                   GenerationTrace* trace_out) {
    GenerationRequest req{predictor, prediction_prompt(tmpl, compression, query), options.temperature,
                          options.max_tokens, options.seed};
    const Generation gen = client.generate(req);
    if (trace_out) *trace_out = gen.trace;
    const Json j = extract_json(gen.text);
    const auto it = j.find("answer");
    if (it == j.end()) throw EvaluationError("prediction JSON has no \"answer\" field");
    Prediction p;
    p.answer = it->is_string() ? it->get<std::string>() : it->dump();
    p.trace = gen.trace;
    return p;
}

namespace {

Judgment parse_judgment(const std::string& text) {
    const Json j = extract_json(text);
    const auto it = j.find("correct");
    if (it == j.end()) throw EvaluationError("judge JSON has no \"correct\" field");
    Judgment out;
    if (it->is_boolean()) {
        out.correct = it->get<bool>();
    } else if (it->is_string() && (*it == "true" || *it == "false")) {
        out.correct = *it == "true";
    } else {
        throw EvaluationError("judge \"correct\" field is not a boolean");
    }
    if (auto r = j.find("rationale"); r != j.end() && r->is_string()) out.rationale = r->get<std::string>();
    return out;
}

}  // namespace

JudgeResult judge(LmClient& client, std::string_view prediction, std::string_view gold, std::string_view query,
                  const std::string& judge_model, double temperature, std::int64_t max_tokens,
                  std::vector<GenerationTrace>* traces_out) {
    const auto tmpl = PromptTemplate::builtin(PromptRole::judge);
    const std::string prompt = tmpl.render(
        {{"query", std::string(query)}, {"gold", std::string(gold)}, {"prediction", std::string(prediction)}});
    JudgeResult result;
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const Generation gen = client.generate(GenerationRequest{judge_model, prompt, temperature, max_tokens, {}});
        result.traces.push_back(gen.trace);
        if (traces_out) traces_out->push_back(gen.trace);
        try {
            result.judgment = parse_judgment(gen.text);
            return result;
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    throw EvaluationError("judge output unparseable after retry: " + last_error);
}

double perplexity(LmClient& client, std::string_view context_prompt, std::string_view target,
                  const std::string& eval_model) {
    if (target.empty()) throw std::invalid_argument("perplexity target is empty");
    const TokenLogProbs lp = client.score_completion(eval_model, context_prompt, target);
    if (lp.per_token.empty()) throw EvaluationError("no scored tokens for perplexity target");
    return std::exp(-lp.mean());
}

std::vector<GenerationTrace> MultiTurnTrace::usage() const {
    std::vector<GenerationTrace> out;
    for (const auto& t : turns) {
        out.push_back(t.compressor_trace);
        if (t.follow_up_trace) out.push_back(*t.follow_up_trace);
    }
    if (predictor_trace) out.push_back(*predictor_trace);
    return out;
}

PromptTemplate compress_template_for(const RunConfig& config) {
    if (config.compress_template == "memory") return PromptTemplate::builtin(PromptRole::compress_memory);
    if (config.compress_template == "query_agnostic") {
        return PromptTemplate::builtin(PromptRole::compress_query_agnostic);
    }
    return PromptTemplate::builtin(PromptRole::compress_query_specific);
}

PromptTemplate predict_template_for(const RunConfig& config) {
    if (config.predict_template == "memory") return PromptTemplate::builtin(PromptRole::predict_memory);
    return PromptTemplate::builtin(PromptRole::predict_base);
}

MultiTurnTrace run_multi_turn(LmClient& client, const QARecord& record, const RunConfig& config, std::size_t turns,
                              std::uint64_t run_seed) {
    if (turns < 1) throw std::invalid_argument("turns must be >= 1");
    const auto compress_tmpl = compress_template_for(config);
    const auto follow_tmpl = PromptTemplate::builtin(PromptRole::follow_up);
    const std::string& compressor = config.compressor.name;
    const std::string& predictor = config.predictor.name;

    MultiTurnTrace trace;
    std::string accumulated;
    std::string current_query = record.query;
    for (std::size_t t = 0; t < turns; ++t) {
        QARecord asked = record;
        asked.query = current_query;
        const auto seed = sample_seed(run_seed, record.id + "/turn", static_cast<int>(t));
        const GenerationRequest req{compressor,
                                    compression_prompt(compress_tmpl, record, asked, config.conciseness),
                                    config.temperatures.compressor, config.max_output_tokens, seed};
        const Generation gen = client.generate(req);
        TurnStep step;
        step.query = current_query;
        step.compression = CompressionSample{record.id, static_cast<int>(t), gen.text, gen.trace.output_tokens, seed};
        step.compressor_trace = gen.trace;
        if (!accumulated.empty()) accumulated += "\n\n";
        accumulated += gen.text;

        if (t + 1 < turns) {
            const Generation follow = client.generate(GenerationRequest{
                predictor, follow_tmpl.render({{"query", record.query}, {"summary", accumulated}}),
                config.temperatures.predictor, config.predictor_max_tokens, seed});
            step.follow_up_trace = follow.trace;
            const Json j = extract_json(follow.text);
            const auto it = j.find("follow_up_query");
            if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
                throw EvaluationError("follow-up JSON has no \"follow_up_query\" string");
            }
            current_query = it->get<std::string>();
        }
        trace.turns.push_back(std::move(step));
    }

    GenerationTrace pt;
    try {
        const auto p = predict(client, accumulated, record.query, predictor, predict_template_for(config),
                               PredictOptions{config.temperatures.predictor, config.predictor_max_tokens,
                                              sample_seed(run_seed, record.id + "/predict", 0)},
                               &pt);
        trace.prediction = p.answer;
        trace.predictor_trace = p.trace;
    } catch (const NoJsonFound&) {
        trace.prediction_failed = true;
        trace.predictor_trace = pt;
    } catch (const MalformedJson&) {
        trace.prediction_failed = true;
        trace.predictor_trace = pt;
    } catch (const EvaluationError&) {
        trace.prediction_failed = true;
        trace.predictor_trace = pt;
    }
    return trace;
}

namespace {

std::string synthetic_id(const std::string& context, QaStyle style, std::size_t k) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(stable_hash(context)));
    return std::string(style == QaStyle::web_style ? "web-" : "mem-") + buf + "-" + std::to_string(k);
}

std::vector<QARecord> parse_qa(const std::string& text, const std::string& context, QaStyle style) {
    const Json j = extract_json(text);
    std::vector<QARecord> out;
    auto field = [](const Json& o, const char* name) {
        const auto it = o.find(name);
        if (it == o.end() || !it->is_string() || it->get<std::string>().empty()) {
            throw EvaluationError(std::string("synthetic QA item lacks \"") + name + "\"");
        }
        return it->get<std::string>();
    };
    if (style == QaStyle::memory_style) {
        out.push_back(QARecord{synthetic_id(context, style, 0), context, field(j, "question"), field(j, "answer"),
                               "synthetic/memory"});
        return out;
    }
    const auto it = j.find("questions");
    if (it == j.end() || !it->is_array() || it->empty()) throw EvaluationError("synthetic QA has no questions array");
    for (std::size_t k = 0; k < it->size(); ++k) {
        const Json& q = (*it)[k];
        const std::string type = q.value("type", std::string("qa"));
        if (type != "qa" && type != "generation") throw EvaluationError("synthetic QA type must be qa or generation");
        out.push_back(QARecord{synthetic_id(context, style, k), context, field(q, "question"), field(q, "answer"),
                               "synthetic/web/" + type});
    }
    return out;
}

}  // namespace

std::vector<QARecord> synthesize_qa(LmClient& client, const std::string& context, const std::string& generator,
                                    QaStyle style, double temperature, std::int64_t max_tokens) {
    if (context.empty()) throw std::invalid_argument("synthesize_qa needs a non-empty context");
    const auto tmpl = PromptTemplate::builtin(style == QaStyle::web_style ? PromptRole::qa_web_style
                                                                          : PromptRole::qa_memory_style);
    const std::string prompt = tmpl.render({{"context", context}, {"chats", context}});
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const Generation gen = client.generate(GenerationRequest{generator, prompt, temperature, max_tokens, {}});
        try {
            return parse_qa(gen.text, context, style);
        } catch (const Error& e) {
            last_error = e.what();
        } catch (const Json::exception& e) {
            last_error = e.what();
        }
    }
    throw EvaluationError("synthetic QA output unparseable after retry: " + last_error);
}

}  // namespace compresslab
