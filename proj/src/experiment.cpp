#include "compresslab/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

#include "compresslab/analysis.hpp"
#include "compresslab/cost_model.hpp"
#include "compresslab/dataset.hpp"
#include "compresslab/errors.hpp"
#include "compresslab/json_extract.hpp"
#include "compresslab/pipeline.hpp"
#include "compresslab/rate_distortion.hpp"
#include "compresslab/rng.hpp"

namespace compresslab {

namespace fs = std::filesystem;

std::vector<std::size_t> subsample_indices(std::size_t dataset_size, std::size_t n, std::uint64_t seed) {
    if (n > dataset_size) {
        throw ConfigError("n_documents", "asks for " + std::to_string(n) + " documents but the dataset has " +
                                             std::to_string(dataset_size));
    }
    std::vector<std::size_t> idx(dataset_size);
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = seeded_rng(seed, "subsample");
    for (std::size_t k = 0; k < n; ++k) std::swap(idx[k], idx[k + rng.below(dataset_size - k)]);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    return idx;
}

namespace {

struct ErrorLog {
    fs::path path;
    std::mutex mu;

    void add(std::uint64_t seed, const std::string& record_id, int sample_index, const std::string& stage,
             const std::string& what) {
        std::lock_guard lock(mu);
        std::ofstream out(path, std::ios::app);
        out << Json{{"seed", seed}, {"record_id", record_id}, {"sample_index", sample_index}, {"stage", stage},
                    {"error", what}}
                   .dump()
            << '\n';
    }
};

// Prediction + evaluation of one compression sample.
struct SampleJob {
    const QARecord* record;
    int sample_index;
    std::optional<CompressionSample> sample;
    std::optional<GenerationTrace> compressor_trace;
};

RunRecord evaluate_sample(const RunConfig& config, LmClient& client, const SampleJob& job, std::uint64_t seed,
                          const std::string& ts_start, ErrorLog& errors) {
    RunRecord r;
    r.run_id = config.name;
    r.seed = seed;
    r.record_id = job.record->id;
    r.sample_index = job.sample_index;
    r.ts_start = ts_start;
    if (job.sample) {
        r.compression_text = job.sample->text;
        r.output_tokens = job.sample->output_tokens;
    }
    if (job.compressor_trace) r.usage.push_back(*job.compressor_trace);

    const auto predict_tmpl = predict_template_for(config);
    const std::uint64_t eval_seed = stable_hash("predict", job.sample ? job.sample->seed : 0);

    if (config.eval_mode == EvalMode::perplexity) {
        const std::string ctx = prediction_prompt(predict_tmpl, r.compression_text, job.record->query);
        r.perplexity = perplexity(client, ctx, job.record->gold_answer, config.judge.name);
        r.ts_end = utc_timestamp_now();
        return r;
    }

    r.judgment = false;
    if (!job.sample) {
        r.ts_end = utc_timestamp_now();
        return r;
    }
    bool predicted = false;
    GenerationTrace pt;
    try {
        const auto p = predict(client, r.compression_text, job.record->query, config.predictor.name, predict_tmpl,
                               PredictOptions{config.temperatures.predictor, config.predictor_max_tokens, eval_seed},
                               &pt);
        r.prediction = p.answer;
        r.usage.push_back(p.trace);
        predicted = true;
    } catch (const RetriesExhausted&) {
        throw;
    } catch (const Error& e) {
        if (!pt.model_name.empty()) r.usage.push_back(pt);
        errors.add(seed, r.record_id, r.sample_index, "predict", e.what());
    }
    if (predicted) {
        std::vector<GenerationTrace> jt;
        try {
            r.judgment = judge(client, r.prediction, job.record->gold_answer, job.record->query, config.judge.name,
                               config.temperatures.judge, 256, &jt)
                             .judgment.correct;
        } catch (const RetriesExhausted&) {
            throw;
        } catch (const Error& e) {
            r.judgment = false;
            errors.add(seed, r.record_id, r.sample_index, "judge", e.what());
        }
        r.usage.insert(r.usage.end(), jt.begin(), jt.end());
    }
    r.ts_end = utc_timestamp_now();
    return r;
}

// Writes completed units strictly in order as soon as the prefix is ready.
class OrderedSink {
public:
    OrderedSink(RunRecordWriter& writer, std::size_t units, std::optional<std::size_t> limit, std::size_t& written)
        : writer_(writer), slots_(units), limit_(limit), written_(written) {}

    void complete(std::size_t unit, std::vector<RunRecord> records) {
        std::lock_guard lock(mu_);
        slots_[unit] = std::move(records);
        while (next_ < slots_.size() && slots_[next_]) {
            for (const auto& r : *slots_[next_]) {
                if (limit_ && written_ >= *limit_) {
                    throw RunInterrupted("stopped after " + std::to_string(written_) + " records");
                }
                writer_.append(r);
                ++written_;
            }
            slots_[next_].reset();
            ++next_;
        }
    }

private:
    RunRecordWriter& writer_;
    std::vector<std::optional<std::vector<RunRecord>>> slots_;
    std::optional<std::size_t> limit_;
    std::size_t& written_;
    std::size_t next_ = 0;
    std::mutex mu_;
};

void write_json_file(const fs::path& path, const Json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& config, LmClient& client, const fs::path& out_dir,
                                const ExperimentOptions& options) {
    config.validate();
    const auto dataset = load_dataset(config.dataset_path);
    fs::create_directories(out_dir);

    const Json resolved = to_json(config);
    const fs::path config_path = out_dir / "config.json";
    if (fs::exists(config_path)) {
        std::ifstream in(config_path);
        Json previous;
        try {
            previous = Json::parse(in);
        } catch (const Json::exception&) {
            throw ConfigError("--out", "existing config.json is unreadable");
        }
        // settings that do not change any record may differ between invocations
        auto outcome_relevant = [](Json j) {
            for (const char* k : {"max_concurrency", "score_mi", "endpoints"}) j.erase(k);
            return j;
        };
        if (outcome_relevant(previous) != outcome_relevant(resolved)) {
            throw ConfigError("--out", "directory holds a run with a different config");
        }
        write_json_file(config_path, resolved);
    } else {
        write_json_file(config_path, resolved);
    }

    const fs::path records_path = out_dir / "runrecords.jsonl";
    std::set<std::tuple<std::uint64_t, std::string, int>> done;
    if (fs::exists(records_path)) {
        for (const auto& r : read_run_records(records_path)) done.insert(r.key());
    }
    RunRecordWriter writer(records_path);
    ErrorLog errors{out_dir / "errors.jsonl", {}};

    const auto compress_tmpl = compress_template_for(config);
    ExperimentResult result;
    const std::size_t m = config.m_samples;

    for (const auto seed : config.seeds) {
        std::vector<std::pair<const QARecord*, std::vector<int>>> units;
        for (const auto idx : subsample_indices(dataset.size(), config.n_documents, seed)) {
            const QARecord& rec = dataset[idx];
            std::vector<int> pending;
            for (std::size_t j = 0; j < m; ++j) {
                if (!done.count({seed, rec.id, static_cast<int>(j)})) pending.push_back(static_cast<int>(j));
            }
            if (!pending.empty()) units.emplace_back(&rec, std::move(pending));
        }
        if (units.empty()) continue;

        const std::size_t outer = std::max<std::size_t>(1, std::min(config.max_concurrency, units.size()));
        const std::size_t inner = std::max<std::size_t>(1, config.max_concurrency / outer);
        std::optional<std::size_t> limit;
        if (options.stop_after_records) limit = *options.stop_after_records;
        OrderedSink sink(writer, units.size(), limit, result.records_written);

        parallel_map<int>(units.size(), outer, [&](std::size_t u) {
            const auto& [rec, pending] = units[u];
            const std::string ts_start = utc_timestamp_now();
            const auto comp = compress_samples(
                client, *rec, config.compressor.name, compress_tmpl, pending,
                CompressOptions{config.temperatures.compressor, config.max_output_tokens, config.conciseness, seed,
                                inner});
            std::vector<SampleJob> jobs;
            std::size_t next_ok = 0;
            for (const int j : pending) {
                SampleJob job{rec, j, std::nullopt, std::nullopt};
                if (next_ok < comp.samples.size() && comp.samples[next_ok].sample_index == j) {
                    job.sample = comp.samples[next_ok];
                    job.compressor_trace = comp.traces[next_ok];
                    ++next_ok;
                } else {
                    for (const auto& f : comp.failures) {
                        if (f.sample_index == j) errors.add(seed, rec->id, j, "compress", f.error);
                    }
                }
                jobs.push_back(std::move(job));
            }
            auto records = parallel_map<RunRecord>(jobs.size(), inner, [&](std::size_t k) {
                return evaluate_sample(config, client, jobs[k], seed, ts_start, errors);
            });
            sink.complete(u, std::move(records));
            return 0;
        });
    }

    result.summary = finalize_run(config, client, out_dir);
    result.records_total = result.summary.at("n_records").get<std::size_t>();
    return result;
}

std::vector<SeedMI> compute_run_mi(const RunConfig& config, LmClient& client, std::span<const RunRecord> records,
                                   const fs::path& run_dir) {
    const auto dataset = load_dataset(config.dataset_path);
    const auto tmpl = compress_template_for(config);
    std::vector<SeedMI> out;
    for (const auto seed : config.seeds) {
        SeedMI s;
        s.seed = seed;
        // records of this seed, grouped by record id in subsample (file) order
        std::map<std::string, std::vector<const RunRecord*>> by_id;
        for (const auto& r : records) {
            if (r.seed == seed) by_id[r.record_id].push_back(&r);
        }
        std::vector<QARecord> recs;
        std::vector<std::vector<CompressionSample>> samples;
        std::vector<std::int64_t> lengths;
        for (const auto idx : subsample_indices(dataset.size(), config.n_documents, seed)) {
            const QARecord& rec = dataset[idx];
            auto it = by_id.find(rec.id);
            if (it == by_id.end()) continue;
            auto rows = it->second;
            std::sort(rows.begin(), rows.end(),
                      [](const RunRecord* a, const RunRecord* b) { return a->sample_index < b->sample_index; });
            std::vector<CompressionSample> zs;
            for (const auto* r : rows) {
                if (r->compression_text.empty()) continue;
                zs.push_back(CompressionSample{r->record_id, r->sample_index, r->compression_text, r->output_tokens,
                                               0});
                lengths.push_back(std::max<std::int64_t>(1, r->output_tokens));
            }
            recs.push_back(rec);
            samples.push_back(std::move(zs));
        }
        const bool ragged = std::any_of(samples.begin(), samples.end(),
                                        [&](const auto& v) { return v.empty() || v.size() != samples[0].size(); });
        if (recs.size() < 2 || ragged) {
            s.error = "needs >= 2 records with equal, non-zero successful sample counts";
            out.push_back(std::move(s));
            continue;
        }
        const fs::path cache = run_dir / ("mi_matrix_seed" + std::to_string(seed) + ".jsonl");
        try {
            ScoreMatrix matrix;
            if (fs::exists(cache)) {
                matrix = read_matrix_cache(cache);
            } else {
                matrix = build_score_matrix(
                    recs, samples, config.proxy.name, client,
                    [&](const QARecord& ctx, const QARecord& q) {
                        return compression_prompt(tmpl, ctx, q, config.conciseness);
                    },
                    config.max_concurrency);
                write_matrix_cache(cache, matrix);
            }
            s.estimate = estimate_mi(matrix);
            s.rate = bit_efficiency(*s.estimate, lengths);
        } catch (const UnsupportedCapability& e) {
            s.error = e.what();
        } catch (const ContextOverflow& e) {
            s.error = e.what();
        }
        out.push_back(std::move(s));
    }
    return out;
}

Json summarize_run(const RunConfig& config, std::span<const RunRecord> records, const std::vector<SeedMI>& mi,
                   const fs::path& run_dir) {
    Json s;
    s["run_id"] = config.name;
    s["eval_mode"] = std::string(to_string(config.eval_mode));
    s["n_records"] = records.size();
    const std::size_t expected = config.seeds.size() * config.n_documents * config.m_samples;
    s["expected_records"] = expected;
    s["complete"] = records.size() == expected;

    // failure counts, deduplicated across resumed invocations
    std::map<std::string, std::set<std::string>> failures;
    if (std::ifstream in(run_dir / "errors.jsonl"); in) {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                const auto e = Json::parse(line);
                failures[e.at("stage").get<std::string>()].insert(std::to_string(e.at("seed").get<std::uint64_t>()) +
                                                                  "/" + e.at("record_id").get<std::string>() + "/" +
                                                                  std::to_string(e.at("sample_index").get<int>()));
            } catch (const Json::exception&) {
                // a torn last line from a crash
            }
        }
    }
    s["compression_failures"] = failures["compress"].size();
    s["prediction_failures"] = failures["predict"].size();
    s["judge_errors"] = failures["judge"].size();

    Json per_seed = Json::array();
    std::vector<double> seed_acc, seed_ppl, seed_tokens, seed_bits, seed_mi;
    const auto acc = aggregate(records, seed_key, correctness);
    const auto ppl = aggregate(records, seed_key, perplexity_value);
    const auto tokens = aggregate(records, seed_key, [](const RunRecord& r) -> std::optional<double> {
        if (r.compression_text.empty()) return std::nullopt;
        return static_cast<double>(r.output_tokens);
    });
    for (const auto seed : config.seeds) {
        const auto key = std::to_string(seed);
        Json row{{"seed", seed}};
        if (auto it = acc.find(key); it != acc.end()) {
            row["accuracy"] = it->second.mean;
            seed_acc.push_back(it->second.mean);
        }
        if (auto it = ppl.find(key); it != ppl.end()) {
            row["perplexity"] = it->second.mean;
            seed_ppl.push_back(it->second.mean);
        }
        if (auto it = tokens.find(key); it != tokens.end()) {
            row["mean_output_tokens"] = it->second.mean;
            seed_tokens.push_back(it->second.mean);
        }
        for (const auto& m : mi) {
            if (m.seed != seed) continue;
            if (m.estimate) {
                row["mi_nats"] = m.estimate->value_nats;
                row["mi_raw_nats"] = m.estimate->raw_nats;
                row["bits_per_token"] = m.rate->bits_per_token;
                seed_mi.push_back(m.estimate->value_nats);
                seed_bits.push_back(m.rate->bits_per_token);
            } else {
                row["mi_error"] = m.error;
            }
        }
        per_seed.push_back(row);
    }
    s["per_seed"] = per_seed;
    auto stat = [](const std::vector<double>& v) -> Json {
        if (v.empty()) return nullptr;
        return summarize(v);
    };
    s["accuracy"] = stat(seed_acc);
    s["perplexity"] = stat(seed_ppl);
    s["mean_output_tokens"] = stat(seed_tokens);
    s["mi_nats"] = stat(seed_mi);
    s["bits_per_token"] = stat(seed_bits);

    // compute and dollars
    double comp_flops = 0.0, total_flops = 0.0;
    std::size_t comp_gens = 0;
    std::vector<GenerationTrace> usage;
    for (const auto& r : records) {
        for (std::size_t k = 0; k < r.usage.size(); ++k) {
            const auto& u = r.usage[k];
            usage.push_back(u);
            const ModelSpec* spec = config.registry.find(u.model_name);
            if (!spec || u.output_tokens < 1) continue;
            const double f = flops_per_generation(*spec, u).per_generation;
            total_flops += f;
            if (k == 0 && !r.compression_text.empty()) {
                comp_flops += f;
                ++comp_gens;
            }
        }
    }
    s["flops"] = Json{{"compressor_per_generation_mean", comp_gens ? comp_flops / static_cast<double>(comp_gens) : 0.0},
                      {"total", total_flops},
                      {"includes_prefill", false}};
    try {
        s["cost"] = dollar_cost(usage, [&](const std::string& name) { return config.registry.find(name); });
    } catch (const ConfigError& e) {
        s["cost"] = Json{{"error", e.what()}};
    }
    return s;
}

Json finalize_run(const RunConfig& config, LmClient& client, const fs::path& run_dir) {
    const fs::path records_path = run_dir / "runrecords.jsonl";
    std::vector<RunRecord> records;
    if (fs::exists(records_path)) records = read_run_records(records_path);
    std::vector<SeedMI> mi;
    if (config.score_mi) mi = compute_run_mi(config, client, records, run_dir);
    const Json summary = summarize_run(config, records, mi, run_dir);
    write_json_file(run_dir / "summary.json", summary);

    std::vector<RatePoint> points;
    if (config.eval_mode == EvalMode::judge && summary["accuracy"].is_object() &&
        summary["bits_per_token"].is_object()) {
        RatePoint p;
        p.rate = summary["bits_per_token"]["mean"].get<double>();
        p.distortion = 1.0 - summary["accuracy"]["mean"].get<double>();
        p.stderr_d = summary["accuracy"]["stderr"].get<double>();
        p.label = config.compressor.name + "->" + config.predictor.name;
        points.push_back(p);
    }
    std::ofstream csv(run_dir / "points.csv", std::ios::trunc);
    write_points_csv(csv, points);
    return summary;
}

Json run_multi_turn_experiment(const RunConfig& config, LmClient& client, const fs::path& out_dir, std::size_t turns) {
    config.validate();
    if (turns < 1) throw ConfigError("--turns", "must be >= 1");
    const auto dataset = load_dataset(config.dataset_path);
    fs::create_directories(out_dir);
    write_json_file(out_dir / "config.json", to_json(config));

    std::ofstream out(out_dir / "multiturn.jsonl", std::ios::trunc);
    std::vector<double> seed_acc;
    Json per_seed = Json::array();
    for (const auto seed : config.seeds) {
        const auto idx = subsample_indices(dataset.size(), config.n_documents, seed);
        const auto rows = parallel_map<Json>(idx.size(), config.max_concurrency, [&](std::size_t k) {
            const QARecord& rec = dataset[idx[k]];
            const auto t = run_multi_turn(client, rec, config, turns, seed);
            bool correct = false;
            auto usage = t.usage();
            if (!t.prediction_failed) {
                try {
                    const auto jr = judge(client, t.prediction, rec.gold_answer, rec.query, config.judge.name,
                                          config.temperatures.judge);
                    correct = jr.judgment.correct;
                    usage.insert(usage.end(), jr.traces.begin(), jr.traces.end());
                } catch (const EvaluationError&) {
                    correct = false;
                }
            }
            Json turns_json = Json::array();
            for (const auto& step : t.turns) {
                turns_json.push_back(Json{{"query", step.query},
                                          {"compression_text", step.compression.text},
                                          {"output_tokens", step.compression.output_tokens}});
            }
            return Json{{"seed", seed},
                        {"record_id", rec.id},
                        {"turns", turns_json},
                        {"prediction", t.prediction},
                        {"prediction_failed", t.prediction_failed},
                        {"judgment", correct},
                        {"usage", usage}};
        });
        double correct = 0.0;
        for (const auto& r : rows) {
            out << r.dump() << '\n';
            correct += r["judgment"].get<bool>() ? 1.0 : 0.0;
        }
        const double acc = correct / static_cast<double>(rows.size());
        seed_acc.push_back(acc);
        per_seed.push_back(Json{{"seed", seed}, {"accuracy", acc}});
    }
    Json summary{{"run_id", config.name}, {"turns", turns}, {"per_seed", per_seed}, {"accuracy", summarize(seed_acc)}};
    write_json_file(out_dir / "summary.json", summary);
    return summary;
}

}  // namespace compresslab
