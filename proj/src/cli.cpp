#include "compresslab/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "compresslab/analysis.hpp"
#include "compresslab/config.hpp"
#include "compresslab/cost_model.hpp"
#include "compresslab/deep_research.hpp"
#include "compresslab/errors.hpp"
#include "compresslab/experiment.hpp"
#include "compresslab/http_client.hpp"
#include "compresslab/oracle_suite.hpp"
#include "compresslab/rate_distortion.hpp"
#include "compresslab/run_record.hpp"

namespace compresslab {

namespace fs = std::filesystem;

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> max_concurrency;
    bool include_prefill = false;
    std::optional<std::size_t> top_k;
    std::size_t turns = 1;
    std::string conciseness;
    std::string run_dir;
    std::string points;
    std::vector<std::string> run_dirs;
    std::string task;
    std::string family = "qwen";
    double ridge = 0.0;
    bool weighted = false;
    bool verbose = false;
};

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot write " + path.string());
    f << text;
}

RunConfig load_run_dir_config(const fs::path& run_dir) {
    const fs::path path = run_dir / "config.json";
    if (!fs::exists(path)) throw ConfigError("--run-dir", "no config.json in " + run_dir.string());
    return load_run_config(path);
}

std::shared_ptr<ResilientClient> client_for(const RunConfig& c) {
    return make_endpoint_client(c.endpoints, c.default_endpoint, c.max_concurrency);
}

int cmd_run(const Flags& f, std::ostream& out, std::ostream& err) {
    RunConfig config = load_run_config(f.config);
    if (f.seed) config.seeds = {*f.seed};
    if (f.max_concurrency) config.max_concurrency = *f.max_concurrency;
    if (!f.conciseness.empty()) config.conciseness = parse_conciseness(f.conciseness);
    config.validate();
    const fs::path out_dir = f.out.empty() ? fs::path("runs") / config.name : fs::path(f.out);
    auto client = client_for(config);
    if (f.turns > 1) {
        const Json s = run_multi_turn_experiment(config, *client, out_dir, f.turns);
        out << "multi-turn run (" << f.turns << " turns) written to " << out_dir.string() << '\n';
        out << "accuracy " << s["accuracy"]["mean"].get<double>() << " +/- " << s["accuracy"]["stderr"].get<double>()
            << '\n';
        return kExitOk;
    }
    if (f.verbose) err << "running " << config.seeds.size() << " seed(s) into " << out_dir.string() << '\n';
    const auto result = run_experiment(config, *client, out_dir);
    const auto& s = result.summary;
    out << "records " << result.records_total << " (" << result.records_written << " new) in " << out_dir.string()
        << '\n';
    if (s["accuracy"].is_object()) {
        out << "accuracy " << s["accuracy"]["mean"].get<double>() << " +/- " << s["accuracy"]["stderr"].get<double>()
            << '\n';
    }
    if (s["perplexity"].is_object()) out << "perplexity " << s["perplexity"]["mean"].get<double>() << '\n';
    if (s["bits_per_token"].is_object()) out << "bits/token " << s["bits_per_token"]["mean"].get<double>() << '\n';
    return kExitOk;
}

int cmd_mi(const Flags& f, std::ostream& out, std::ostream&) {
    const fs::path run_dir(f.run_dir);
    RunConfig config = load_run_dir_config(run_dir);
    config.score_mi = true;
    if (f.max_concurrency) config.max_concurrency = *f.max_concurrency;
    const fs::path out_dir = f.out.empty() ? run_dir : fs::path(f.out);
    fs::create_directories(out_dir);
    const auto records = read_run_records(run_dir / "runrecords.jsonl");
    auto client = client_for(config);
    const auto mi = compute_run_mi(config, *client, records, out_dir);
    const Json summary = summarize_run(config, records, mi, run_dir);
    write_file(out_dir / "summary.json", summary.dump(2) + "\n");

    out << "seed,mi_nats,raw_nats,bound_nats,bits_per_token\n";
    Json table = Json::array();
    for (const auto& s : mi) {
        if (!s.estimate) {
            out << s.seed << ",,,," << " # " << s.error << '\n';
            continue;
        }
        out << s.seed << ',' << s.estimate->value_nats << ',' << s.estimate->raw_nats << ','
            << s.estimate->bound_nats << ',' << s.rate->bits_per_token << '\n';
    }
    std::vector<RatePoint> points;
    if (summary["accuracy"].is_object() && summary["bits_per_token"].is_object()) {
        points.push_back(RatePoint{summary["bits_per_token"]["mean"].get<double>(),
                                   1.0 - summary["accuracy"]["mean"].get<double>(),
                                   config.compressor.name + "->" + config.predictor.name,
                                   summary["accuracy"]["stderr"].get<double>()});
    }
    std::ofstream csv(out_dir / "points.csv", std::ios::trunc);
    write_points_csv(csv, points);
    return kExitOk;
}

int cmd_fit_rd(const Flags& f, std::ostream& out, std::ostream&) {
    const auto points = read_points_csv(f.points);
    FitOptions opt;
    opt.weighted = f.weighted;
    const DecayFit fit = fit_decay(points, opt);
    const Json j = fit;
    out << j.dump(2) << '\n';
    if (!fit.converged) out << "warning: fit stopped at the iteration cap\n";
    if (!f.out.empty()) {
        const fs::path dir(f.out);
        write_file(dir / "rd_fit.json", j.dump(2) + "\n");
        std::ostringstream csv;
        write_fit_csv(csv, points, fit);
        write_file(dir / "rd_fit.csv", csv.str());
    }
    return kExitOk;
}

int cmd_cost(const Flags& f, std::ostream& out, std::ostream&) {
    const fs::path run_dir(f.run_dir);
    const RunConfig config = load_run_dir_config(run_dir);
    const auto records = read_run_records(run_dir / "runrecords.jsonl");

    struct Acc {
        std::size_t generations = 0;
        double flops = 0.0;
    };
    std::map<std::string, Acc> per_model;
    std::vector<GenerationTrace> usage;
    for (const auto& r : records) {
        for (const auto& u : r.usage) {
            usage.push_back(u);
            if (u.output_tokens < 1) continue;
            const ModelSpec& spec = config.registry.at(u.model_name);
            auto& a = per_model[u.model_name];
            a.flops += flops_per_generation(spec, u, f.include_prefill).per_generation;
            ++a.generations;
        }
    }
    const CostReport cost = dollar_cost(usage, [&](const std::string& m) { return config.registry.find(m); });

    Json flops = Json::object();
    double total = 0.0;
    for (const auto& [name, a] : per_model) {
        flops[name] = Json{{"generations", a.generations},
                           {"total_flops", a.flops},
                           {"mean_flops_per_generation", a.flops / static_cast<double>(a.generations)}};
        total += a.flops;
    }
    const Json report{{"includes_prefill", f.include_prefill}, {"flops", flops}, {"total_flops", total}, {"cost", cost}};
    out << "model,generations,mean_flops_per_generation,input_tokens,output_tokens,usd\n";
    for (const auto& [name, a] : per_model) {
        const auto& mc = cost.per_model.at(name);
        out << name << ',' << a.generations << ',' << std::setprecision(6) << a.flops / static_cast<double>(a.generations)
            << ',' << mc.input_tokens << ',' << mc.output_tokens << ',' << std::setprecision(6) << mc.usd << '\n';
    }
    out << "total_usd," << cost.total_usd() << '\n';
    write_file((f.out.empty() ? run_dir : fs::path(f.out)) / "cost.json", report.dump(2) + "\n");
    return kExitOk;
}

int cmd_glm(const Flags& f, std::ostream& out, std::ostream&) {
    std::vector<FeatureRow> rows;
    for (const auto& dir : f.run_dirs) {
        const RunConfig config = load_run_dir_config(dir);
        const auto records = read_run_records(fs::path(dir) / "runrecords.jsonl");
        const auto r = feature_rows(records, config.compressor, config.predictor, f.family);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    GlmOptions opt;
    opt.ridge = f.ridge;
    const GLMFit fit = fit_logistic(rows, opt);
    std::ostringstream csv;
    write_coefficients_csv(csv, fit);
    out << csv.str();
    if (!fit.converged) out << "warning: IRLS did not converge\n";
    if (fit.separation) out << "warning: data look perfectly separated; coefficients are unreliable\n";
    if (!f.out.empty()) {
        write_file(fs::path(f.out) / "glm_coefficients.csv", csv.str());
        write_file(fs::path(f.out) / "glm.json", Json(fit).dump(2) + "\n");
    }
    return kExitOk;
}

int cmd_deepresearch(const Flags& f, std::ostream& out, std::ostream& err) {
    std::ifstream tf(f.task);
    if (!tf) throw ConfigError("--task", "cannot open " + f.task);
    std::string task;
    try {
        const Json j = Json::parse(tf);
        task = j.at("task").get<std::string>();
    } catch (const Json::exception& e) {
        throw ConfigError("--task", std::string("expected {\"task\": \"...\"}: ") + e.what());
    }
    if (task.empty()) throw ConfigError("--task", "task is empty");
    DeepResearchConfig config = load_deep_research_config(f.config);
    if (f.top_k) config.options.top_k = *f.top_k;
    if (f.max_concurrency) config.options.max_concurrency = *f.max_concurrency;
    if (config.options.top_k < 1) throw ConfigError("--top-k", "must be >= 1");
    const fs::path out_dir = f.out.empty() ? fs::path("deepresearch") : fs::path(f.out);
    auto client = make_endpoint_client(config.endpoints, config.default_endpoint, config.options.max_concurrency);
    auto search = make_search_client(config);
    if (f.verbose) err << "planning with " << config.predictor.name << '\n';
    const auto result = run_deep_research(task, config, *client, *search, out_dir);
    const auto relevant = std::count_if(result.extractions.begin(), result.extractions.end(),
                                        [](const Extraction& e) { return e.relevant; });
    out << "subtasks " << result.extractions.size() << " (" << relevant << " relevant)\n";
    out << "total_usd " << result.report.cost.total_usd() << '\n';
    out << "report " << (out_dir / "report.md").string() << '\n';
    return kExitOk;
}

int cmd_oracle_check(const Flags& f, std::ostream& out, std::ostream&) {
    return print_checks(out, run_oracle_suite(f.seed.value_or(0))) ? kExitOk : kExitRuntime;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Compressor-predictor experiments: information-theoretic evaluation of LM summarizers.",
                 "compresslab"};
    app.require_subcommand(1, 1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    app.fallthrough();
    Flags f;
    app.add_flag("-v,--verbose", f.verbose, "Progress messages on stderr");

    auto* run = app.add_subcommand("run", "Compress, predict and evaluate over seeds; resumable");
    run->add_option("--config", f.config, "Run config JSON")->required();
    run->add_option("--out", f.out, "Output directory (default runs/<name>)");
    run->add_option("--seed", f.seed, "Run only this seed");
    run->add_option("--max-concurrency", f.max_concurrency, "Maximum in-flight endpoint calls")
        ->check(CLI::PositiveNumber);
    run->add_option("--conciseness", f.conciseness, "concise3 | normal6 | elaborate9 | unconstrained");
    run->add_option("--turns", f.turns, "Compressor-predictor rounds per record (default 1)")->check(CLI::PositiveNumber);

    auto* mi = app.add_subcommand("mi", "Estimate mutual information and bit efficiency of a finished run");
    mi->add_option("--run-dir", f.run_dir, "Directory written by `run`")->required();
    mi->add_option("--out", f.out, "Output directory (default the run directory)");
    mi->add_option("--max-concurrency", f.max_concurrency, "Maximum in-flight scoring calls")
        ->check(CLI::PositiveNumber);

    auto* rd = app.add_subcommand("fit-rd", "Fit D(R) = C exp(-bR) + D0 to rate-distortion points");
    rd->add_option("--points", f.points, "CSV with rate,distortion[,label,stderr_d]")->required();
    rd->add_option("--out", f.out, "Write rd_fit.json and rd_fit.csv here");
    rd->add_flag("--weighted", f.weighted, "Weight points by 1/stderr_d^2");

    auto* cost = app.add_subcommand("cost", "FLOPs and dollar cost of a run");
    cost->add_option("--run-dir", f.run_dir, "Directory written by `run`")->required();
    cost->add_option("--out", f.out, "Output directory (default the run directory)");
    cost->add_flag("--include-prefill", f.include_prefill, "Add prompt-processing FLOPs");

    auto* glm = app.add_subcommand("glm", "Logistic regression of correctness on run features");
    glm->add_option("--run-dirs", f.run_dirs, "One or more run directories")->required()->expected(1, -1);
    glm->add_option("--out", f.out, "Write glm.json and glm_coefficients.csv here");
    glm->add_option("--family", f.family, "Compressor family coded as 1 by the indicator (default qwen)");
    glm->add_option("--ridge", f.ridge, "Ridge penalty on non-intercept coefficients")->check(CLI::NonNegativeNumber);

    auto* dr = app.add_subcommand("deepresearch", "Decompose, search and summarize, then synthesize a report");
    dr->add_option("--task", f.task, "JSON file {\"task\": \"...\"}")->required();
    dr->add_option("--config", f.config, "Deep research config JSON")->required();
    dr->add_option("--out", f.out, "Output directory (default deepresearch)");
    dr->add_option("--top-k", f.top_k, "Search results per query (default 3)")->check(CLI::PositiveNumber);
    dr->add_option("--max-concurrency", f.max_concurrency, "Maximum in-flight endpoint calls")
        ->check(CLI::PositiveNumber);

    auto* oc = app.add_subcommand("oracle-check", "Validate the MI estimator on synthetic channels");
    oc->add_option("--seed", f.seed, "Seed of the random channels (default 0)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        // subcommand --help arrives here as CallForHelp raised inside the subcommand
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kExitOk;
        }
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }

    try {
        if (run->parsed()) return cmd_run(f, out, err);
        if (mi->parsed()) return cmd_mi(f, out, err);
        if (rd->parsed()) return cmd_fit_rd(f, out, err);
        if (cost->parsed()) return cmd_cost(f, out, err);
        if (glm->parsed()) return cmd_glm(f, out, err);
        if (dr->parsed()) return cmd_deepresearch(f, out, err);
        if (oc->parsed()) return cmd_oracle_check(f, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitInvalid;
}

}  // namespace compresslab
