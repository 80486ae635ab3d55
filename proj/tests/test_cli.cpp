#include <gtest/gtest.h>

#include <sstream>

#include "compresslab/cli.hpp"
#include "compresslab/types.hpp"
#include "test_util.hpp"

using namespace compresslab;
namespace fs = std::filesystem;

namespace {

const fs::path kData(EXAMPLES_DATA_DIR);
const fs::path kGolden(GOLDEN_DIR);

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

// A run config over the example dataset with a simulated endpoint.
fs::path write_config(const TempDir& dir, const std::string& name, const std::string& compressor,
                      const std::string& predictor) {
    Json j = Json::parse(read_text(kData / "run_config.json"));
    j["name"] = name;
    j["registry"] = (kData / "models.json").string();
    j["dataset_path"] = (kData / "dataset.jsonl").string();
    j["compressor"] = compressor;
    j["proxy"] = compressor;
    j["predictor"] = predictor;
    j["score_mi"] = false;
    const fs::path p = dir / (name + ".json");
    write_text(p, j.dump(2));
    return p;
}

}  // namespace

TEST(Cli, HelpMatchesGolden) {
    const auto top = cli({"--help"});
    EXPECT_EQ(top.code, 0);
    EXPECT_EQ(top.out, read_text(kGolden / "help.txt"));
    const auto all = cli({"--help-all"});
    EXPECT_EQ(all.code, 0);
    EXPECT_EQ(all.out, read_text(kGolden / "help_all.txt"));
}

TEST(Cli, HelpEnumeratesEveryFlag) {
    const auto all = cli({"--help-all"}).out;
    for (const char* flag : {"--config", "--out", "--seed", "--max-concurrency", "--include-prefill", "--top-k",
                             "--turns", "--conciseness", "--run-dir", "--run-dirs", "--points", "--task", "--family",
                             "--ridge", "--weighted", "--verbose"}) {
        EXPECT_NE(all.find(flag), std::string::npos) << flag;
    }
    for (const char* sub : {"run", "mi", "fit-rd", "cost", "glm", "deepresearch", "oracle-check"}) {
        EXPECT_NE(all.find(sub), std::string::npos) << sub;
    }
    const auto sub = cli({"cost", "--help"});
    EXPECT_EQ(sub.code, 0);
    EXPECT_NE(sub.out.find("--include-prefill"), std::string::npos);
}

TEST(Cli, ParseErrorsExitTwo) {
    EXPECT_EQ(cli({}).code, kExitInvalid);
    EXPECT_EQ(cli({"frobnicate"}).code, kExitInvalid);
    EXPECT_EQ(cli({"run"}).code, kExitInvalid);  // --config required
    EXPECT_EQ(cli({"run", "--config", "x.json", "--turns", "0"}).code, kExitInvalid);
    EXPECT_EQ(cli({"run", "--config", "x.json", "--bogus"}).code, kExitInvalid);
}

TEST(Cli, MissingConfigExitsTwo) {
    const auto r = cli({"run", "--config", "/nonexistent/config.json"});
    EXPECT_EQ(r.code, kExitInvalid);
    EXPECT_NE(r.err.find("--config"), std::string::npos);
}

TEST(Cli, InvalidFieldNamed) {
    TempDir dir;
    Json j = Json::parse(read_text(kData / "run_config.json"));
    j["registry"] = (kData / "models.json").string();
    j["dataset_path"] = (kData / "dataset.jsonl").string();
    j["n_documents"] = 1;
    write_text(dir / "bad.json", j.dump());
    const auto r = cli({"run", "--config", (dir / "bad.json").string(), "--out", (dir / "o").string()});
    EXPECT_EQ(r.code, kExitInvalid);
    EXPECT_NE(r.err.find("n_documents"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "o"));

    j["n_documents"] = 4;
    j["conciseness"] = "terse";
    write_text(dir / "bad2.json", j.dump());
    EXPECT_EQ(cli({"run", "--config", (dir / "bad2.json").string()}).code, kExitInvalid);
}

TEST(Cli, RuntimeFailureExitsOne) {
    TempDir dir;
    write_text(dir / "pts.csv", "rate,distortion\n0,0.5\n1,0.4\n");  // too few points
    const auto r = cli({"fit-rd", "--points", (dir / "pts.csv").string()});
    EXPECT_EQ(r.code, kExitRuntime);
    EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
}

TEST(Cli, RunMiCostEndToEnd) {
    TempDir dir;
    const auto run_dir = dir / "run";
    const auto r = cli({"run", "--config", (kData / "run_config.json").string(), "--out", run_dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("records 24 (24 new)"), std::string::npos) << r.out;
    for (const char* f : {"config.json", "runrecords.jsonl", "summary.json", "points.csv"}) {
        EXPECT_TRUE(fs::exists(run_dir / f)) << f;
    }
    const auto summary = Json::parse(read_text(run_dir / "summary.json"));
    EXPECT_EQ(summary["n_records"], 24);
    EXPECT_TRUE(summary["bits_per_token"].is_object());

    // rerun resumes: nothing new
    const auto again = cli({"run", "--config", (kData / "run_config.json").string(), "--out", run_dir.string()});
    EXPECT_NE(again.out.find("(0 new)"), std::string::npos);

    const auto mi = cli({"mi", "--run-dir", run_dir.string()});
    ASSERT_EQ(mi.code, 0) << mi.err;
    EXPECT_EQ(mi.out.substr(0, mi.out.find('\n')), "seed,mi_nats,raw_nats,bound_nats,bits_per_token");
    EXPECT_TRUE(fs::exists(run_dir / "mi_matrix_seed0.jsonl"));

    const auto cost = cli({"cost", "--run-dir", run_dir.string(), "--include-prefill"});
    ASSERT_EQ(cost.code, 0) << cost.err;
    EXPECT_NE(cost.out.find("gpt-4o,"), std::string::npos);
    const auto cj = Json::parse(read_text(run_dir / "cost.json"));
    EXPECT_TRUE(cj["includes_prefill"].get<bool>());
    EXPECT_GT(cj["cost"]["total_usd"].get<double>(), 0.0);

    const auto one_seed = cli({"run", "--config", (kData / "run_config.json").string(), "--out",
                               (dir / "s1").string(), "--seed", "1", "--conciseness", "concise3"});
    ASSERT_EQ(one_seed.code, 0) << one_seed.err;
    EXPECT_NE(one_seed.out.find("records 12"), std::string::npos);
}

TEST(Cli, MultiTurnRun) {
    TempDir dir;
    const auto r = cli({"run", "--config", (kData / "run_config.json").string(), "--out", (dir / "mt").string(),
                        "--turns", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "mt" / "multiturn.jsonl"));
}

TEST(Cli, GlmOverSeveralRuns) {
    TempDir dir;
    std::vector<std::string> args{"glm", "--run-dirs"};
    const std::vector<std::pair<std::string, std::string>> pairs{
        {"qwen-7b", "gpt-4o"}, {"llama-8b", "gpt-4o"}, {"qwen-1.5b", "gpt-4o"}, {"qwen-7b", "llama-8b"}};
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto name = "r" + std::to_string(k);
        const auto cfg = write_config(dir, name, pairs[k].first, pairs[k].second);
        ASSERT_EQ(cli({"run", "--config", cfg.string(), "--out", (dir / name).string()}).code, 0);
        args.push_back((dir / name).string());
    }
    args.insert(args.end(), {"--out", (dir / "glm").string(), "--ridge", "1e-6"});
    const auto r = cli(args);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "feature,coefficient,stderr,ci95_low,ci95_high,p_value,significant");
    EXPECT_TRUE(fs::exists(dir / "glm" / "glm_coefficients.csv"));
    EXPECT_EQ(Json::parse(read_text(dir / "glm" / "glm.json"))["n_obs"], 96);
}

TEST(Cli, FitRdExample) {
    TempDir dir;
    const auto r = cli({"fit-rd", "--points", (kData / "points.csv").string(), "--out", (dir / "fit").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto fit = Json::parse(read_text(dir / "fit" / "rd_fit.json"));
    EXPECT_NEAR(fit["c"].get<double>(), 0.7, 1e-4);
    EXPECT_NEAR(fit["b"].get<double>(), 1.5, 1e-4);
    EXPECT_NEAR(fit["d0"].get<double>(), 0.2, 1e-4);
    EXPECT_TRUE(fs::exists(dir / "fit" / "rd_fit.csv"));
    EXPECT_EQ(cli({"fit-rd", "--points", (kData / "points.csv").string(), "--weighted"}).code, 0);
}

TEST(Cli, DeepResearchExample) {
    TempDir dir;
    const auto r = cli({"deepresearch", "--task", (kData / "task.json").string(), "--config",
                        (kData / "deepresearch_config.json").string(), "--out", (dir / "dr").string(), "--top-k",
                        "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("subtasks 8"), std::string::npos);
    for (const char* f : {"report.md", "cost.json", "trace.jsonl"}) EXPECT_TRUE(fs::exists(dir / "dr" / f)) << f;
    const auto cost = Json::parse(read_text(dir / "dr" / "cost.json"));
    EXPECT_EQ(cost["line_items"].size(), 1u);

    write_text(dir / "empty.json", R"({"task": ""})");
    EXPECT_EQ(cli({"deepresearch", "--task", (dir / "empty.json").string(), "--config",
                   (kData / "deepresearch_config.json").string()})
                  .code,
              kExitInvalid);
}

TEST(Cli, OracleCheck) {
    const auto r = cli({"oracle-check", "--seed", "3"});
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}
