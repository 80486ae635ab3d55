#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "compresslab/config.hpp"
#include "compresslab/dataset.hpp"
#include "compresslab/errors.hpp"
#include "compresslab/json_extract.hpp"
#include "compresslab/prompts.hpp"
#include "compresslab/rng.hpp"
#include "compresslab/run_record.hpp"
#include "test_util.hpp"

using namespace compresslab;

namespace {

std::string dataset_line(const std::string& id, const std::string& ctx = "some context") {
    return Json{{"id", id}, {"context", ctx}, {"query", "q?"}, {"gold_answer", "a"}}.dump() + "\n";
}

}  // namespace

TEST(Dataset, PreservesFileOrder) {
    std::istringstream in(dataset_line("b") + dataset_line("a"));
    const auto recs = parse_dataset(in);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[0].id, "b");
    EXPECT_EQ(recs[1].id, "a");
}

TEST(Dataset, MissingContextNamesLineAndKey) {
    std::istringstream in(R"({"id":"x","query":"q","gold_answer":"a"})" "\n");
    try {
        parse_dataset(in);
        FAIL() << "expected DatasetError";
    } catch (const DatasetError& e) {
        EXPECT_EQ(e.line(), 1u);
        EXPECT_NE(std::string(e.what()).find("context"), std::string::npos);
    }
}

TEST(Dataset, DuplicateIdRejected) {
    std::istringstream in(dataset_line("a") + dataset_line("a"));
    try {
        parse_dataset(in);
        FAIL();
    } catch (const DatasetError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Dataset, MalformedLineCarriesLineNumber) {
    std::istringstream in(dataset_line("a") + "\n{not json\n");
    try {
        parse_dataset(in);
        FAIL();
    } catch (const DatasetError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Dataset, EmptyContextRejected) {
    std::istringstream in(dataset_line("a", ""));
    EXPECT_THROW(parse_dataset(in), DatasetError);
}

TEST(Dataset, RoundTrip) {
    std::vector<QARecord> recs;
    for (int k = 0; k < 20; ++k) {
        recs.push_back({"r" + std::to_string(k), "ctx \"quoted\" \n line " + std::to_string(k), "q" + std::to_string(k),
                        "g", k % 2 ? "tag" : ""});
    }
    TempDir dir;
    save_dataset(dir / "d.jsonl", recs);
    EXPECT_EQ(load_dataset(dir / "d.jsonl"), recs);
}

TEST(Dataset, ExampleFileLoadsTwentyRecords) {
    const auto recs = load_dataset(std::filesystem::path(EXAMPLES_DATA_DIR) / "dataset.jsonl");
    EXPECT_GE(recs.size(), 20u);
}

TEST(ExtractJson, StripsFences) {
    EXPECT_EQ(extract_json("```json\n{\"a\":1}\n```"), Json({{"a", 1}}));
}

TEST(ExtractJson, FirstBalancedObject) {
    EXPECT_EQ(extract_json("noise {\"answer\": \"x\"} trailing"), Json({{"answer", "x"}}));
}

TEST(ExtractJson, NestedObjectIntact) {
    EXPECT_EQ(extract_json("{\"a\": {\"b\":2}}"), Json::parse(R"({"a":{"b":2}})"));
}

TEST(ExtractJson, BracesInsideStringsIgnored) {
    EXPECT_EQ(extract_json(R"(x {"a": "}{", "b": "\"}"} y {"c":1})"), Json::parse(R"({"a":"}{","b":"\"}"})"));
}

TEST(ExtractJson, NoObject) {
    EXPECT_THROW(extract_json("no json here"), NoJsonFound);
    EXPECT_THROW(extract_json("{ unbalanced"), NoJsonFound);
}

TEST(ExtractJson, MalformedReportsOffset) {
    try {
        extract_json("abc {\"a\": tru}");
        FAIL();
    } catch (const MalformedJson& e) {
        EXPECT_GE(e.offset(), 4u);
    }
}

TEST(ExtractJson, IdempotentOnSerialization) {
    for (const char* text : {"```\n{\"a\":[1,2,{\"b\":null}]}\n```", "pre {\"x\":\"y{z}\"} post", "{}"}) {
        const Json first = extract_json(text);
        EXPECT_EQ(extract_json(first.dump()), first) << text;
    }
}

TEST(Rng, SameSeedAndLabelRepeat) {
    auto a = seeded_rng(7, "compress");
    auto b = seeded_rng(7, "compress");
    for (int k = 0; k < 10; ++k) EXPECT_EQ(a(), b());
}

TEST(Rng, LabelsAndSeedsSeparate) {
    auto a = seeded_rng(7, "compress");
    auto b = seeded_rng(7, "judge");
    auto c = seeded_rng(8, "compress");
    std::vector<std::uint64_t> va, vb, vc;
    for (int k = 0; k < 10; ++k) {
        va.push_back(a());
        vb.push_back(b());
        vc.push_back(c());
    }
    EXPECT_NE(va, vb);
    EXPECT_NE(va, vc);
}

TEST(Rng, HelpersInRange) {
    auto r = seeded_rng(1, "x");
    for (int k = 0; k < 1000; ++k) {
        const double u = r.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        EXPECT_LT(r.below(7), 7u);
    }
}

TEST(Rng, StableHashIsFnv1a) {
    // published FNV-1a 64 test vectors
    EXPECT_EQ(stable_hash(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(stable_hash("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(stable_hash("foobar"), 0x85944171f73967e8ULL);
}

namespace {

RunRecord sample_record(int j) {
    RunRecord r;
    r.run_id = "run";
    r.seed = 3;
    r.record_id = "doc";
    r.sample_index = j;
    r.compression_text = "z \"quoted\"\n";
    r.output_tokens = 5;
    r.prediction = "p";
    r.judgment = j % 2 == 0;
    r.usage = {{"c", 10, 5}, {"p", 7, 2}};
    r.ts_start = "2024-01-01T00:00:00.000Z";
    r.ts_end = "2024-01-01T00:00:01.000Z";
    return r;
}

}  // namespace

TEST(RunRecord, FieldOrderIsCanonical) {
    const std::string line = to_jsonl_line(sample_record(0));
    const std::vector<std::string> keys{"run_id",     "seed",       "record_id", "sample_index",
                                        "compression_text", "output_tokens", "prediction", "judgment",
                                        "perplexity", "usage",      "ts_start",  "ts_end"};
    std::size_t pos = 0;
    for (const auto& k : keys) {
        const auto at = line.find("\"" + k + "\"", pos);
        ASSERT_NE(at, std::string::npos) << k;
        pos = at;
    }
    EXPECT_EQ(line.find('\n'), std::string::npos);
}

TEST(RunRecord, RoundTripAndTornTail) {
    TempDir dir;
    const auto path = dir / "runrecords.jsonl";
    {
        RunRecordWriter w(path);
        w.append(sample_record(0));
        w.append(sample_record(1));
    }
    {
        std::ofstream out(path, std::ios::app);
        out << "{\"run_id\":\"run\",\"seed\":";  // crash mid-append
    }
    auto recs = read_run_records(path);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(to_jsonl_line(recs[1]), to_jsonl_line(sample_record(1)));
    EXPECT_FALSE(recs[0].perplexity.has_value());

    {
        RunRecordWriter w(path);  // truncates the torn line
        w.append(sample_record(2));
    }
    recs = read_run_records(path);
    ASSERT_EQ(recs.size(), 3u);
    EXPECT_EQ(recs[2].sample_index, 2);
}

TEST(RunRecord, CorruptMiddleLineThrows) {
    TempDir dir;
    const auto path = dir / "r.jsonl";
    write_text(path, to_jsonl_line(sample_record(0)) + "garbage\n" + to_jsonl_line(sample_record(1)));
    EXPECT_THROW(read_run_records(path), DatasetError);
}

TEST(RunRecord, BothEvaluationsRejected) {
    auto j = Json::parse(to_jsonl_line(sample_record(0)));
    j["perplexity"] = 2.0;
    EXPECT_THROW(run_record_from_json(j), Error);
}

namespace {

Json minimal_config() {
    return Json::parse(R"({
        "dataset_path": "data.jsonl",
        "models": [
            {"name": "small", "family": "qwen", "n_params": 7000000000, "n_layer": 28, "d_attn": 3584,
             "price_in": 0.1, "price_out": 0.2},
            {"name": "big", "family": "gpt", "n_params": 100000000000, "n_layer": 80, "d_attn": 8192,
             "price_in": 2.5, "price_out": 10.0}
        ],
        "compressor": "small",
        "predictor": "big",
        "judge": "big"
    })");
}

}  // namespace

TEST(Config, DefaultsAndResolution) {
    const auto c = parse_run_config(minimal_config(), "/base");
    EXPECT_EQ(c.dataset_path, std::filesystem::path("/base/data.jsonl"));
    EXPECT_EQ(c.compressor.name, "small");
    EXPECT_EQ(c.proxy.name, "small");
    EXPECT_EQ(c.n_documents, 20u);
    EXPECT_EQ(c.m_samples, 20u);
    EXPECT_EQ(c.seeds.size(), 5u);
    EXPECT_DOUBLE_EQ(c.temperatures.compressor, 0.7);
    EXPECT_DOUBLE_EQ(c.temperatures.predictor, 0.6);
    EXPECT_EQ(c.max_output_tokens, 4096);
}

TEST(Config, InvariantsNameField) {
    auto expect_field = [](Json j, const std::string& field) {
        try {
            parse_run_config(j, "/");
            FAIL() << field;
        } catch (const ConfigError& e) {
            EXPECT_EQ(e.field(), field);
        }
    };
    auto j = minimal_config();
    j["n_documents"] = 1;
    expect_field(j, "n_documents");
    j = minimal_config();
    j["m_samples"] = 0;
    expect_field(j, "m_samples");
    j = minimal_config();
    j["seeds"] = Json::array();
    expect_field(j, "seeds");
    j = minimal_config();
    j["conciseness"] = "short";
    expect_field(j, "conciseness");
    j = minimal_config();
    j["predictor"] = "nope";
    expect_field(j, "predictor");
    j = minimal_config();
    j["models"][0]["n_params"] = 0;
    expect_field(j, "small.n_params");
}

TEST(Config, JsonRoundTrip) {
    auto j = minimal_config();
    j["endpoints"] = Json::parse(R"({"default": {"kind": "simulated"}, "big": {"kind": "http", "base_url": "http://h:1/v1"}})");
    const auto c = parse_run_config(j, "/base");
    const auto again = parse_run_config(to_json(c), "/elsewhere");
    EXPECT_EQ(to_json(again), to_json(c));
    EXPECT_EQ(again.default_endpoint.kind, "simulated");
    EXPECT_EQ(again.endpoints.at("big").base_url, "http://h:1/v1");
}

TEST(Config, MissingFileIsConfigError) {
    EXPECT_THROW(load_run_config("/definitely/not/here.json"), ConfigError);
}

TEST(Prompts, BuiltinsCarryRequiredPlaceholders) {
    for (auto role : {PromptRole::compress_query_specific, PromptRole::compress_memory,
                      PromptRole::compress_query_agnostic, PromptRole::predict_base, PromptRole::predict_memory,
                      PromptRole::judge, PromptRole::follow_up, PromptRole::research_plan,
                      PromptRole::source_extraction, PromptRole::research_synthesis, PromptRole::qa_memory_style,
                      PromptRole::qa_web_style}) {
        EXPECT_NO_THROW(PromptTemplate::builtin(role).validate()) << to_string(role);
    }
}

TEST(Prompts, RenderIsSinglePass) {
    const PromptTemplate t{PromptRole::predict_base, "Q={query} S={summary} {other}"};
    const auto out = t.render({{"query", "{summary}"}, {"summary", "x"}});
    EXPECT_EQ(out, "Q={summary} S=x {other}");
}

TEST(Prompts, MissingPlaceholderRejected) {
    const PromptTemplate t{PromptRole::predict_base, "Q={query}"};
    EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Prompts, ConcisenessInstructions) {
    EXPECT_NE(conciseness_instruction(Conciseness::concise3).find("3 sentences"), std::string::npos);
    EXPECT_NE(conciseness_instruction(Conciseness::normal6).find("6 sentences"), std::string::npos);
    EXPECT_NE(conciseness_instruction(Conciseness::elaborate9).find("9 sentences"), std::string::npos);
    EXPECT_TRUE(conciseness_instruction(Conciseness::unconstrained).empty());
}
