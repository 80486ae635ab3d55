#include "compresslab/scripted_client.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <thread>

#include "compresslab/errors.hpp"
#include "compresslab/rng.hpp"

namespace compresslab {

class ScriptedClient::InFlight {
public:
    explicit InFlight(ScriptedClient& c) : c_(c) {
        const auto now = ++c_.in_flight_;
        auto peak = c_.peak_.load();
        while (now > peak && !c_.peak_.compare_exchange_weak(peak, now)) {
        }
        if (c_.latency_.count() > 0) std::this_thread::sleep_for(c_.latency_);
    }
    ~InFlight() { --c_.in_flight_; }

private:
    ScriptedClient& c_;
};

std::shared_ptr<ScriptedClient> ScriptedClient::returning(std::string text, std::int64_t prompt_tokens,
                                                          std::int64_t output_tokens) {
    auto client = std::make_shared<ScriptedClient>();
    client->on_generate([=](const GenerationRequest& req) {
        return Generation{text, GenerationTrace{req.model, prompt_tokens, output_tokens}};
    });
    return client;
}

Generation ScriptedClient::generate(const GenerationRequest& req) {
    ++generate_calls_;
    {
        std::lock_guard lock(log_mu_);
        log_.push_back(req);
    }
    InFlight guard(*this);
    if (!generate_fn_) throw UnsupportedCapability("scripted client has no generate handler");
    return generate_fn_(req);
}

TokenLogProbs ScriptedClient::score_completion(const std::string& model, std::string_view prompt,
                                               std::string_view completion) {
    ++score_calls_;
    InFlight guard(*this);
    if (!score_fn_) throw UnsupportedCapability("endpoint for '" + model + "' cannot score completions");
    return score_fn_(model, prompt, completion);
}

std::vector<double> ScriptedClient::embed(const std::string& model, std::string_view text) {
    ++embed_calls_;
    InFlight guard(*this);
    if (!embed_fn_) throw UnsupportedCapability("endpoint for '" + model + "' cannot embed");
    return embed_fn_(model, text);
}

std::vector<GenerationRequest> ScriptedClient::generate_log() const {
    std::lock_guard lock(log_mu_);
    return log_;
}

std::int64_t count_words(std::string_view text) {
    std::int64_t n = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

// ---------------------------------------------------------------------------
// Simulated model zoo

namespace {

std::string normalize_word(std::string_view w) {
    std::string out;
    for (unsigned char c : w) {
        if (std::isalnum(c)) out += static_cast<char>(std::tolower(c));
    }
    return out;
}

std::vector<std::string> words_of(std::string_view text) {
    std::vector<std::string> out;
    std::size_t k = 0;
    while (k < text.size()) {
        while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
        const auto start = k;
        while (k < text.size() && !std::isspace(static_cast<unsigned char>(text[k]))) ++k;
        if (k > start) {
            auto w = normalize_word(text.substr(start, k - start));
            if (!w.empty()) out.push_back(std::move(w));
        }
    }
    return out;
}

std::set<std::string> word_set(std::string_view text) {
    auto w = words_of(text);
    return {w.begin(), w.end()};
}

std::string normalize_phrase(std::string_view text) {
    std::string out;
    for (const auto& w : words_of(text)) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

// Text between `open` and the next `close` (or end of prompt).
std::string section(std::string_view prompt, std::string_view open, std::string_view close) {
    auto start = prompt.find(open);
    if (start == std::string_view::npos) return {};
    start += open.size();
    auto end = prompt.find(close, start);
    if (end == std::string_view::npos) end = prompt.size();
    return std::string(prompt.substr(start, end - start));
}

std::vector<std::string> sentences_of(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t k = 0; k < text.size(); ++k) {
        const char c = text[k];
        if (c == '\n') {
            if (count_words(cur) > 0) out.push_back(cur);
            cur.clear();
            continue;
        }
        cur += c;
        const bool end = (c == '.' || c == '?' || c == '!') && (k + 1 == text.size() || text[k + 1] == ' ' || text[k + 1] == '\n');
        if (end) {
            auto first = cur.find_first_not_of(' ');
            if (first != std::string::npos && count_words(cur) > 0) out.push_back(cur.substr(first));
            cur.clear();
        }
    }
    auto first = cur.find_first_not_of(' ');
    if (first != std::string::npos && count_words(cur) > 0) out.push_back(cur.substr(first));
    return out;
}

std::size_t overlap(const std::set<std::string>& a, std::string_view text) {
    std::size_t n = 0;
    for (const auto& w : word_set(text)) n += a.count(w);
    return n;
}

Generation finish(const GenerationRequest& req, std::string text) {
    if (text.empty()) text = "(empty)";
    GenerationTrace trace{req.model, count_words(req.prompt), std::max<std::int64_t>(1, count_words(text))};
    return Generation{std::move(text), trace};
}

std::uint64_t request_seed(const GenerationRequest& req) {
    return stable_hash(req.prompt, stable_hash(req.model) ^ req.seed.value_or(0x5eedULL));
}

std::string best_sentence(std::string_view text, const std::set<std::string>& query_words) {
    std::string best;
    std::size_t best_score = 0;
    for (const auto& s : sentences_of(text)) {
        const auto score = overlap(query_words, s);
        if (best.empty() || score > best_score) {
            best = s;
            best_score = score;
        }
    }
    return best;
}

Generation simulate_compression(const GenerationRequest& req) {
    std::string body = section(req.prompt, "Text:\n", "\n\nYour summary");
    if (body.empty()) body = section(req.prompt, "CHAT:\n", "\n\nYour summary");
    const auto query_words = word_set(section(req.prompt, "Question:\n", "\n\n"));

    std::size_t want = 4;
    for (std::size_t n : {3u, 6u, 9u}) {
        if (req.prompt.find("exactly " + std::to_string(n) + " sentences") != std::string::npos) want = n;
    }

    const auto sents = sentences_of(body);
    auto rng = seeded_rng(request_seed(req), "simulated-compressor");
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t k = 0; k < sents.size(); ++k) {
        // Relevance plus temperature-scaled noise: higher temperature, more random picks.
        const double noise = rng.uniform() * (1.0 + 4.0 * req.temperature);
        ranked.emplace_back(static_cast<double>(overlap(query_words, sents[k])) + noise, k);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    ranked.resize(std::min(want, ranked.size()));
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second < b.second; });

    std::string out;
    for (const auto& [score, idx] : ranked) {
        if (!out.empty()) out += ' ';
        out += sents[idx];
    }
    return finish(req, out);
}

Generation simulate_prediction(const GenerationRequest& req) {
    std::string summary = section(req.prompt, "Summary:\n", "\n\nPlease respond");
    if (summary.empty()) summary = section(req.prompt, "Memory:\n", "\n\nPlease respond");
    const auto question = section(req.prompt, "Question:\n", "\n\n");
    const auto answer = best_sentence(summary, word_set(question));
    Json j{{"explanation", "Selected the summary sentence that best matches the question."}, {"answer", answer}};
    return finish(req, j.dump());
}

Generation simulate_judge(const GenerationRequest& req) {
    const auto gold = normalize_phrase(section(req.prompt, "Ground-truth answer:\n", "\n\nPredicted answer:"));
    const auto pred = normalize_phrase(section(req.prompt, "Predicted answer:\n", "\n\nRespond with"));
    const bool correct = !gold.empty() && pred.find(gold) != std::string::npos;
    Json j{{"correct", correct}, {"rationale", correct ? "The prediction contains the ground truth." : "The ground truth is missing."}};
    return finish(req, j.dump());
}

Generation simulate_follow_up(const GenerationRequest& req) {
    const auto question = section(req.prompt, "Original question:\n", "\n\n");
    auto rng = seeded_rng(request_seed(req), "simulated-follow-up");
    const auto words = words_of(question);
    std::string focus = words.empty() ? "details" : words[rng.below(words.size())];
    Json j{{"follow_up_query", "What else does the document say about " + focus + "?"}};
    return finish(req, j.dump());
}

Generation simulate_plan(const GenerationRequest& req) {
    const auto topic = section(req.prompt, "Research Topic: ", "\n");
    Json queries = Json::array();
    static constexpr const char* kAngles[] = {"overview",   "challenges", "methods",  "evidence",
                                              "statistics", "trends",     "policy",   "outlook"};
    for (const char* angle : kAngles) {
        queries.push_back({{"search_query", topic + " " + angle}, {"sub_task", std::string("Investigate the ") + angle + " of " + topic + "."}});
    }
    Json j{{"research_plan", "Survey " + topic + " from eight complementary angles."},
           {"queries", queries},
           {"synthesis_strategy", "Organize findings by angle and relate them to each other."}};
    return finish(req, j.dump());
}

Generation simulate_extraction(const GenerationRequest& req) {
    const auto sub_task = section(req.prompt, "**Specific Sub-task/Question:** ", "\n");
    const auto content = section(req.prompt, "## Content\n", "\n\n**EXTRACTION REQUIREMENTS");
    const auto sents = sentences_of(content);
    std::string explanation;
    for (std::size_t k = 0; k < std::min<std::size_t>(2, sents.size()); ++k) {
        if (!explanation.empty()) explanation += ' ';
        explanation += sents[k];
    }
    const bool relevant = overlap(word_set(sub_task), content) > 0;
    Json j{{"explanation", explanation}, {"answer", relevant ? "relevant" : "not relevant"}};
    return finish(req, j.dump());
}

Generation simulate_synthesis(const GenerationRequest& req) {
    const auto task = section(req.prompt, "**Original Research Task:** ", "\n");
    const auto findings = section(req.prompt, "**Research Findings:**\n", "\n\n**Synthesis Strategy:**");
    return finish(req, "# " + task + "\n\n## Findings\n\n" + findings + "\n\n## Conclusion\n\nSee the findings above.\n");
}

Generation simulate_qa_web(const GenerationRequest& req) {
    const auto context = section(req.prompt, "SOURCE_TEXT:\n", "\n\nUse only information");
    const auto words = words_of(context);
    const std::string topic = words.empty() ? "the topic" : words.front();
    const auto first = sentences_of(context);
    const std::string fact = first.empty() ? context : first.front();
    Json qs = Json::array();
    qs.push_back({{"topic", topic}, {"question", "What is " + topic + " and why is it important?"}, {"answer", fact}, {"type", "qa"}});
    qs.push_back({{"topic", topic}, {"question", "What is " + topic + " and how does it work?"}, {"answer", fact}, {"type", "qa"}});
    qs.push_back({{"topic", topic}, {"question", "Write an email to a colleague summarizing the findings and take-aways."}, {"answer", "Hi, " + fact}, {"type", "generation"}});
    qs.push_back({{"topic", topic}, {"question", "Generate rap lyrics that teach the core concepts."}, {"answer", fact + " Yo."}, {"type", "generation"}});
    qs.push_back({{"topic", topic}, {"question", "Generate a poem about the topic."}, {"answer", fact}, {"type", "generation"}});
    return finish(req, Json{{"questions", qs}}.dump());
}

Generation simulate_qa_memory(const GenerationRequest& req) {
    const auto chats = section(req.prompt, "CHATS:\n", "\n\nGenerate a new");
    const auto words = words_of(chats);
    const std::string topic = words.empty() ? "that" : words.back();
    Json j{{"question", "Can you build on what we discussed about " + topic + "?"}, {"answer", "Yes, continuing from " + topic + "."}};
    return finish(req, j.dump());
}

Generation simulate_generate(const GenerationRequest& req) {
    const auto& p = req.prompt;
    auto has = [&](std::string_view marker) { return p.find(marker) != std::string::npos; };
    if (has("Ground-truth answer:\n") && has("Predicted answer:\n")) return simulate_judge(req);
    if (has("\"follow_up_query\"")) return simulate_follow_up(req);
    if (has("generate EXACTLY 8 different search queries")) return simulate_plan(req);
    if (has("**Specific Sub-task/Question:**")) return simulate_extraction(req);
    if (has("**Original Research Task:**")) return simulate_synthesis(req);
    if (has("SOURCE_TEXT:\n")) return simulate_qa_web(req);
    if (has("CHATS:\n")) return simulate_qa_memory(req);
    if (has("YOU MUST ONLY RESPOND WITH THE JSON OBJECT")) return simulate_prediction(req);
    return simulate_compression(req);
}

TokenLogProbs simulate_score(std::string_view prompt, std::string_view completion) {
    const auto vocab = word_set(prompt);
    std::vector<double> lp;
    for (const auto& w : words_of(completion)) lp.push_back(vocab.count(w) ? std::log(0.6) : std::log(1e-4));
    if (lp.empty()) lp.push_back(std::log(1e-4));
    return TokenLogProbs::from_tokens(std::move(lp));
}

std::vector<double> simulate_embed(std::string_view text) {
    constexpr std::size_t kDim = 32;
    std::vector<double> v(kDim, 0.0);
    for (const auto& w : words_of(text)) v[stable_hash(w) % kDim] += 1.0;
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
    return v;
}

}  // namespace

std::shared_ptr<ScriptedClient> make_simulated_client() {
    auto client = std::make_shared<ScriptedClient>();
    client->on_generate(simulate_generate);
    client->on_score([](const std::string&, std::string_view prompt, std::string_view completion) {
        return simulate_score(prompt, completion);
    });
    client->on_embed([](const std::string&, std::string_view text) { return simulate_embed(text); });
    return client;
}

}  // namespace compresslab
