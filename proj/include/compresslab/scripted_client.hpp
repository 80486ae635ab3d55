#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "compresslab/inference.hpp"

namespace compresslab {

/// In-process LmClient whose behaviour is supplied as callbacks. Used by the
/// tests and by offline CLI runs. Records every generate request and tracks
/// peak concurrency.
class ScriptedClient : public LmClient {
public:
    using GenerateFn = std::function<Generation(const GenerationRequest&)>;
    using ScoreFn = std::function<TokenLogProbs(const std::string& model, std::string_view prompt,
                                                std::string_view completion)>;
    using EmbedFn = std::function<std::vector<double>(const std::string& model, std::string_view text)>;

    ScriptedClient() = default;

    /// Client whose every generation is `text`, with the given token counts.
    static std::shared_ptr<ScriptedClient> returning(std::string text, std::int64_t prompt_tokens = 1,
                                                     std::int64_t output_tokens = 1);

    void on_generate(GenerateFn fn) { generate_fn_ = std::move(fn); }
    void on_score(ScoreFn fn) { score_fn_ = std::move(fn); }
    void on_embed(EmbedFn fn) { embed_fn_ = std::move(fn); }
    /// Every call sleeps this long while counted as in flight.
    void set_latency(std::chrono::microseconds latency) { latency_ = latency; }

    Generation generate(const GenerationRequest& req) override;
    TokenLogProbs score_completion(const std::string& model, std::string_view prompt,
                                   std::string_view completion) override;
    std::vector<double> embed(const std::string& model, std::string_view text) override;

    std::vector<GenerationRequest> generate_log() const;
    std::size_t generate_calls() const noexcept { return generate_calls_.load(); }
    std::size_t score_calls() const noexcept { return score_calls_.load(); }
    std::size_t embed_calls() const noexcept { return embed_calls_.load(); }
    std::size_t peak_in_flight() const noexcept { return peak_.load(); }

private:
    class InFlight;

    GenerateFn generate_fn_;
    ScoreFn score_fn_;
    EmbedFn embed_fn_;
    std::chrono::microseconds latency_{0};

    mutable std::mutex log_mu_;
    std::vector<GenerationRequest> log_;
    std::atomic<std::size_t> generate_calls_{0};
    std::atomic<std::size_t> score_calls_{0};
    std::atomic<std::size_t> embed_calls_{0};
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> peak_{0};
};

/// A deterministic stand-in for a whole model zoo, driven by the prompt
/// templates this toolkit emits. Compressors return seeded sentence
/// extracts, predictors answer from the summary, the judge does a
/// normalized containment check, scoring uses a smoothed in-prompt word
/// model, and embeddings are hashed bags of words. Output depends only on
/// (model, prompt, seed).
std::shared_ptr<ScriptedClient> make_simulated_client();

/// Whitespace token count used by the simulated endpoints.
std::int64_t count_words(std::string_view text);

}  // namespace compresslab
