#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "compresslab/concurrency.hpp"
#include "compresslab/errors.hpp"
#include "compresslab/types.hpp"

namespace compresslab {

struct GenerationRequest {
    std::string model;
    std::string prompt;
    double temperature = 0.0;
    std::int64_t max_tokens = 1;
    std::optional<std::uint64_t> seed;

    /// Throws std::invalid_argument on max_tokens < 1 or non-finite temperature.
    void validate() const;
};

struct Generation {
    std::string text;
    GenerationTrace trace;
};

/// Per-token log-probabilities of a supplied completion, in nats.
struct TokenLogProbs {
    std::vector<double> per_token;
    double sum = 0.0;

    static TokenLogProbs from_tokens(std::vector<double> per_token);
    double mean() const;
};

/// Uniform contract over LM endpoints. Implementations must be safe to call
/// from several threads at once.
class LmClient {
public:
    virtual ~LmClient() = default;

    virtual Generation generate(const GenerationRequest& req) = 0;

    /// Log-probabilities of `completion` conditioned on `prompt` under `model`.
    /// Throws UnsupportedCapability if the endpoint cannot score a supplied
    /// continuation and ContextOverflow if prompt+completion is too long.
    virtual TokenLogProbs score_completion(const std::string& model, std::string_view prompt,
                                           std::string_view completion) = 0;

    virtual std::vector<double> embed(const std::string& model, std::string_view text) = 0;
};

/// Exponential backoff on RetryableError only. Defaults: 1 s base, factor 2,
/// at most 5 attempts.
struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
    std::function<void(std::chrono::milliseconds)> sleep;  // empty: std::this_thread::sleep_for

    std::chrono::milliseconds delay_before_attempt(int attempt) const;  // attempt >= 2
    void wait_before_attempt(int attempt) const;
};

/// Calls fn() until it returns without RetryableError or attempts run out
/// (then throws RetriesExhausted).
template <class Fn>
auto call_with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
    std::vector<std::string> errors;
    for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
        if (attempt > 1) policy.wait_before_attempt(attempt);
        try {
            return fn();
        } catch (const RetryableError& e) {
            errors.emplace_back(e.what());
        }
    }
    throw RetriesExhausted(std::move(errors));
}

/// Wraps another client with the retry policy, a bound on in-flight calls,
/// precondition checks, and per-model embedding-dimension consistency.
class ResilientClient : public LmClient {
public:
    ResilientClient(std::shared_ptr<LmClient> inner, std::size_t max_concurrency, RetryPolicy policy = {});

    Generation generate(const GenerationRequest& req) override;
    TokenLogProbs score_completion(const std::string& model, std::string_view prompt,
                                   std::string_view completion) override;
    std::vector<double> embed(const std::string& model, std::string_view text) override;

    /// Total attempts issued to the inner client, including retries.
    std::uint64_t attempts() const noexcept { return attempts_.load(); }
    std::size_t max_concurrency() const noexcept { return limiter_.capacity(); }

private:
    template <class Fn>
    auto with_retry(Fn&& fn) -> decltype(fn());

    std::shared_ptr<LmClient> inner_;
    ConcurrencyLimiter limiter_;
    RetryPolicy policy_;
    std::atomic<std::uint64_t> attempts_{0};
    std::mutex dim_mu_;
    std::map<std::string, std::size_t> embed_dims_;
};

/// Dispatches each call to the client registered for its model name, falling
/// back to a default client when one is set.
class EndpointRouter : public LmClient {
public:
    void add(const std::string& model, std::shared_ptr<LmClient> client);
    void set_default(std::shared_ptr<LmClient> client);

    Generation generate(const GenerationRequest& req) override;
    TokenLogProbs score_completion(const std::string& model, std::string_view prompt,
                                   std::string_view completion) override;
    std::vector<double> embed(const std::string& model, std::string_view text) override;

private:
    LmClient& route(const std::string& model);

    std::map<std::string, std::shared_ptr<LmClient>> routes_;
    std::shared_ptr<LmClient> fallback_;
};

/// Issues all requests with up to `max_concurrency` in flight; results are in
/// request order.
std::vector<Generation> generate_batch(LmClient& client, const std::vector<GenerationRequest>& reqs,
                                       std::size_t max_concurrency);

}  // namespace compresslab
