#include "compresslab/inference.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "compresslab/errors.hpp"

namespace compresslab {

void GenerationRequest::validate() const {
    if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
    if (!std::isfinite(temperature) || temperature < 0.0) {
        throw std::invalid_argument("temperature must be finite and >= 0");
    }
}

TokenLogProbs TokenLogProbs::from_tokens(std::vector<double> per_token) {
    TokenLogProbs out;
    out.sum = std::accumulate(per_token.begin(), per_token.end(), 0.0);
    out.per_token = std::move(per_token);
    return out;
}

double TokenLogProbs::mean() const {
    if (per_token.empty()) throw std::invalid_argument("mean of empty token list");
    return sum / static_cast<double>(per_token.size());
}

void RetryPolicy::wait_before_attempt(int attempt) const {
    const auto delay = delay_before_attempt(attempt);
    if (sleep) {
        sleep(delay);
    } else {
        std::this_thread::sleep_for(delay);
    }
}

std::chrono::milliseconds RetryPolicy::delay_before_attempt(int attempt) const {
    const double scale = std::pow(factor, attempt - 2);
    return std::chrono::milliseconds(static_cast<std::int64_t>(static_cast<double>(base_delay.count()) * scale));
}

ResilientClient::ResilientClient(std::shared_ptr<LmClient> inner, std::size_t max_concurrency, RetryPolicy policy)
    : inner_(std::move(inner)), limiter_(max_concurrency), policy_(std::move(policy)) {
    if (!inner_) throw std::invalid_argument("ResilientClient needs an inner client");
    if (policy_.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
}

template <class Fn>
auto ResilientClient::with_retry(Fn&& fn) -> decltype(fn()) {
    std::vector<std::string> errors;
    for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
        if (attempt > 1) {
            policy_.wait_before_attempt(attempt);
        }
        ++attempts_;
        try {
            ConcurrencyLimiter::Permit permit(limiter_);
            return fn();
        } catch (const RetryableError& e) {
            errors.emplace_back(e.what());
        }
    }
    throw RetriesExhausted(std::move(errors));
}

Generation ResilientClient::generate(const GenerationRequest& req) {
    req.validate();
    return with_retry([&] { return inner_->generate(req); });
}

TokenLogProbs ResilientClient::score_completion(const std::string& model, std::string_view prompt,
                                                std::string_view completion) {
    if (completion.empty()) throw std::invalid_argument("completion to score must be non-empty");
    return with_retry([&] { return inner_->score_completion(model, prompt, completion); });
}

std::vector<double> ResilientClient::embed(const std::string& model, std::string_view text) {
    if (text.empty()) throw std::invalid_argument("text to embed must be non-empty");
    auto vec = with_retry([&] { return inner_->embed(model, text); });
    std::lock_guard lock(dim_mu_);
    auto [it, inserted] = embed_dims_.emplace(model, vec.size());
    if (!inserted && it->second != vec.size()) {
        throw ConfigError("endpoints." + model, "embedding dimension changed from " + std::to_string(it->second) +
                                                    " to " + std::to_string(vec.size()));
    }
    return vec;
}

void EndpointRouter::add(const std::string& model, std::shared_ptr<LmClient> client) {
    routes_[model] = std::move(client);
}

void EndpointRouter::set_default(std::shared_ptr<LmClient> client) { fallback_ = std::move(client); }

LmClient& EndpointRouter::route(const std::string& model) {
    if (auto it = routes_.find(model); it != routes_.end()) return *it->second;
    if (fallback_) return *fallback_;
    throw ConfigError("endpoints." + model, "no endpoint configured for model");
}

Generation EndpointRouter::generate(const GenerationRequest& req) { return route(req.model).generate(req); }

TokenLogProbs EndpointRouter::score_completion(const std::string& model, std::string_view prompt,
                                               std::string_view completion) {
    return route(model).score_completion(model, prompt, completion);
}

std::vector<double> EndpointRouter::embed(const std::string& model, std::string_view text) {
    return route(model).embed(model, text);
}

std::vector<Generation> generate_batch(LmClient& client, const std::vector<GenerationRequest>& reqs,
                                       std::size_t max_concurrency) {
    return parallel_map<Generation>(reqs.size(), max_concurrency, [&](std::size_t k) { return client.generate(reqs[k]); });
}

}  // namespace compresslab
