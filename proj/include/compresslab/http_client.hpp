#pragma once

#include <memory>
#include <string>

#include "compresslab/config.hpp"
#include "compresslab/inference.hpp"

namespace compresslab {

/// OpenAI-compatible endpoint client.
///
///  - generate: POST {base}/chat/completions, single user message; `seed` is
///    forwarded when set.
///  - score_completion: POST {base}/completions with echo=true, logprobs=1,
///    max_tokens=0 on prompt+completion; log-probs of the tokens overlapping
///    the completion are returned.
///  - embed: POST {base}/embeddings.
///
/// Connection failures, timeouts, 429 and 5xx raise RetryableError; other
/// 4xx raise FatalRequestError (ContextOverflow when the body mentions the
/// context length).
class HttpClient : public LmClient {
public:
    explicit HttpClient(EndpointConfig endpoint);

    Generation generate(const GenerationRequest& req) override;
    TokenLogProbs score_completion(const std::string& model, std::string_view prompt,
                                   std::string_view completion) override;
    std::vector<double> embed(const std::string& model, std::string_view text) override;

    const std::string& base_url() const noexcept { return base_url_; }

private:
    Json post(const std::string& path, const Json& body) const;
    static TokenLogProbs completion_logprobs(const Json& res, const std::string& model, std::size_t prompt_size,
                                             std::size_t full_size);
    std::string wire_model(const std::string& model) const;

    EndpointConfig endpoint_;
    std::string base_url_;
    std::string scheme_host_port_;
    std::string path_prefix_;
    std::string api_key_;
};

/// Builds the routed, retrying, concurrency-limited client for a run config.
/// "simulated" endpoints share a single in-process simulated model zoo.
std::shared_ptr<ResilientClient> make_endpoint_client(const std::map<std::string, EndpointConfig>& endpoints,
                                                      const EndpointConfig& fallback, std::size_t max_concurrency,
                                                      RetryPolicy policy = {});

}  // namespace compresslab
