#include "compresslab/http_client.hpp"

#include <algorithm>
#include <cstdlib>

#include <httplib.h>

#include "compresslab/errors.hpp"
#include "compresslab/scripted_client.hpp"

namespace compresslab {
namespace {

bool mentions_context_length(std::string body) {
    std::transform(body.begin(), body.end(), body.begin(), [](unsigned char c) { return std::tolower(c); });
    return body.find("context length") != std::string::npos || body.find("maximum context") != std::string::npos ||
           body.find("context_length") != std::string::npos;
}

}  // namespace

HttpClient::HttpClient(EndpointConfig endpoint) : endpoint_(std::move(endpoint)) {
    base_url_ = endpoint_.base_url;
    if (base_url_.empty()) {
        if (const char* env = std::getenv("COMPRESSLAB_BASE_URL")) base_url_ = env;
    }
    if (base_url_.empty()) return;  // reported on first use, so unused endpoints need no URL
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();

    const auto scheme_end = base_url_.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoints.base_url", "expected scheme://host[:port][/path]");
    const auto path_start = base_url_.find('/', scheme_end + 3);
    scheme_host_port_ = base_url_.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : base_url_.substr(path_start);

    if (!endpoint_.api_key_env.empty()) {
        if (const char* key = std::getenv(endpoint_.api_key_env.c_str())) api_key_ = key;
    }
}

std::string HttpClient::wire_model(const std::string& model) const {
    return endpoint_.remote_model.empty() ? model : endpoint_.remote_model;
}

Json HttpClient::post(const std::string& path, const Json& body) const {
    if (base_url_.empty()) throw ConfigError("endpoints.base_url", "no base_url and COMPRESSLAB_BASE_URL unset");
    httplib::Client cli(scheme_host_port_);
    const auto timeout_s = static_cast<time_t>(endpoint_.timeout_s);
    cli.set_connection_timeout(timeout_s, 0);
    cli.set_read_timeout(timeout_s, 0);
    cli.set_write_timeout(timeout_s, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = cli.Post(path_prefix_ + path, headers, body.dump(), "application/json");
    if (!res) throw RetryableError("POST " + path + " failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
        throw RetryableError("POST " + path + " returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    if (res->status >= 400) {
        if (mentions_context_length(res->body)) throw ContextOverflow(res->body);
        throw FatalRequestError(res->status, res->body);
    }
    try {
        return Json::parse(res->body);
    } catch (const Json::parse_error& e) {
        throw FatalRequestError(res->status, std::string("unparseable response body: ") + e.what());
    }
}

Generation HttpClient::generate(const GenerationRequest& req) {
    Json body{{"model", wire_model(req.model)},
              {"messages", Json::array({Json{{"role", "user"}, {"content", req.prompt}}})},
              {"temperature", req.temperature},
              {"max_tokens", req.max_tokens}};
    if (req.seed) body["seed"] = *req.seed;
    const Json res = post("/chat/completions", body);
    try {
        Generation g;
        const auto& content = res.at("choices").at(0).at("message").at("content");
        g.text = content.is_null() ? "" : content.get<std::string>();
        g.trace.model_name = req.model;
        if (auto u = res.find("usage"); u != res.end()) {
            g.trace.prompt_tokens = u->value("prompt_tokens", std::int64_t{0});
            g.trace.output_tokens = u->value("completion_tokens", std::int64_t{0});
        }
        return g;
    } catch (const Json::exception& e) {
        throw FatalRequestError(200, std::string("unexpected chat completion shape: ") + e.what());
    }
}

TokenLogProbs HttpClient::score_completion(const std::string& model, std::string_view prompt,
                                           std::string_view completion) {
    if (!endpoint_.supports_scoring) {
        throw UnsupportedCapability("endpoint for '" + model + "' is configured without scoring support");
    }
    const std::string full = std::string(prompt) + std::string(completion);
    Json body{{"model", wire_model(model)}, {"prompt", full}, {"max_tokens", 0},
              {"echo", true},               {"logprobs", 1},   {"temperature", 0.0}};
    const Json res = post("/completions", body);
    try {
        return completion_logprobs(res, model, prompt.size(), full.size());
    } catch (const Json::exception& e) {
        throw FatalRequestError(200, std::string("unexpected completions shape: ") + e.what());
    }
}

TokenLogProbs HttpClient::completion_logprobs(const Json& res, const std::string& model, std::size_t prompt_size,
                                              std::size_t full_size) {
    const auto& choice = res.at("choices").at(0);
    auto lp = choice.find("logprobs");
    if (lp == choice.end() || lp->is_null() || !lp->contains("token_logprobs") || !lp->contains("text_offset")) {
        throw UnsupportedCapability("endpoint for '" + model + "' did not echo prompt log-probabilities");
    }
    const auto& tokens = lp->at("tokens");
    const auto& logprobs = lp->at("token_logprobs");
    const auto& offsets = lp->at("text_offset");

    std::vector<double> per_token;
    for (std::size_t k = 0; k < logprobs.size(); ++k) {
        const auto offset = offsets.at(k).get<std::size_t>();
        const auto len = tokens.at(k).get<std::string>().size();
        if (offset + len <= prompt_size) continue;  // entirely inside the prompt
        if (offset >= full_size) break;             // generated tokens, if any
        if (logprobs.at(k).is_null()) throw FatalRequestError(200, "null log-probability inside the completion");
        per_token.push_back(logprobs.at(k).get<double>());
    }
    if (per_token.empty()) throw FatalRequestError(200, "no completion tokens found in echoed log-probabilities");
    return TokenLogProbs::from_tokens(std::move(per_token));
}

std::vector<double> HttpClient::embed(const std::string& model, std::string_view text) {
    const Json res = post("/embeddings", Json{{"model", wire_model(model)}, {"input", std::string(text)}});
    try {
        return res.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const Json::exception& e) {
        throw FatalRequestError(200, std::string("unexpected embeddings shape: ") + e.what());
    }
}

std::shared_ptr<ResilientClient> make_endpoint_client(const std::map<std::string, EndpointConfig>& endpoints,
                                                      const EndpointConfig& fallback, std::size_t max_concurrency,
                                                      RetryPolicy policy) {
    auto router = std::make_shared<EndpointRouter>();
    std::shared_ptr<LmClient> simulated;
    auto build = [&](const EndpointConfig& ep) -> std::shared_ptr<LmClient> {
        if (ep.kind == "simulated") {
            if (!simulated) simulated = make_simulated_client();
            return simulated;
        }
        return std::make_shared<HttpClient>(ep);
    };
    for (const auto& [model, ep] : endpoints) router->add(model, build(ep));
    router->set_default(build(fallback));
    return std::make_shared<ResilientClient>(router, max_concurrency, std::move(policy));
}

}  // namespace compresslab
