#include "compresslab/search.hpp"

#include <cstdlib>
#include <fstream>

#include <httplib.h>

#include "compresslab/errors.hpp"
#include "compresslab/rng.hpp"

namespace compresslab {

void to_json(Json& j, const SearchResult& r) { j = Json{{"url", r.url}, {"title", r.title}, {"content", r.content}}; }

void from_json(const Json& j, SearchResult& r) {
    r.url = j.value("url", std::string());
    r.title = j.value("title", std::string());
    r.content = j.at("content").get<std::string>();
}

std::vector<SearchResult> ScriptedSearch::search(const std::string& query, std::size_t top_k) {
    ++calls_;
    auto results = fn_(query);
    if (results.size() > top_k) results.resize(top_k);
    return results;
}

std::shared_ptr<ScriptedSearch> load_search_fixture(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("search.fixture", "cannot open " + path.string());
    std::map<std::string, std::vector<SearchResult>> table;
    try {
        const Json j = Json::parse(in);
        if (!j.is_object()) throw ConfigError("search.fixture", "must be an object keyed by query");
        for (const auto& [q, results] : j.items()) table[q] = results.get<std::vector<SearchResult>>();
    } catch (const Json::exception& e) {
        throw ConfigError("search.fixture", e.what());
    }
    return std::make_shared<ScriptedSearch>([table = std::move(table)](const std::string& query) {
        if (auto it = table.find(query); it != table.end()) return it->second;
        if (auto it = table.find("*"); it != table.end()) return it->second;
        return std::vector<SearchResult>{};
    });
}

std::shared_ptr<ScriptedSearch> make_simulated_search() {
    return std::make_shared<ScriptedSearch>([](const std::string& query) {
        std::vector<SearchResult> out;
        const auto h = stable_hash(query);
        for (int k = 0; k < 3; ++k) {
            SearchResult r;
            r.url = "https://example.org/" + std::to_string((h >> (8 * k)) & 0xffff) + "/" + std::to_string(k);
            r.title = "Result " + std::to_string(k + 1) + " for " + query;
            r.content = "This page discusses " + query + ". Source " + std::to_string(k + 1) +
                        " reports figures and examples about " + query +
                        ". It also covers background that is only loosely related.";
            out.push_back(std::move(r));
        }
        return out;
    });
}

HttpSearch::HttpSearch(std::string url, std::string api_key_env, double timeout_s, RetryPolicy policy)
    : timeout_s_(timeout_s), policy_(std::move(policy)) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("search.url", "expected scheme://host[:port]/path");
    const auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
    if (const char* key = std::getenv(api_key_env.c_str())) api_key_ = key;
}

std::vector<SearchResult> HttpSearch::search(const std::string& query, std::size_t top_k) {
    return call_with_retries(policy_, [&] {
        httplib::Client cli(scheme_host_port_);
        const auto t = static_cast<time_t>(timeout_s_);
        cli.set_connection_timeout(t, 0);
        cli.set_read_timeout(t, 0);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        const Json body{{"query", query}, {"top_k", top_k}};
        auto res = cli.Post(path_, headers, body.dump(), "application/json");
        if (!res) throw RetryableError("search request failed: " + httplib::to_string(res.error()));
        if (res->status == 429 || res->status >= 500) {
            throw RetryableError("search returned HTTP " + std::to_string(res->status));
        }
        if (res->status >= 400) throw FatalRequestError(res->status, res->body);
        try {
            auto results = Json::parse(res->body).at("results").get<std::vector<SearchResult>>();
            if (results.size() > top_k) results.resize(top_k);
            return results;
        } catch (const Json::exception& e) {
            throw FatalRequestError(res->status, std::string("unexpected search response: ") + e.what());
        }
    });
}

}  // namespace compresslab
