#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "compresslab/inference.hpp"
#include "compresslab/types.hpp"

namespace compresslab {

struct SearchResult {
    std::string url;
    std::string title;
    std::string content;

    bool operator==(const SearchResult&) const = default;
};

/// query in, ranked results out. Implementations must be thread-safe.
class SearchClient {
public:
    virtual ~SearchClient() = default;
    virtual std::vector<SearchResult> search(const std::string& query, std::size_t top_k) = 0;
};

/// Callback-driven search for tests; truncates to top_k and counts calls.
class ScriptedSearch : public SearchClient {
public:
    using Fn = std::function<std::vector<SearchResult>(const std::string& query)>;
    explicit ScriptedSearch(Fn fn) : fn_(std::move(fn)) {}

    std::vector<SearchResult> search(const std::string& query, std::size_t top_k) override;
    std::size_t calls() const noexcept { return calls_.load(); }

private:
    Fn fn_;
    std::atomic<std::size_t> calls_{0};
};

/// Results from a JSON fixture: {"<query>": [{url,title,content}, ...],
/// "*": [...]} where "*" answers any query not listed.
std::shared_ptr<ScriptedSearch> load_search_fixture(const std::filesystem::path& path);

/// Deterministic offline search: three synthetic pages per query whose text
/// restates the query terms.
std::shared_ptr<ScriptedSearch> make_simulated_search();

/// POSTs {"query": q, "top_k": k} to `url` and expects
/// {"results": [{"url","title","content"}, ...]}. Transport errors, 429 and
/// 5xx are retried under `policy`.
class HttpSearch : public SearchClient {
public:
    HttpSearch(std::string url, std::string api_key_env = "COMPRESSLAB_SEARCH_KEY", double timeout_s = 60.0,
               RetryPolicy policy = {});
    std::vector<SearchResult> search(const std::string& query, std::size_t top_k) override;

private:
    std::string scheme_host_port_;
    std::string path_;
    std::string api_key_;
    double timeout_s_;
    RetryPolicy policy_;
};

void to_json(Json& j, const SearchResult& r);
void from_json(const Json& j, SearchResult& r);

}  // namespace compresslab
