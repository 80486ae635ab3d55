#include "compresslab/json_extract.hpp"

#include <optional>

#include "compresslab/errors.hpp"

namespace compresslab {
namespace {

struct Span {
    std::size_t begin;
    std::size_t end;  // exclusive
};

// Content of the first fenced block, or nullopt when the text has no fence.
std::optional<Span> fenced_block(std::string_view text) {
    const auto open = text.find("```");
    if (open == std::string_view::npos) return std::nullopt;
    auto body = text.find('\n', open + 3);
    if (body == std::string_view::npos) return std::nullopt;
    ++body;
    auto close = text.find("```", body);
    if (close == std::string_view::npos) close = text.size();
    return Span{body, close};
}

// End (exclusive) of the object opening at `start`, or nullopt if it never closes.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t start, std::size_t limit) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t k = start; k < limit; ++k) {
        const char c = text[k];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return k + 1;
        }
    }
    return std::nullopt;
}

std::optional<Span> first_balanced_object(std::string_view text, Span window) {
    auto pos = text.find('{', window.begin);
    while (pos != std::string_view::npos && pos < window.end) {
        if (auto end = balanced_end(text, pos, window.end)) return Span{pos, *end};
        pos = text.find('{', pos + 1);
    }
    return std::nullopt;
}

}  // namespace

Json extract_json(std::string_view text) {
    std::optional<Span> candidate;
    if (auto fence = fenced_block(text)) candidate = first_balanced_object(text, *fence);
    if (!candidate) candidate = first_balanced_object(text, Span{0, text.size()});
    if (!candidate) throw NoJsonFound();

    const auto slice = text.substr(candidate->begin, candidate->end - candidate->begin);
    try {
        return Json::parse(slice);
    } catch (const Json::parse_error& e) {
        const std::size_t rel = e.byte > 0 ? e.byte - 1 : 0;
        throw MalformedJson(candidate->begin + rel, e.what());
    }
}

}  // namespace compresslab
