#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "compresslab/config.hpp"

namespace compresslab {

enum class PromptRole {
    compress_query_specific,
    compress_memory,
    compress_query_agnostic,
    predict_base,
    predict_memory,
    judge,
    follow_up,
    research_plan,
    source_extraction,
    research_synthesis,
    qa_memory_style,
    qa_web_style,
};

std::string_view to_string(PromptRole role);
/// Placeholders a template of this role must contain, e.g. {"query", "text"}.
std::vector<std::string> required_placeholders(PromptRole role);
bool is_compress_role(PromptRole role);
bool is_predict_role(PromptRole role);

/// A prompt with `{name}` placeholders. Rendering is a single left-to-right
/// pass, so substituted text is never re-expanded and braces that do not
/// name a supplied placeholder are copied verbatim.
struct PromptTemplate {
    PromptRole role;
    std::string text;

    /// Throws ConfigError when a required placeholder is missing.
    void validate() const;
    std::string render(const std::map<std::string, std::string, std::less<>>& values) const;

    /// The built-in template for a role.
    static PromptTemplate builtin(PromptRole role);
};

/// Sentence-count instruction appended to compression prompts; empty for
/// `unconstrained`.
std::string conciseness_instruction(Conciseness c);

}  // namespace compresslab
