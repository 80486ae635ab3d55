#pragma once

#include <string_view>

#include "compresslab/types.hpp"

namespace compresslab {

/// Pulls the first JSON object out of free-form model output.
///
/// Markdown code fences are stripped first. The first balanced top-level
/// `{...}` (string-aware, so braces inside string literals do not count) is
/// then parsed.
///
/// Throws NoJsonFound when no balanced object exists and MalformedJson (with
/// the byte offset into `text`) when the candidate does not parse.
Json extract_json(std::string_view text);

}  // namespace compresslab
