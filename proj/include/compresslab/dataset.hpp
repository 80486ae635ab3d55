#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "compresslab/types.hpp"

namespace compresslab {

/// Reads the canonical JSONL dataset: one object per line with keys
/// id/context/query/gold_answer (source_tag optional). Blank lines are
/// skipped. Order is preserved.
///
/// Throws DatasetError carrying the 1-based line number on a malformed line,
/// a missing or non-string key, an empty context/query, or a duplicate id.
std::vector<QARecord> load_dataset(const std::filesystem::path& path);
std::vector<QARecord> parse_dataset(std::istream& in);

void write_dataset(std::ostream& out, const std::vector<QARecord>& records);
void save_dataset(const std::filesystem::path& path, const std::vector<QARecord>& records);

}  // namespace compresslab
