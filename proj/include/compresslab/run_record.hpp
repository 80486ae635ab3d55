#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "compresslab/types.hpp"

namespace compresslab {

/// One seeded (document, query, compression, prediction, evaluation) row.
/// Exactly one of `judgment` / `perplexity` is populated.
struct RunRecord {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string record_id;
    int sample_index = 0;
    std::string compression_text;
    std::int64_t output_tokens = 0;
    std::string prediction;
    std::optional<bool> judgment;
    std::optional<double> perplexity;
    std::vector<GenerationTrace> usage;
    std::string ts_start;
    std::string ts_end;

    std::tuple<std::uint64_t, std::string, int> key() const { return {seed, record_id, sample_index}; }
};

/// Serializes with fields in the canonical order: run_id, seed, record_id,
/// sample_index, compression_text, output_tokens, prediction, judgment,
/// perplexity, usage, ts_start, ts_end.
std::string to_jsonl_line(const RunRecord& r);
RunRecord run_record_from_json(const Json& j);

/// Reads every complete record. A torn final line (crash mid-append) is
/// ignored; corruption anywhere else throws DatasetError.
std::vector<RunRecord> read_run_records(const std::filesystem::path& path);

/// Appends one line per record and fsyncs before returning.
class RunRecordWriter {
public:
    /// Opens for append. When the file ends in a torn line it is truncated
    /// back to the last newline first.
    explicit RunRecordWriter(const std::filesystem::path& path);
    ~RunRecordWriter();
    RunRecordWriter(const RunRecordWriter&) = delete;
    RunRecordWriter& operator=(const RunRecordWriter&) = delete;

    void append(const RunRecord& r);

private:
    int fd_ = -1;
};

/// ISO-8601 UTC timestamp with millisecond precision.
std::string utc_timestamp_now();

}  // namespace compresslab
