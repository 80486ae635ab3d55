#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "compresslab/config.hpp"
#include "compresslab/errors.hpp"
#include "compresslab/inference.hpp"
#include "compresslab/mi_estimator.hpp"
#include "compresslab/run_record.hpp"

namespace compresslab {

struct ExperimentOptions {
    /// Stop (throwing RunInterrupted) once this many records have been
    /// persisted in this invocation. Used to exercise resume.
    std::optional<std::size_t> stop_after_records;
};

class RunInterrupted : public Error {
public:
    using Error::Error;
};

struct ExperimentResult {
    std::size_t records_total = 0;
    std::size_t records_written = 0;  // by this invocation
    Json summary;
};

/// Indices of the N documents used for a seed, ascending (file order).
std::vector<std::size_t> subsample_indices(std::size_t dataset_size, std::size_t n, std::uint64_t seed);

/// Runs (or resumes) every seed of the config, writing into `out_dir`:
/// config.json, runrecords.jsonl (one fsynced line per record, ordered by
/// seed, subsampled record, sample index), errors.jsonl, summary.json and
/// points.csv. Records already present are skipped.
ExperimentResult run_experiment(const RunConfig& config, LmClient& client, const std::filesystem::path& out_dir,
                                const ExperimentOptions& options = {});

struct SeedMI {
    std::uint64_t seed = 0;
    std::optional<MIEstimate> estimate;
    std::optional<RateValue> rate;
    std::string error;  // why no estimate was produced
};

/// MI and bit efficiency per seed from persisted records. Score matrices are
/// cached as mi_matrix_seed<k>.jsonl in `run_dir` and reused when present.
std::vector<SeedMI> compute_run_mi(const RunConfig& config, LmClient& client, std::span<const RunRecord> records,
                                   const std::filesystem::path& run_dir);

/// summary.json contents for a finished run.
Json summarize_run(const RunConfig& config, std::span<const RunRecord> records, const std::vector<SeedMI>& mi,
                   const std::filesystem::path& run_dir);

/// Writes summary.json and points.csv for the persisted records of `run_dir`.
Json finalize_run(const RunConfig& config, LmClient& client, const std::filesystem::path& run_dir);

/// Multi-turn variant: one trace per subsampled record and seed, final
/// predictions judged. Writes config.json, multiturn.jsonl and summary.json.
Json run_multi_turn_experiment(const RunConfig& config, LmClient& client, const std::filesystem::path& out_dir,
                               std::size_t turns);

}  // namespace compresslab
