#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace compresslab {

/// 64-bit FNV-1a. Stable across platforms and runs, unlike std::hash.
std::uint64_t stable_hash(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// A deterministic random stream. Value type: copy it to fork an identical
/// stream, never share one mutably across threads.
///
/// Satisfies UniformRandomBitGenerator, so std distributions accept it.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t run_seed, std::string_view stream_label);

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform();
    /// Standard normal draw.
    double normal();
    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);

private:
    std::mt19937_64 engine_;
};

/// Same (seed, label) always yields the same stream; different seeds or
/// labels yield unrelated streams.
RngStream seeded_rng(std::uint64_t run_seed, std::string_view stream_label);

}  // namespace compresslab
