#include "compresslab/rng.hpp"


namespace compresslab {

std::uint64_t stable_hash(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {
std::mt19937_64 make_engine(std::uint64_t seed, std::string_view label) {
    const std::uint64_t tag = stable_hash(label);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32),
                      static_cast<std::uint32_t>(label.size())};
    return std::mt19937_64(seq);
}
}  // namespace

RngStream::RngStream(std::uint64_t run_seed, std::string_view stream_label)
    : engine_(make_engine(run_seed, stream_label)) {}

double RngStream::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double RngStream::normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

std::uint64_t RngStream::below(std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(engine_);
}

RngStream seeded_rng(std::uint64_t run_seed, std::string_view stream_label) {
    return RngStream(run_seed, stream_label);
}

}  // namespace compresslab
