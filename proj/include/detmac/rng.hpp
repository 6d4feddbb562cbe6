#pragma once

#include "detmac/types.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace detmac {

/// Deterministic random stream. Streams derived for distinct
/// (master seed, node, purpose) triples are independent.
class RngStream {
public:
    explicit RngStream(std::seed_seq& seq) : engine_(seq) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi)
    {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
    }

    double normal(double mean, double stddev)
    {
        if (stddev <= 0.0)
            return mean;
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    double exponential(double mean) { return std::exponential_distribution<double>(1.0 / mean)(engine_); }

private:
    std::mt19937_64 engine_;
};

RngStream rng_stream(std::uint64_t master_seed, NodeId node, std::string_view purpose);

/// 64-bit FNV-1a; used for purpose tags and trace hashing.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Derives a child seed, e.g. one per sweep point.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

} // namespace detmac
