#pragma once

#include <cstdint>
#include <string>

namespace xauc {

// Deterministic 64-bit generator (splitmix64 update) used everywhere a seed
// appears. Self-contained so that output streams are reproducible across
// platforms and standard-library versions, which std::mt19937 distributions
// do not guarantee.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double next_double();

    // Uniform integer in [0, bound) via rejection-free scaling (bound > 0).
    std::uint64_t next_below(std::uint64_t bound);

    // Standard normal via Box-Muller; caches the second variate.
    double next_gaussian();

private:
    std::uint64_t state_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// Stable 64-bit FNV-1a over arbitrary bytes; used for substream derivation
// and input-file digests in run manifests.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(const std::string& text);

// Derives an independent substream seed from a base seed and a label
// (e.g. one stream per dataset id regardless of generation order).
std::uint64_t derive_seed(std::uint64_t base, const std::string& label);

}  // namespace xauc
