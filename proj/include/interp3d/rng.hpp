#pragma once

#include <cstdint>
#include <string_view>

#include "interp3d/tensor.hpp"

namespace interp3d {

// 64-bit tag hash for PRNG stream purposes (FNV-1a).
uint64_t hash_tag(std::string_view tag);

/// Stream key for the counter-based PRNG: (purpose tag, frame index, step index).
struct RngKey {
    uint64_t purpose = 0;
    uint64_t frame = 0;
    uint64_t step = 0;
};

/// Deterministic counter-based PRNG. Draw i of stream (seed, key) is a pure
/// integer function of (seed, key, i), so sequences are bit-identical across
/// runs and platforms and independent of execution order.
class Rng {
public:
    Rng(uint64_t seed, RngKey key);
    Rng(uint64_t seed, std::string_view purpose, uint64_t frame = 0, uint64_t step = 0);

    uint64_t next_u64();
    double next_uniform();   // open interval (0, 1)
    float next_gaussian();   // standard normal via inverse-CDF

private:
    uint64_t base_ = 0;
    uint64_t counter_ = 0;
};

// Standard normal quantile (Acklam rational approximation; branch-free libm use).
double inverse_normal_cdf(double p);

/// rows x cols matrix of standard-normal draws from the given stream.
FeatureMatrix seeded_gaussian(Rng& rng, int rows, int cols);

}  // namespace interp3d
