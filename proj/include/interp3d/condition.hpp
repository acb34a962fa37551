#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "interp3d/correspond.hpp"
#include "interp3d/tensor.hpp"

namespace interp3d {

/// Synthetic prompt descriptor. Identical descriptors expand to bitwise
/// identical condition tokens; descriptors sharing a shape class overlap
/// more in token space than unrelated ones.
struct ConditionInput {
    uint64_t seed = 0;
    std::string shape_class = "blob";
    std::array<float, 3> palette = {0.5f, 0.5f, 0.5f};
};

enum class ConditionTag { source, target, interpolated };

struct ConditionTokens {
    FeatureMatrix tokens;  // M x C_cond
    ConditionTag tag = ConditionTag::source;
    float alpha = 0.0f;    // meaningful for interpolated only
};

/// Expands a descriptor to M patch-level tokens of width channels. Row norms
/// are clamped into [0.5, 2.0].
ConditionTokens encode_condition(const ConditionInput& input, int tokens, int channels,
                                 ConditionTag tag = ConditionTag::source);

/// Optimal token bijection from source to target, by assignment over the
/// pairwise cosine matrix.
CorrespondenceMap semantic_align(const ConditionTokens& source, const ConditionTokens& target);

/// Token-wise convex combination of matched pairs:
/// out_j = (1-alpha) * source_j + alpha * target_(map[j]).
ConditionTokens condition_interp(const ConditionTokens& source, const ConditionTokens& target,
                                 const CorrespondenceMap& map, float alpha);

}  // namespace interp3d
