#include "interp3d/condition.hpp"

#include <algorithm>
#include <cmath>

#include "interp3d/linalg.hpp"
#include "interp3d/rng.hpp"

namespace interp3d {

namespace {

constexpr uint64_t kPaletteBasisSeed = 0x70616c6574746533ULL;
constexpr float kClassWeight = 0.6f;
constexpr float kPaletteWeight = 0.3f;

}  // namespace

ConditionTokens encode_condition(const ConditionInput& input, int tokens, int channels,
                                 ConditionTag tag) {
    if (tokens < 1 || channels < 1) {
        throw InvalidInputError("encode_condition: tokens and channels must be >= 1");
    }
    ConditionTokens out;
    out.tag = tag;
    out.tokens = FeatureMatrix(tokens, channels);
    const uint64_t class_seed = hash_tag(input.shape_class);
    for (int j = 0; j < tokens; ++j) {
        Rng seed_stream(input.seed, "cond_seed", static_cast<uint64_t>(j));
        Rng class_stream(class_seed, "cond_class", static_cast<uint64_t>(j));
        Rng palette_stream(kPaletteBasisSeed, "cond_palette", static_cast<uint64_t>(j));
        float* row = out.tokens.row(j);
        double norm_sq = 0.0;
        for (int c = 0; c < channels; ++c) {
            float v = seed_stream.next_gaussian() + kClassWeight * class_stream.next_gaussian();
            for (float p : input.palette) v += kPaletteWeight * p * palette_stream.next_gaussian();
            row[c] = v;
            norm_sq += static_cast<double>(v) * v;
        }
        // keep norms in [0.5, 2.0] so cosines stay well conditioned
        const double norm = std::sqrt(norm_sq);
        double scale = 1.0;
        if (norm < 1e-12) {
            row[0] = 0.5f;
            continue;
        }
        if (norm < 0.5) scale = 0.5 / norm;
        if (norm > 2.0) scale = 2.0 / norm;
        if (scale != 1.0) {
            for (int c = 0; c < channels; ++c) row[c] = static_cast<float>(row[c] * scale);
        }
    }
    return out;
}

CorrespondenceMap semantic_align(const ConditionTokens& source, const ConditionTokens& target) {
    if (source.tokens.rows != target.tokens.rows ||
        source.tokens.cols != target.tokens.cols) {
        throw InvalidInputError("semantic_align: token shapes must match");
    }
    return solve_assignment(cosine_similarity_matrix(source.tokens, target.tokens));
}

ConditionTokens condition_interp(const ConditionTokens& source, const ConditionTokens& target,
                                 const CorrespondenceMap& map, float alpha) {
    if (!(alpha >= 0.0f && alpha <= 1.0f)) {
        throw InvalidInputError("condition_interp: alpha must be in [0, 1]");
    }
    if (source.tokens.rows != target.tokens.rows ||
        source.tokens.cols != target.tokens.cols) {
        throw InvalidInputError("condition_interp: token shapes must match");
    }
    map.validate();
    if (static_cast<int>(map.size()) != source.tokens.rows || !map.all_matched()) {
        throw InvalidInputError("condition_interp: map must be a full bijection over tokens");
    }
    FeatureMatrix permuted(target.tokens.rows, target.tokens.cols);
    for (int j = 0; j < target.tokens.rows; ++j) {
        std::copy_n(target.tokens.row(static_cast<int>(map.mapping[static_cast<size_t>(j)])),
                    target.tokens.cols, permuted.row(j));
    }
    ConditionTokens out;
    out.tag = ConditionTag::interpolated;
    out.alpha = alpha;
    out.tokens = lerp_matrix(source.tokens, permuted, alpha);
    return out;
}

}  // namespace interp3d
