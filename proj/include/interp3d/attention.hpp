#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "interp3d/correspond.hpp"
#include "interp3d/tensor.hpp"

namespace interp3d {

enum class AttentionStage { geo, tex };
enum class TokenOwner { source, target, frame };

/// Q/K/V token matrices of one transformer layer.
struct AttentionTensors {
    FeatureMatrix q, k, v;
    AttentionStage stage = AttentionStage::geo;
    TokenOwner owner = TokenOwner::frame;

    void validate() const;
};

enum class HookVariant {
    none,
    interp_kv,
    aid_inner,
    aid_outer,
    fused_structure,
    texture_fusion,
};

const char* hook_variant_name(HookVariant v);
HookVariant parse_hook_variant(const std::string& name);

/// Selects which attention rewrite runs inside the denoiser's self-attention
/// layers. fused_structure requires a correspondence map; the other variants
/// forbid one.
struct HookSpec {
    HookVariant variant = HookVariant::none;
    float alpha = 0.0f;
    std::optional<CorrespondenceMap> map;

    void validate() const;
};

/// softmax(q k^T / sqrt(d)) v with row-wise max subtraction, double accumulation.
FeatureMatrix attention(const FeatureMatrix& q, const FeatureMatrix& k, const FeatureMatrix& v);

/// attention(q, (1-a) k_s + a k_t, (1-a) v_s + a v_t)
FeatureMatrix interp_attention(const FeatureMatrix& q, const FeatureMatrix& k_s,
                               const FeatureMatrix& k_t, const FeatureMatrix& v_s,
                               const FeatureMatrix& v_t, float alpha);

/// Inner fusion: interpolated external keys/values concatenated before the
/// frame's own, one attention call.
FeatureMatrix aid_inner(const FeatureMatrix& q, const FeatureMatrix& k_s,
                        const FeatureMatrix& k_t, const FeatureMatrix& k_i,
                        const FeatureMatrix& v_s, const FeatureMatrix& v_t,
                        const FeatureMatrix& v_i, float alpha);

/// Outer fusion: two attentions over [external, own] token sets, blended by alpha.
FeatureMatrix aid_outer(const FeatureMatrix& q, const FeatureMatrix& k_s,
                        const FeatureMatrix& k_t, const FeatureMatrix& k_i,
                        const FeatureMatrix& v_s, const FeatureMatrix& v_t,
                        const FeatureMatrix& v_i, float alpha);

/// Structure-aligned outer fusion: target K/V are patch-permuted by the
/// correspondence map first. Identity map reduces bitwise to aid_outer.
FeatureMatrix fused_structure_attention(const FeatureMatrix& q, const FeatureMatrix& k_s,
                                        const FeatureMatrix& v_s, const FeatureMatrix& k_t,
                                        const FeatureMatrix& v_t, const FeatureMatrix& k_i,
                                        const FeatureMatrix& v_i, float alpha,
                                        const CorrespondenceMap& map, const PatchGrid& layout);

/// Per-token nearest rows (by cosine) in the source and target key caches.
/// Ties break to the lowest index; token counts may all differ.
struct TextureMatches {
    std::vector<int> source;  // m*, one per k_i row
    std::vector<int> target;  // n*
};

TextureMatches texture_match(const FeatureMatrix& k_i, const FeatureMatrix& k_s,
                             const FeatureMatrix& k_t);

/// Norm-preserving aggregation of matched source/target rows into each token:
/// out = (|x| / |x~|) x~ with x~ = (1-a) x_s[m*] + a x_t[n*] + x. Tokens whose
/// aggregate collapses below 1e-12 are left unchanged and counted.
struct TextureFuseResult {
    FeatureMatrix k;
    FeatureMatrix v;
    int degenerate_tokens = 0;
};

TextureFuseResult texture_fuse(const FeatureMatrix& k_i, const FeatureMatrix& v_i,
                               const TextureMatches& matches, const FeatureMatrix& k_s,
                               const FeatureMatrix& v_s, const FeatureMatrix& k_t,
                               const FeatureMatrix& v_t, float alpha);

/// Row-wise concatenation [top; bottom].
FeatureMatrix concat_rows(const FeatureMatrix& top, const FeatureMatrix& bottom);

}  // namespace interp3d
