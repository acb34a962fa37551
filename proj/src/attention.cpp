#include "interp3d/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "interp3d/linalg.hpp"

namespace interp3d {

void AttentionTensors::validate() const {
    if (q.cols != k.cols || k.cols != v.cols) {
        throw InvalidInputError("AttentionTensors: q/k/v channel widths differ");
    }
    if (k.rows != v.rows) {
        throw InvalidInputError("AttentionTensors: k and v token counts differ");
    }
}

const char* hook_variant_name(HookVariant v) {
    switch (v) {
        case HookVariant::none: return "none";
        case HookVariant::interp_kv: return "interp_kv";
        case HookVariant::aid_inner: return "aid_inner";
        case HookVariant::aid_outer: return "aid_outer";
        case HookVariant::fused_structure: return "fused_structure";
        case HookVariant::texture_fusion: return "texture_fusion";
    }
    return "none";
}

HookVariant parse_hook_variant(const std::string& name) {
    for (HookVariant v : {HookVariant::none, HookVariant::interp_kv, HookVariant::aid_inner,
                          HookVariant::aid_outer, HookVariant::fused_structure,
                          HookVariant::texture_fusion}) {
        if (name == hook_variant_name(v)) return v;
    }
    throw InvalidInputError(
        "unknown hook variant '" + name +
        "' (valid: none|interp_kv|aid_inner|aid_outer|fused_structure|texture_fusion)");
}

void HookSpec::validate() const {
    if (variant == HookVariant::fused_structure) {
        if (!map.has_value()) {
            throw InvalidInputError("HookSpec: fused_structure requires a correspondence map");
        }
    } else if (map.has_value()) {
        throw InvalidInputError(std::string("HookSpec: variant ") + hook_variant_name(variant) +
                                " does not take a correspondence map");
    }
    if (!(alpha >= 0.0f && alpha <= 1.0f)) {
        throw InvalidInputError("HookSpec: alpha must be in [0, 1]");
    }
}

FeatureMatrix attention(const FeatureMatrix& q, const FeatureMatrix& k, const FeatureMatrix& v) {
    if (q.cols != k.cols) throw InvalidInputError("attention: q/k widths differ");
    if (k.rows != v.rows) throw InvalidInputError("attention: k/v token counts differ");
    if (k.rows == 0) throw InvalidInputError("attention: empty key set");

    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols));
    FeatureMatrix out(q.rows, v.cols);
    std::vector<double> logits(static_cast<size_t>(k.rows));
    std::vector<double> acc(static_cast<size_t>(v.cols));
    for (int i = 0; i < q.rows; ++i) {
        const float* qrow = q.row(i);
        double max_logit = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < k.rows; ++j) {
            const float* krow = k.row(j);
            double dot = 0.0;
            for (int c = 0; c < q.cols; ++c) dot += static_cast<double>(qrow[c]) * krow[c];
            logits[static_cast<size_t>(j)] = dot * scale;
            max_logit = std::max(max_logit, logits[static_cast<size_t>(j)]);
        }
        double denom = 0.0;
        for (int j = 0; j < k.rows; ++j) {
            logits[static_cast<size_t>(j)] = std::exp(logits[static_cast<size_t>(j)] - max_logit);
            denom += logits[static_cast<size_t>(j)];
        }
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int j = 0; j < k.rows; ++j) {
            const double w = logits[static_cast<size_t>(j)] / denom;
            const float* vrow = v.row(j);
            for (int c = 0; c < v.cols; ++c) acc[static_cast<size_t>(c)] += w * vrow[c];
        }
        float* orow = out.row(i);
        for (int c = 0; c < v.cols; ++c) orow[c] = static_cast<float>(acc[static_cast<size_t>(c)]);
    }
    return out;
}

FeatureMatrix concat_rows(const FeatureMatrix& top, const FeatureMatrix& bottom) {
    if (top.cols != bottom.cols) throw InvalidInputError("concat_rows: widths differ");
    FeatureMatrix out(top.rows + bottom.rows, top.cols);
    std::copy(top.data.begin(), top.data.end(), out.data.begin());
    std::copy(bottom.data.begin(), bottom.data.end(), out.data.begin() + top.data.size());
    return out;
}

FeatureMatrix interp_attention(const FeatureMatrix& q, const FeatureMatrix& k_s,
                               const FeatureMatrix& k_t, const FeatureMatrix& v_s,
                               const FeatureMatrix& v_t, float alpha) {
    return attention(q, lerp_matrix(k_s, k_t, alpha), lerp_matrix(v_s, v_t, alpha));
}

FeatureMatrix aid_inner(const FeatureMatrix& q, const FeatureMatrix& k_s,
                        const FeatureMatrix& k_t, const FeatureMatrix& k_i,
                        const FeatureMatrix& v_s, const FeatureMatrix& v_t,
                        const FeatureMatrix& v_i, float alpha) {
    return attention(q, concat_rows(lerp_matrix(k_s, k_t, alpha), k_i),
                     concat_rows(lerp_matrix(v_s, v_t, alpha), v_i));
}

FeatureMatrix aid_outer(const FeatureMatrix& q, const FeatureMatrix& k_s,
                        const FeatureMatrix& k_t, const FeatureMatrix& k_i,
                        const FeatureMatrix& v_s, const FeatureMatrix& v_t,
                        const FeatureMatrix& v_i, float alpha) {
    if (alpha == 0.0f) return attention(q, concat_rows(k_s, k_i), concat_rows(v_s, v_i));
    if (alpha == 1.0f) return attention(q, concat_rows(k_t, k_i), concat_rows(v_t, v_i));
    const FeatureMatrix src = attention(q, concat_rows(k_s, k_i), concat_rows(v_s, v_i));
    const FeatureMatrix tgt = attention(q, concat_rows(k_t, k_i), concat_rows(v_t, v_i));
    return lerp_matrix(src, tgt, alpha);
}

FeatureMatrix fused_structure_attention(const FeatureMatrix& q, const FeatureMatrix& k_s,
                                        const FeatureMatrix& v_s, const FeatureMatrix& k_t,
                                        const FeatureMatrix& v_t, const FeatureMatrix& k_i,
                                        const FeatureMatrix& v_i, float alpha,
                                        const CorrespondenceMap& map, const PatchGrid& layout) {
    if (alpha == 0.0f) {
        // target branch has weight zero; skip the permutation entirely
        return attention(q, concat_rows(k_s, k_i), concat_rows(v_s, v_i));
    }
    auto [k_hat, v_hat] = apply_permutation(k_t, v_t, map, layout);
    return aid_outer(q, k_s, k_hat, k_i, v_s, v_hat, v_i, alpha);
}

TextureMatches texture_match(const FeatureMatrix& k_i, const FeatureMatrix& k_s,
                             const FeatureMatrix& k_t) {
    if (k_s.rows == 0 || k_t.rows == 0) {
        throw InvalidInputError("texture_match: source/target caches must be non-empty");
    }
    if (k_i.cols != k_s.cols || k_i.cols != k_t.cols) {
        throw InvalidInputError("texture_match: channel widths differ");
    }
    auto norms = [](const FeatureMatrix& m) {
        std::vector<double> n(static_cast<size_t>(m.rows));
        for (int i = 0; i < m.rows; ++i) {
            double s = 0.0;
            const float* r = m.row(i);
            for (int c = 0; c < m.cols; ++c) s += static_cast<double>(r[c]) * r[c];
            n[static_cast<size_t>(i)] = std::sqrt(s);
        }
        return n;
    };
    const auto ni = norms(k_i);
    const auto ns = norms(k_s);
    const auto nt = norms(k_t);

    // argmax over cache rows, processed in source-row blocks for locality
    auto best_rows = [&](const FeatureMatrix& cache, const std::vector<double>& nc,
                         std::vector<int>& out) {
        constexpr int kBlock = 64;
        out.assign(static_cast<size_t>(k_i.rows), 0);
        std::vector<double> best(static_cast<size_t>(k_i.rows),
                                 -std::numeric_limits<double>::infinity());
        for (int j0 = 0; j0 < cache.rows; j0 += kBlock) {
            const int j1 = std::min(j0 + kBlock, cache.rows);
            for (int i = 0; i < k_i.rows; ++i) {
                const float* ri = k_i.row(i);
                const double inv_ni = ni[static_cast<size_t>(i)] > 1e-300
                                          ? 1.0 / ni[static_cast<size_t>(i)]
                                          : 0.0;
                for (int j = j0; j < j1; ++j) {
                    const float* rj = cache.row(j);
                    double dot = 0.0;
                    for (int c = 0; c < k_i.cols; ++c) dot += static_cast<double>(ri[c]) * rj[c];
                    const double denom = nc[static_cast<size_t>(j)];
                    const double cosv = denom > 1e-300 ? dot * inv_ni / denom : -2.0;
                    if (cosv > best[static_cast<size_t>(i)]) {
                        best[static_cast<size_t>(i)] = cosv;
                        out[static_cast<size_t>(i)] = j;
                    }
                }
            }
        }
    };

    TextureMatches matches;
    best_rows(k_s, ns, matches.source);
    best_rows(k_t, nt, matches.target);
    return matches;
}

TextureFuseResult texture_fuse(const FeatureMatrix& k_i, const FeatureMatrix& v_i,
                               const TextureMatches& matches, const FeatureMatrix& k_s,
                               const FeatureMatrix& v_s, const FeatureMatrix& k_t,
                               const FeatureMatrix& v_t, float alpha) {
    if (!(alpha >= 0.0f && alpha <= 1.0f)) {
        throw InvalidInputError("texture_fuse: alpha must be in [0, 1]");
    }
    if (static_cast<int>(matches.source.size()) != k_i.rows ||
        static_cast<int>(matches.target.size()) != k_i.rows) {
        throw InvalidInputError("texture_fuse: match count != token count");
    }
    if (k_i.rows != v_i.rows) throw InvalidInputError("texture_fuse: k/v token counts differ");

    TextureFuseResult result;
    result.k = k_i;
    result.v = v_i;

    const float one_minus = 1.0f - alpha;
    std::vector<float> agg;
    auto fuse_one = [&](FeatureMatrix& out, const FeatureMatrix& own, const FeatureMatrix& src,
                        const FeatureMatrix& tgt, int token) {
        const int cols = own.cols;
        const float* own_row = own.row(token);
        const float* src_row = src.row(matches.source[static_cast<size_t>(token)]);
        const float* tgt_row = tgt.row(matches.target[static_cast<size_t>(token)]);
        agg.resize(static_cast<size_t>(cols));
        double own_sq = 0.0, agg_sq = 0.0;
        for (int c = 0; c < cols; ++c) {
            float a;
            if (alpha == 0.0f) {
                a = src_row[c] + own_row[c];
            } else if (alpha == 1.0f) {
                a = tgt_row[c] + own_row[c];
            } else {
                a = one_minus * src_row[c] + alpha * tgt_row[c] + own_row[c];
            }
            agg[static_cast<size_t>(c)] = a;
            own_sq += static_cast<double>(own_row[c]) * own_row[c];
            agg_sq += static_cast<double>(a) * a;
        }
        const double agg_norm = std::sqrt(agg_sq);
        if (agg_norm < 1e-12) {
            ++result.degenerate_tokens;
            return;  // token left unchanged
        }
        const double rescale = std::sqrt(own_sq) / agg_norm;
        float* out_row = out.row(token);
        for (int c = 0; c < cols; ++c) {
            out_row[c] = static_cast<float>(rescale * agg[static_cast<size_t>(c)]);
        }
    };

    for (int token = 0; token < k_i.rows; ++token) {
        fuse_one(result.k, k_i, k_s, k_t, token);
        fuse_one(result.v, v_i, v_s, v_t, token);
    }
    return result;
}

}  // namespace interp3d
