#include "interp3d/toyprior.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "interp3d/linalg.hpp"
#include "interp3d/rng.hpp"

namespace interp3d {

void ColoredVoxelAsset::validate() const {
    if (rgb.size() != positions.size() || opacity.size() != positions.size()) {
        throw InvalidInputError("ColoredVoxelAsset: per-voxel arrays must align");
    }
    if (!std::is_sorted(positions.begin(), positions.end()) ||
        std::adjacent_find(positions.begin(), positions.end()) != positions.end()) {
        throw InvalidInputError("ColoredVoxelAsset: positions must be sorted and unique");
    }
    for (size_t i = 0; i < positions.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            if (positions[i][a] < 0 || positions[i][a] >= resolution) {
                throw InvalidInputError("ColoredVoxelAsset: position out of range");
            }
            if (!(rgb[i][a] >= 0.0f && rgb[i][a] <= 1.0f)) {
                throw InvalidInputError("ColoredVoxelAsset: rgb out of [0,1]");
            }
        }
        if (!(opacity[i] >= 0.0f && opacity[i] <= 1.0f)) {
            throw InvalidInputError("ColoredVoxelAsset: opacity out of [0,1]");
        }
    }
}

namespace {

constexpr float kBlobRadius = 0.72f;  // occupancy prior: rough object radius
constexpr float kBlobGain = 4.0f;

bool is_pow2(int v) { return v >= 1 && (v & (v - 1)) == 0; }

void validate_dims(const ToyModelDims& d) {
    if (d.grid_resolution < 4 || d.grid_resolution % 4 != 0 || !is_pow2(d.grid_resolution)) {
        throw InvalidInputError("ToyModelDims: grid resolution must be a power of two >= 4");
    }
    if (d.width < 4) throw InvalidInputError("ToyModelDims: width must be >= 4");
    if (d.blocks < 1) throw InvalidInputError("ToyModelDims: blocks must be >= 1");
    if (d.cond_channels < 1) throw InvalidInputError("ToyModelDims: cond channels must be >= 1");
    if (d.slat_channels < 4) throw InvalidInputError("ToyModelDims: slat channels must be >= 4");
}

FeatureMatrix seeded_weight(uint64_t seed, const std::string& purpose, uint64_t block, int rows,
                            int cols) {
    Rng rng(seed, purpose, block);
    FeatureMatrix w = seeded_gaussian(rng, rows, cols);
    const float scale = 1.0f / std::sqrt(static_cast<float>(rows));
    for (auto& x : w.data) x *= scale;
    return w;
}

}  // namespace

ToyFlowModel build_toy_model(uint64_t seed, AttentionStage stage, const ToyModelDims& dims) {
    validate_dims(dims);
    ToyFlowModel m;
    m.stage = stage;
    m.dims = dims;
    m.seed = seed;
    const std::string p = stage == AttentionStage::geo ? "geo." : "tex.";
    const int w = dims.width;
    for (int b = 0; b < dims.blocks; ++b) {
        const auto ub = static_cast<uint64_t>(b);
        BlockWeights bw;
        bw.wq = seeded_weight(seed, p + "wq", ub, w, w);
        bw.wk = seeded_weight(seed, p + "wk", ub, w, w);
        bw.wv = seeded_weight(seed, p + "wv", ub, w, w);
        bw.wo = seeded_weight(seed, p + "wo", ub, w, w);
        bw.cq = seeded_weight(seed, p + "cq", ub, w, w);
        bw.ck = seeded_weight(seed, p + "ck", ub, dims.cond_channels, w);
        bw.cv = seeded_weight(seed, p + "cv", ub, dims.cond_channels, w);
        bw.co = seeded_weight(seed, p + "co", ub, w, w);
        bw.ff1 = seeded_weight(seed, p + "ff1", ub, w, 2 * w);
        bw.ff2 = seeded_weight(seed, p + "ff2", ub, 2 * w, w);
        m.blocks.push_back(std::move(bw));
    }
    m.pos_proj = seeded_weight(seed, p + "pos", 0, 4, w);
    Rng trng(seed, p + "time");
    m.time_vec.resize(static_cast<size_t>(w));
    const float tscale = 1.0f / std::sqrt(static_cast<float>(w));
    for (auto& t : m.time_vec) t = trng.next_gaussian() * tscale;
    if (stage == AttentionStage::geo) {
        const int factor = 4;  // fine voxels per coarse cell edge
        m.occ_head = seeded_weight(seed, p + "occ", 0, w, factor * factor * factor);
        m.out_proj = seeded_weight(seed, p + "out", 0, w, w);
    } else {
        m.in_proj = seeded_weight(seed, p + "in", 0, dims.slat_channels, w);
        m.out_proj = seeded_weight(seed, p + "out", 0, w, dims.slat_channels);
    }
    return m;
}

FeatureMatrix rectified_flow_step(const FeatureMatrix& x, const FeatureMatrix& velocity,
                                  float dt) {
    if (!x.same_shape(velocity)) {
        throw InvalidInputError("rectified_flow_step: state/velocity shapes differ");
    }
    if (!(dt > 0.0f)) throw InvalidInputError("rectified_flow_step: dt must be positive");
    FeatureMatrix out(x.rows, x.cols);
    for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = x.data[i] + dt * velocity.data[i];
    return out;
}

// ---------------------------------------------------------------------------
// KvCache
// ---------------------------------------------------------------------------

const KvCacheEntry& KvCache::get(int step, int layer) const {
    if (spilled()) {
        throw InvalidInputError("KvCache: use fetch() on a spilled cache");
    }
    return entries[static_cast<size_t>(step) * layers + layer];
}

void KvCache::put(int step, int layer, FeatureMatrix k, FeatureMatrix v) {
    auto& e = entries[static_cast<size_t>(step) * layers + layer];
    e.k = std::move(k);
    e.v = std::move(v);
}

size_t KvCache::byte_size() const {
    size_t total = 0;
    for (const auto& e : entries) total += (e.k.size() + e.v.size()) * sizeof(float);
    return total;
}

void KvCache::spill_to(const std::string& dir) {
    if (spilled()) return;
    std::filesystem::create_directories(dir);
    spill_paths.resize(entries.size());
    const char* tag = stage == AttentionStage::geo ? "geo" : "tex";
    for (int s = 0; s < steps; ++s) {
        for (int l = 0; l < layers; ++l) {
            const size_t idx = static_cast<size_t>(s) * layers + l;
            const KvCacheEntry& e = entries[idx];
            if (!e.k.same_shape(e.v)) {
                throw InvalidInputError("KvCache: spill requires matching k/v shapes");
            }
            std::string path = dir + "/kv_" + tag + "_s" + std::to_string(s) + "_l" +
                               std::to_string(l) + ".i3dt";
            std::vector<float> stacked(e.k.data.size() * 2);
            std::copy(e.k.data.begin(), e.k.data.end(), stacked.begin());
            std::copy(e.v.data.begin(), e.v.data.end(), stacked.begin() + e.k.data.size());
            save_tensor_f32(path,
                            {2, static_cast<uint64_t>(e.k.rows), static_cast<uint64_t>(e.k.cols)},
                            stacked.data());
            spill_paths[idx] = std::move(path);
        }
    }
    entries.clear();
    entries.shrink_to_fit();
}

namespace {

// Either a borrowed in-memory entry or one loaded back from a spill file.
struct FetchedKv {
    const KvCacheEntry* ref = nullptr;
    KvCacheEntry owned;
    const KvCacheEntry& entry() const { return ref ? *ref : owned; }
};

FetchedKv fetch_kv(const KvCache& cache, int step, int layer) {
    FetchedKv f;
    if (!cache.spilled()) {
        f.ref = &cache.get(step, layer);
        return f;
    }
    const std::string& path = cache.spill_paths[static_cast<size_t>(step) * cache.layers + layer];
    TensorFile t = load_tensor(path);
    if (t.dtype != 0 || t.dims.size() != 3 || t.dims[0] != 2) {
        throw IoError("KvCache: malformed spill file " + path);
    }
    const int rows = static_cast<int>(t.dims[1]);
    const int cols = static_cast<int>(t.dims[2]);
    f.owned.k = FeatureMatrix(rows, cols);
    f.owned.v = FeatureMatrix(rows, cols);
    const size_t half = f.owned.k.data.size();
    std::copy_n(t.f32.begin(), half, f.owned.k.data.begin());
    std::copy_n(t.f32.begin() + half, half, f.owned.v.data.begin());
    return f;
}

// ---------------------------------------------------------------------------
// Denoiser core
// ---------------------------------------------------------------------------

struct HookContext {
    const HookSpec* hook = nullptr;
    const ExternalCaches* external = nullptr;
    const std::vector<StepCorrespondence>* step_maps = nullptr;
    const std::vector<int>* hook_layers = nullptr;  // null = all layers
    int step = 0;
    int degenerate_tokens = 0;

    bool layer_enabled(int layer) const {
        if (hook == nullptr || hook->variant == HookVariant::none) return false;
        if (hook_layers == nullptr || hook_layers->empty()) return true;
        return std::find(hook_layers->begin(), hook_layers->end(), layer) != hook_layers->end();
    }
};

FeatureMatrix pos_embedding(const ToyFlowModel& model, const std::vector<VoxelPos>& positions,
                            int norm_resolution) {
    FeatureMatrix coords(static_cast<int>(positions.size()), 4);
    const float inv = 1.0f / static_cast<float>(norm_resolution);
    for (size_t i = 0; i < positions.size(); ++i) {
        coords.at(static_cast<int>(i), 0) = positions[i][0] * inv;
        coords.at(static_cast<int>(i), 1) = positions[i][1] * inv;
        coords.at(static_cast<int>(i), 2) = positions[i][2] * inv;
        coords.at(static_cast<int>(i), 3) = 1.0f;
    }
    return matmul(coords, model.pos_proj);
}

FeatureMatrix hooked_self_attention(const FeatureMatrix& q, const FeatureMatrix& k,
                                    const FeatureMatrix& v, HookContext& ctx, int layer) {
    if (!ctx.layer_enabled(layer)) return attention(q, k, v);
    const HookSpec& hook = *ctx.hook;
    const FetchedKv src = fetch_kv(*ctx.external->source, ctx.step, layer);
    const FetchedKv tgt = fetch_kv(*ctx.external->target, ctx.step, layer);
    const KvCacheEntry& s = src.entry();
    const KvCacheEntry& t = tgt.entry();
    switch (hook.variant) {
        case HookVariant::interp_kv:
            return interp_attention(q, s.k, t.k, s.v, t.v, hook.alpha);
        case HookVariant::aid_inner:
            return aid_inner(q, s.k, t.k, k, s.v, t.v, v, hook.alpha);
        case HookVariant::aid_outer:
            return aid_outer(q, s.k, t.k, k, s.v, t.v, v, hook.alpha);
        case HookVariant::fused_structure: {
            const StepCorrespondence& corr = (*ctx.step_maps)[static_cast<size_t>(ctx.step)];
            return fused_structure_attention(q, s.k, s.v, t.k, t.v, k, v, hook.alpha, corr.map,
                                             corr.layout);
        }
        case HookVariant::texture_fusion: {
            const TextureMatches matches = texture_match(k, s.k, t.k);
            TextureFuseResult fused =
                texture_fuse(k, v, matches, s.k, s.v, t.k, t.v, hook.alpha);
            ctx.degenerate_tokens += fused.degenerate_tokens;
            return attention(q, fused.k, fused.v);
        }
        case HookVariant::none:
            break;
    }
    return attention(q, k, v);
}

// One velocity evaluation: hooked self-attention, cross-attention to the
// condition, feedforward, all residual, then the output projection.
FeatureMatrix velocity_field(const ToyFlowModel& model, const FeatureMatrix& state,
                             const FeatureMatrix& pos_embed, const ConditionTokens& condition,
                             float t_norm, HookContext& ctx, KvCache* capture) {
    FeatureMatrix h = model.stage == AttentionStage::geo ? state : matmul(state, model.in_proj);
    for (int i = 0; i < h.rows; ++i) {
        float* row = h.row(i);
        const float* prow = pos_embed.row(i);
        for (int c = 0; c < h.cols; ++c) {
            row[c] += prow[c] + model.time_vec[static_cast<size_t>(c)] * t_norm;
        }
    }
    for (int b = 0; b < model.dims.blocks; ++b) {
        const BlockWeights& bw = model.blocks[static_cast<size_t>(b)];
        FeatureMatrix q = matmul(h, bw.wq);
        FeatureMatrix k = matmul(h, bw.wk);
        FeatureMatrix v = matmul(h, bw.wv);
        if (capture != nullptr) capture->put(ctx.step, b, k, v);
        FeatureMatrix attn = hooked_self_attention(q, k, v, ctx, b);
        FeatureMatrix attn_proj = matmul(attn, bw.wo);
        for (size_t i = 0; i < h.data.size(); ++i) h.data[i] += attn_proj.data[i];

        FeatureMatrix cq = matmul(h, bw.cq);
        FeatureMatrix ck = matmul(condition.tokens, bw.ck);
        FeatureMatrix cv = matmul(condition.tokens, bw.cv);
        FeatureMatrix cross = matmul(attention(cq, ck, cv), bw.co);
        for (size_t i = 0; i < h.data.size(); ++i) h.data[i] += cross.data[i];

        FeatureMatrix ff = matmul(h, bw.ff1);
        for (auto& x : ff.data) x = std::tanh(x);
        FeatureMatrix ff_out = matmul(ff, bw.ff2);
        for (size_t i = 0; i < h.data.size(); ++i) h.data[i] += ff_out.data[i];
    }
    return matmul(h, model.out_proj);
}

void validate_hook_for_stage(const ToyFlowModel& model, const HookSpec& hook,
                             const ExternalCaches* external,
                             const std::vector<StepCorrespondence>* step_maps, int steps) {
    if (!(hook.alpha >= 0.0f && hook.alpha <= 1.0f)) {
        throw InvalidInputError("hook alpha must be in [0, 1]");
    }
    const bool geo = model.stage == AttentionStage::geo;
    if (geo && hook.variant == HookVariant::texture_fusion) {
        throw ConfigError("texture_fusion hook applies to stage-2 only");
    }
    if (!geo && hook.variant == HookVariant::fused_structure) {
        throw ConfigError("fused_structure hook applies to stage-1 only");
    }
    if (hook.variant == HookVariant::none) return;
    if (external == nullptr || external->source == nullptr || external->target == nullptr) {
        throw ConfigError(std::string("hook ") + hook_variant_name(hook.variant) +
                          " requires captured source/target K/V caches");
    }
    for (const KvCache* cache : {external->source, external->target}) {
        if (cache->steps < steps || cache->layers != model.dims.blocks) {
            throw ConfigError("external K/V cache does not cover this run's steps/layers");
        }
    }
    if (hook.variant == HookVariant::fused_structure &&
        (step_maps == nullptr || static_cast<int>(step_maps->size()) < steps)) {
        throw ConfigError("fused_structure requires a per-step correspondence source");
    }
}

}  // namespace

FeatureMatrix toy_velocity(const ToyFlowModel& model, const FeatureMatrix& state,
                           const std::vector<VoxelPos>& positions,
                           const ConditionTokens& condition, float t_norm) {
    if (static_cast<int>(positions.size()) != state.rows) {
        throw InvalidInputError("toy_velocity: positions must align with state rows");
    }
    const int norm_res = model.stage == AttentionStage::geo ? model.kv_resolution()
                                                            : model.dims.grid_resolution;
    const FeatureMatrix pos = pos_embedding(model, positions, norm_res);
    HookSpec none;
    HookContext ctx;
    ctx.hook = &none;
    return velocity_field(model, state, pos, condition, t_norm, ctx, nullptr);
}

Stage1Result stage1_denoise(const ToyFlowModel& model, const ConditionTokens& condition,
                            const HookSpec& hook, const ExternalCaches* external,
                            const std::vector<StepCorrespondence>* step_maps,
                            const MorphSchedule& schedule, uint64_t seed,
                            const std::vector<int>* hook_layers) {
    if (model.stage != AttentionStage::geo) {
        throw InvalidInputError("stage1_denoise: model is not a structure-stage model");
    }
    if (condition.tokens.cols != model.dims.cond_channels) {
        throw InvalidInputError("stage1_denoise: condition width does not match model");
    }
    const int steps = schedule.denoise_steps;
    validate_hook_for_stage(model, hook, external, step_maps, steps);

    const int n = model.dims.grid_resolution;
    const int n_kv = model.kv_resolution();
    const int tokens = n_kv * n_kv * n_kv;

    std::vector<VoxelPos> cells;
    cells.reserve(static_cast<size_t>(tokens));
    for (int x = 0; x < n_kv; ++x)
        for (int y = 0; y < n_kv; ++y)
            for (int z = 0; z < n_kv; ++z) cells.push_back({x, y, z});
    const FeatureMatrix pos_embed = pos_embedding(model, cells, n_kv);

    Rng noise(seed, "stage1_noise");
    FeatureMatrix state = seeded_gaussian(noise, tokens, model.dims.width);

    Stage1Result result;
    result.captured.stage = AttentionStage::geo;
    result.captured.steps = steps;
    result.captured.layers = model.dims.blocks;
    result.captured.entries.resize(static_cast<size_t>(steps) * model.dims.blocks);

    HookContext ctx;
    ctx.hook = &hook;
    ctx.external = external;
    ctx.step_maps = step_maps;
    ctx.hook_layers = hook_layers;

    const float dt = 1.0f / static_cast<float>(steps);
    for (int t = 0; t < steps; ++t) {
        ctx.step = t;
        const float t_norm = static_cast<float>(t) / static_cast<float>(steps);
        try {
            FeatureMatrix vel = velocity_field(model, state, pos_embed, condition, t_norm, ctx,
                                               &result.captured);
            state = rectified_flow_step(state, vel, dt);
        } catch (const IoError& e) {
            throw IoError("stage-1 step " + std::to_string(t) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("stage-1 step " + std::to_string(t) + ": " + e.what());
        }
    }
    state.ensure_finite("stage1 final state");

    // Expand each coarse token into its 4^3 fine-voxel logits, with a radial
    // prior so default descriptors produce blob-like, non-degenerate shapes.
    const FeatureMatrix logits = matmul(state, model.occ_head);
    const int factor = n / n_kv;
    result.occupancy = DenseGrid(n, 1);
    const float center = 0.5f * static_cast<float>(n - 1);
    const float inv_half = 2.0f / static_cast<float>(n);
    for (int token = 0; token < tokens; ++token) {
        const VoxelPos& cell = cells[static_cast<size_t>(token)];
        for (int dx = 0; dx < factor; ++dx) {
            for (int dy = 0; dy < factor; ++dy) {
                for (int dz = 0; dz < factor; ++dz) {
                    const int x = cell[0] * factor + dx;
                    const int y = cell[1] * factor + dy;
                    const int z = cell[2] * factor + dz;
                    const float rx = (static_cast<float>(x) - center) * inv_half;
                    const float ry = (static_cast<float>(y) - center) * inv_half;
                    const float rz = (static_cast<float>(z) - center) * inv_half;
                    const float r = std::sqrt(rx * rx + ry * ry + rz * rz);
                    const int local = (dx * factor + dy) * factor + dz;
                    result.occupancy.at(x, y, z, 0) =
                        logits.at(token, local) + kBlobGain * (kBlobRadius - r);
                }
            }
        }
    }
    result.active = active_voxels(result.occupancy);
    return result;
}

Stage2Result stage2_denoise(const ToyFlowModel& model, const ConditionTokens& condition,
                            const std::vector<VoxelPos>& structure, const HookSpec& hook,
                            const ExternalCaches* external, const MorphSchedule& schedule,
                            uint64_t seed, const std::vector<int>* hook_layers) {
    if (model.stage != AttentionStage::tex) {
        throw InvalidInputError("stage2_denoise: model is not a latent-stage model");
    }
    if (structure.empty()) {
        throw InvalidInputError("stage2_denoise: structure must be non-empty");
    }
    if (condition.tokens.cols != model.dims.cond_channels) {
        throw InvalidInputError("stage2_denoise: condition width does not match model");
    }
    const int steps = schedule.denoise_steps;
    validate_hook_for_stage(model, hook, external, nullptr, steps);

    const int voxels = static_cast<int>(structure.size());
    const FeatureMatrix pos_embed = pos_embedding(model, structure, model.dims.grid_resolution);

    Rng noise(seed, "stage2_noise");
    FeatureMatrix state = seeded_gaussian(noise, voxels, model.dims.slat_channels);

    Stage2Result result;
    result.captured.stage = AttentionStage::tex;
    result.captured.steps = steps;
    result.captured.layers = model.dims.blocks;
    result.captured.entries.resize(static_cast<size_t>(steps) * model.dims.blocks);

    HookContext ctx;
    ctx.hook = &hook;
    ctx.external = external;
    ctx.hook_layers = hook_layers;

    const float dt = 1.0f / static_cast<float>(steps);
    for (int t = 0; t < steps; ++t) {
        ctx.step = t;
        const float t_norm = static_cast<float>(t) / static_cast<float>(steps);
        try {
            FeatureMatrix vel = velocity_field(model, state, pos_embed, condition, t_norm, ctx,
                                               &result.captured);
            state = rectified_flow_step(state, vel, dt);
        } catch (const IoError& e) {
            throw IoError("stage-2 step " + std::to_string(t) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("stage-2 step " + std::to_string(t) + ": " + e.what());
        }
    }
    state.ensure_finite("stage2 final state");

    result.slat.positions = structure;
    result.slat.resolution = model.dims.grid_resolution;
    result.slat.features = std::move(state);
    result.slat.validate();
    result.degenerate_tokens = ctx.degenerate_tokens;
    return result;
}

ColoredVoxelAsset decode_slat(const SparseVoxelLatent& slat) {
    slat.validate();
    if (slat.features.cols < 4) {
        throw InvalidInputError("decode_slat: needs at least 4 feature channels");
    }
    auto sigmoid = [](float x) { return 1.0f / (1.0f + std::exp(-x)); };
    ColoredVoxelAsset asset;
    asset.resolution = slat.resolution;
    asset.positions = slat.positions;
    asset.rgb.resize(slat.positions.size());
    asset.opacity.resize(slat.positions.size());
    for (int i = 0; i < slat.features.rows; ++i) {
        const float* f = slat.features.row(i);
        asset.rgb[static_cast<size_t>(i)] = {sigmoid(f[0]), sigmoid(f[1]), sigmoid(f[2])};
        asset.opacity[static_cast<size_t>(i)] = sigmoid(f[3]);
    }
    asset.validate();
    return asset;
}

std::vector<VoxelPos> active_voxels(const DenseGrid& occupancy) {
    if (occupancy.channels != 1) {
        throw InvalidInputError("active_voxels: occupancy grid must have one channel");
    }
    std::vector<VoxelPos> active;
    const int n = occupancy.resolution;
    for (int x = 0; x < n; ++x) {
        for (int y = 0; y < n; ++y) {
            for (int z = 0; z < n; ++z) {
                if (occupancy.at(x, y, z, 0) > 0.0f) active.push_back({x, y, z});
            }
        }
    }
    return active;
}

}  // namespace interp3d
