#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "interp3d/attention.hpp"
#include "interp3d/condition.hpp"
#include "interp3d/correspond.hpp"
#include "interp3d/schedule.hpp"
#include "interp3d/tensor.hpp"

namespace interp3d {

/// Decoded asset: active voxels with color and opacity.
struct ColoredVoxelAsset {
    std::vector<VoxelPos> positions;
    std::vector<std::array<float, 3>> rgb;   // in [0,1]
    std::vector<float> opacity;              // in [0,1]
    int resolution = 0;

    void validate() const;
};

struct ToyModelDims {
    int grid_resolution = 16;   // N; must be a multiple of 4
    int width = 16;             // transformer channel width
    int blocks = 2;             // B
    int cond_channels = 16;     // must match ConditionTokens
    int slat_channels = 8;      // C of the stage-2 latent
};

struct BlockWeights {
    FeatureMatrix wq, wk, wv, wo;       // self-attention projections
    FeatureMatrix cq, ck, cv, co;       // cross-attention projections
    FeatureMatrix ff1, ff2;             // two-layer feedforward
};

/// Frozen seeded transformer; weights depend only on (seed, stage, dims).
struct ToyFlowModel {
    AttentionStage stage = AttentionStage::geo;
    ToyModelDims dims;
    uint64_t seed = 0;
    std::vector<BlockWeights> blocks;
    FeatureMatrix out_proj;             // width x state channels
    FeatureMatrix in_proj;              // state channels x width (stage-2)
    FeatureMatrix pos_proj;             // 4 x width (homogeneous normalized coords)
    FeatureMatrix occ_head;             // width x factor^3 (stage-1)
    std::vector<float> time_vec;        // width

    int state_channels() const {
        return stage == AttentionStage::geo ? dims.width : dims.slat_channels;
    }
    int kv_resolution() const { return dims.grid_resolution / 4; }
};

ToyFlowModel build_toy_model(uint64_t seed, AttentionStage stage, const ToyModelDims& dims);

/// Euler update x + dt * velocity.
FeatureMatrix rectified_flow_step(const FeatureMatrix& x, const FeatureMatrix& velocity,
                                  float dt);

/// Captured self-attention K/V, indexed by (step, layer).
struct KvCacheEntry {
    FeatureMatrix k, v;
};

struct KvCache {
    AttentionStage stage = AttentionStage::geo;
    int steps = 0;
    int layers = 0;
    std::vector<KvCacheEntry> entries;  // step * layers + layer
    std::vector<std::string> spill_paths;  // non-empty when spilled to disk

    const KvCacheEntry& get(int step, int layer) const;
    void put(int step, int layer, FeatureMatrix k, FeatureMatrix v);

    bool spilled() const { return !spill_paths.empty(); }
    /// Writes each (step, layer) entry as one stacked [2, rows, cols] I3DT
    /// file under dir and drops the in-memory copies.
    void spill_to(const std::string& dir);
    size_t byte_size() const;

private:
    mutable KvCacheEntry loaded_;  // scratch for spilled reads
};

struct ExternalCaches {
    const KvCache* source = nullptr;
    const KvCache* target = nullptr;
};

/// Patch correspondence in effect at one denoise step.
struct StepCorrespondence {
    CorrespondenceMap map;
    PatchGrid layout;
};

struct Stage1Result {
    DenseGrid occupancy;                 // N^3 x 1 logits
    std::vector<VoxelPos> active;        // cells with logit > 0
    KvCache captured;
};

struct Stage2Result {
    SparseVoxelLatent slat;
    KvCache captured;
    int degenerate_tokens = 0;
};

/// Stage-1 structure generation: T Euler steps over the coarse token grid;
/// self-attention runs through the hook, cross-attention reads the condition.
/// fused_structure requires external caches and per-step correspondences.
Stage1Result stage1_denoise(const ToyFlowModel& model, const ConditionTokens& condition,
                            const HookSpec& hook, const ExternalCaches* external,
                            const std::vector<StepCorrespondence>* step_maps,
                            const MorphSchedule& schedule, uint64_t seed,
                            const std::vector<int>* hook_layers = nullptr);

/// Stage-2 latent generation over the active voxel set. texture_fusion
/// rewrites K/V against external caches before each self-attention.
Stage2Result stage2_denoise(const ToyFlowModel& model, const ConditionTokens& condition,
                            const std::vector<VoxelPos>& structure, const HookSpec& hook,
                            const ExternalCaches* external, const MorphSchedule& schedule,
                            uint64_t seed, const std::vector<int>* hook_layers = nullptr);

/// One hook-free velocity evaluation (exposed for direct numeric checks).
/// positions row-count must equal the state row-count.
FeatureMatrix toy_velocity(const ToyFlowModel& model, const FeatureMatrix& state,
                           const std::vector<VoxelPos>& positions,
                           const ConditionTokens& condition, float t_norm);

/// rgb = sigmoid(channels 0..2), opacity = sigmoid(channel 3).
ColoredVoxelAsset decode_slat(const SparseVoxelLatent& slat);

std::vector<VoxelPos> active_voxels(const DenseGrid& occupancy);

}  // namespace interp3d
