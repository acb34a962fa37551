#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "interp3d/attention.hpp"
#include "interp3d/condition.hpp"

namespace interp3d {

/// Full run configuration; mirrors the JSON config schema one-to-one.
struct MorphConfig {
    std::string run_id = "run";
    uint64_t seed = 0;
    ConditionInput source;
    ConditionInput target;
    int frames = 5;               // L
    double beta = 5.0;
    int steps = 8;                // T, both stages
    int grid_resolution = 16;     // N
    int slat_channels = 8;        // C
    int condition_tokens = 64;    // M
    int condition_channels = 16;
    int model_width = 16;
    int blocks = 2;
    int s_max = 4;
    float tau0 = 0.5f;
    HookVariant stage1_hook = HookVariant::fused_structure;
    HookVariant stage2_hook = HookVariant::texture_fusion;
    bool semantic_align = true;
    bool capture_kv_caches = true;
    std::vector<int> hook_layers;  // empty = all self-attention layers
    int workers = 1;  // CLI execution knob; not part of the config schema
    int views = 16;
    int image_size = 64;
    std::string extractor = "proj";
    std::string output_dir = "out";
    std::string cache_spill_dir;
    uint64_t cache_spill_limit_bytes = 0;  // 0 disables spilling

    /// Throws ConfigError listing every invalid field at once.
    void validate() const;
};

/// Strict parse: unknown fields are errors. Accepts either a config document
/// or a run manifest (the embedded "config" object is used).
MorphConfig parse_config_json(const std::string& json_text, const std::string& origin);
MorphConfig load_config(const std::string& path);

std::string config_to_json(const MorphConfig& config);

/// INTERP3D_SEED, when set, overrides the config seed.
void apply_env_overrides(MorphConfig& config);

ConditionInput parse_descriptor_json(const std::string& json_text, const std::string& origin);
ConditionInput load_descriptor(const std::string& path);
std::string descriptor_to_json(const ConditionInput& input);

}  // namespace interp3d
