#pragma once

#include <string>
#include <vector>

#include "interp3d/config.hpp"
#include "interp3d/metrics.hpp"
#include "interp3d/schedule.hpp"
#include "interp3d/toyprior.hpp"

namespace interp3d {

struct MorphFrame {
    double alpha = 0.0;
    ColoredVoxelAsset asset;
    int degenerate_tokens = 0;
};

struct PhaseTimings {
    double prepare_s = 0.0;
    double frames_s = 0.0;
    double total_s = 0.0;
};

/// Ordered morph result. Frames are sorted by alpha; the first and last are
/// bitwise equal to the standalone source/target generations.
struct MorphTrajectory {
    std::vector<MorphFrame> frames;
    MorphConfig config;  // resolved
    MorphSchedule schedule;
    PhaseTimings timings;
};

/// Shared state of one run: models, conditions, endpoint generations with
/// their captured caches, and per-step patch correspondences. Reusable
/// across hook variants on the same seed.
struct PreparedRun {
    ToyFlowModel geo_model;
    ToyFlowModel tex_model;
    ConditionTokens cond_source;
    ConditionTokens cond_target;
    MorphSchedule schedule;
    Stage1Result source_stage1, target_stage1;
    Stage2Result source_stage2, target_stage2;
    ColoredVoxelAsset source_asset, target_asset;
    std::vector<StepCorrespondence> step_maps;  // empty unless caches captured
    bool caches_available = false;
    double prepare_seconds = 0.0;
};

PreparedRun prepare_run(const MorphConfig& config);

/// Morphs the interior frames with the config's hooks; endpoints bypass all
/// hooks and reuse the prepared generations.
MorphTrajectory morph_with_hooks(const PreparedRun& prepared, const MorphConfig& config);

MorphTrajectory run_morph(const MorphConfig& config);

struct AblationVariant {
    std::string name;
    bool semantic_align = false;
    HookVariant stage1 = HookVariant::none;
    HookVariant stage2 = HookVariant::none;
};

/// Expands names ("all" or comma-free list entries) into the progressive
/// variant stack: condition_interp, semantic_align, structure_interp,
/// texture_fusion.
std::vector<AblationVariant> ablation_variants(const std::vector<std::string>& names);

struct MetricRow {
    std::string variant;
    std::string metric;
    double value = 0.0;
};

/// Runs every variant on identical seeds (endpoint generations shared) and
/// evaluates the full metric suite per variant.
std::vector<MetricRow> run_ablation(const MorphConfig& config,
                                    const std::vector<AblationVariant>& variants);

std::vector<MetricRow> metric_rows(const TrajectoryMetrics& m, const std::string& variant);

// ---------------------------------------------------------------------------
// Run directory io
// ---------------------------------------------------------------------------

std::string frame_file_name(int index, double alpha);

/// Writes frames/*.ply and manifest.json under out_dir.
void write_trajectory(const MorphTrajectory& trajectory, const std::string& out_dir);

struct LoadedTrajectory {
    std::vector<ColoredVoxelAsset> frames;
    std::vector<double> alphas;
    MorphConfig config;
};

LoadedTrajectory load_trajectory(const std::string& dir);

/// CSV: run_id,[variant,]metric,value,views,frames,extractor,seed
void write_metrics_csv(const std::string& path, const std::string& run_id,
                       const std::vector<MetricRow>& rows, bool with_variant_column, int views,
                       int frames, const std::string& extractor, uint64_t seed);

}  // namespace interp3d
