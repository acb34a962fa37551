#include "interp3d/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "interp3d/io_ply.hpp"
#include "interp3d/version.hpp"

namespace interp3d {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

ToyModelDims model_dims(const MorphConfig& c) {
    ToyModelDims d;
    d.grid_resolution = c.grid_resolution;
    d.width = c.model_width;
    d.blocks = c.blocks;
    d.cond_channels = c.condition_channels;
    d.slat_channels = c.slat_channels;
    return d;
}

std::vector<StepCorrespondence> build_step_maps(const SparseVoxelLatent& source_slat,
                                                const SparseVoxelLatent& target_slat,
                                                const MorphSchedule& schedule, int kv_resolution) {
    const DenseGrid source_grid = densify_project(source_slat, kv_resolution);
    const DenseGrid target_grid = densify_project(target_slat, kv_resolution);
    std::vector<StepCorrespondence> maps(static_cast<size_t>(schedule.denoise_steps));
    int prev_side = -1;
    for (int t = 0; t < schedule.denoise_steps; ++t) {
        int side = patch_size_schedule(t, schedule.denoise_steps, schedule.max_patch_side);
        side = std::min(side, kv_resolution);
        if (side == prev_side) {
            maps[static_cast<size_t>(t)] = maps[static_cast<size_t>(t - 1)];
            continue;
        }
        prev_side = side;
        StepCorrespondence sc;
        const PatchGrid source_patches = partition_patches(source_grid, side);
        const PatchGrid target_patches = partition_patches(target_grid, side);
        sc.map = dynamic_patch_correspondence(source_patches, target_patches, schedule.tau0);
        sc.layout = source_patches;
        maps[static_cast<size_t>(t)] = std::move(sc);
    }
    return maps;
}

struct GeneratedFrame {
    Stage1Result stage1;
    Stage2Result stage2;
    ColoredVoxelAsset asset;
};

GeneratedFrame generate_frame(const ToyFlowModel& geo, const ToyFlowModel& tex,
                              const ConditionTokens& condition, const MorphSchedule& schedule,
                              uint64_t seed, const HookSpec& stage1_hook,
                              const HookSpec& stage2_hook, const ExternalCaches* geo_ext,
                              const ExternalCaches* tex_ext,
                              const std::vector<StepCorrespondence>* step_maps,
                              const std::vector<int>* hook_layers) {
    GeneratedFrame frame;
    frame.stage1 = stage1_denoise(geo, condition, stage1_hook, geo_ext, step_maps, schedule,
                                  seed, hook_layers);
    if (frame.stage1.active.empty()) {
        throw Error("structure stage produced an empty active set");
    }
    frame.stage2 = stage2_denoise(tex, condition, frame.stage1.active, stage2_hook, tex_ext,
                                  schedule, seed, hook_layers);
    frame.asset = decode_slat(frame.stage2.slat);
    return frame;
}

}  // namespace

PreparedRun prepare_run(const MorphConfig& config) {
    config.validate();
    const auto start = Clock::now();

    PreparedRun run;
    const ToyModelDims dims = model_dims(config);
    run.geo_model = build_toy_model(config.seed, AttentionStage::geo, dims);
    run.tex_model = build_toy_model(config.seed, AttentionStage::tex, dims);

    run.cond_source = encode_condition(config.source, config.condition_tokens,
                                       config.condition_channels, ConditionTag::source);
    run.cond_target = encode_condition(config.target, config.condition_tokens,
                                       config.condition_channels, ConditionTag::target);

    run.schedule = alpha_schedule(config.frames, config.beta);
    run.schedule.denoise_steps = config.steps;
    run.schedule.max_patch_side = config.s_max;
    run.schedule.tau0 = config.tau0;

    const HookSpec no_hook;
    GeneratedFrame source = generate_frame(run.geo_model, run.tex_model, run.cond_source,
                                           run.schedule, config.seed, no_hook, no_hook, nullptr,
                                           nullptr, nullptr, nullptr);
    GeneratedFrame target = generate_frame(run.geo_model, run.tex_model, run.cond_target,
                                           run.schedule, config.seed, no_hook, no_hook, nullptr,
                                           nullptr, nullptr, nullptr);
    run.source_asset = std::move(source.asset);
    run.target_asset = std::move(target.asset);

    if (config.capture_kv_caches) {
        run.caches_available = true;
        run.step_maps = build_step_maps(source.stage2.slat, target.stage2.slat, run.schedule,
                                        run.geo_model.kv_resolution());
        run.source_stage1 = std::move(source.stage1);
        run.target_stage1 = std::move(target.stage1);
        run.source_stage2 = std::move(source.stage2);
        run.target_stage2 = std::move(target.stage2);

        if (!config.cache_spill_dir.empty() && config.cache_spill_limit_bytes > 0) {
            const size_t total = run.source_stage1.captured.byte_size() +
                                 run.target_stage1.captured.byte_size() +
                                 run.source_stage2.captured.byte_size() +
                                 run.target_stage2.captured.byte_size();
            if (total > config.cache_spill_limit_bytes) {
                run.source_stage1.captured.spill_to(config.cache_spill_dir + "/source");
                run.target_stage1.captured.spill_to(config.cache_spill_dir + "/target");
                run.source_stage2.captured.spill_to(config.cache_spill_dir + "/source");
                run.target_stage2.captured.spill_to(config.cache_spill_dir + "/target");
            }
        }
    } else {
        run.source_stage2.degenerate_tokens = source.stage2.degenerate_tokens;
        run.target_stage2.degenerate_tokens = target.stage2.degenerate_tokens;
    }
    run.prepare_seconds = seconds_since(start);
    return run;
}

MorphTrajectory morph_with_hooks(const PreparedRun& prepared, const MorphConfig& config) {
    config.validate();
    if (config.frames != prepared.schedule.frame_count ||
        config.steps != prepared.schedule.denoise_steps ||
        config.grid_resolution != prepared.geo_model.dims.grid_resolution ||
        config.seed != prepared.geo_model.seed) {
        throw ConfigError("morph_with_hooks: config does not match the prepared run");
    }
    const auto start = Clock::now();

    MorphTrajectory trajectory;
    trajectory.config = config;
    trajectory.schedule = prepared.schedule;

    const int interior = config.frames - 2;
    trajectory.frames.resize(static_cast<size_t>(config.frames));
    trajectory.frames.front() = {prepared.schedule.alphas.front(), prepared.source_asset,
                                 prepared.source_stage2.degenerate_tokens};
    trajectory.frames.back() = {prepared.schedule.alphas.back(), prepared.target_asset,
                                prepared.target_stage2.degenerate_tokens};

    const bool needs_caches =
        config.stage1_hook != HookVariant::none || config.stage2_hook != HookVariant::none;
    if (needs_caches && !prepared.caches_available) {
        throw ConfigError(
            "hooked morphing requires captured source/target K/V caches (capture_kv_caches)");
    }

    const ExternalCaches geo_ext{&prepared.source_stage1.captured,
                                 &prepared.target_stage1.captured};
    const ExternalCaches tex_ext{&prepared.source_stage2.captured,
                                 &prepared.target_stage2.captured};

    // Condition alignment is recomputed per call so variants can toggle it.
    CorrespondenceMap cond_map =
        config.semantic_align ? semantic_align(prepared.cond_source, prepared.cond_target)
                              : CorrespondenceMap::identity(
                                    static_cast<size_t>(config.condition_tokens));
    if (!config.semantic_align) {
        std::fill(cond_map.matched.begin(), cond_map.matched.end(), 1);
    }

    const std::vector<int>* hook_layers =
        config.hook_layers.empty() ? nullptr : &config.hook_layers;

    auto morph_one = [&](int frame_index) {
        const float alpha =
            static_cast<float>(prepared.schedule.alphas[static_cast<size_t>(frame_index)]);
        const ConditionTokens cond =
            condition_interp(prepared.cond_source, prepared.cond_target, cond_map, alpha);
        HookSpec stage1_hook;
        stage1_hook.variant = config.stage1_hook;
        stage1_hook.alpha = alpha;
        HookSpec stage2_hook;
        stage2_hook.variant = config.stage2_hook;
        stage2_hook.alpha = alpha;
        try {
            GeneratedFrame g = generate_frame(
                prepared.geo_model, prepared.tex_model, cond, prepared.schedule, config.seed,
                stage1_hook, stage2_hook, needs_caches ? &geo_ext : nullptr,
                needs_caches ? &tex_ext : nullptr,
                config.stage1_hook == HookVariant::fused_structure ? &prepared.step_maps
                                                                   : nullptr,
                hook_layers);
            trajectory.frames[static_cast<size_t>(frame_index)] = {
                static_cast<double>(alpha), std::move(g.asset), g.stage2.degenerate_tokens};
        } catch (const IoError& e) {
            throw IoError("frame " + std::to_string(frame_index) + " (alpha " +
                          std::to_string(alpha) + "): " + e.what());
        } catch (const Error& e) {
            throw Error("frame " + std::to_string(frame_index) + " (alpha " +
                        std::to_string(alpha) + "): " + e.what());
        }
    };

    if (interior > 0) {
        const int workers = std::min(config.workers, interior);
        if (workers <= 1) {
            for (int i = 1; i <= interior; ++i) morph_one(i);
        } else {
            std::vector<std::exception_ptr> failures(static_cast<size_t>(interior));
            std::vector<std::thread> pool;
            pool.reserve(static_cast<size_t>(workers));
            for (int w = 0; w < workers; ++w) {
                pool.emplace_back([&, w]() {
                    for (int i = 1 + w; i <= interior; i += workers) {
                        try {
                            morph_one(i);
                        } catch (...) {
                            failures[static_cast<size_t>(i - 1)] = std::current_exception();
                        }
                    }
                });
            }
            for (auto& t : pool) t.join();
            for (const auto& f : failures) {
                if (f) std::rethrow_exception(f);
            }
        }
    }

    trajectory.timings.prepare_s = prepared.prepare_seconds;
    trajectory.timings.frames_s = seconds_since(start);
    trajectory.timings.total_s = prepared.prepare_seconds + trajectory.timings.frames_s;
    return trajectory;
}

MorphTrajectory run_morph(const MorphConfig& config) {
    return morph_with_hooks(prepare_run(config), config);
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

std::vector<AblationVariant> ablation_variants(const std::vector<std::string>& names) {
    const std::vector<AblationVariant> stack = {
        {"condition_interp", false, HookVariant::none, HookVariant::none},
        {"semantic_align", true, HookVariant::none, HookVariant::none},
        {"structure_interp", true, HookVariant::fused_structure, HookVariant::none},
        {"texture_fusion", true, HookVariant::fused_structure, HookVariant::texture_fusion},
    };
    if (names.size() == 1 && names[0] == "all") return stack;
    std::vector<AblationVariant> out;
    for (const auto& name : names) {
        const auto it = std::find_if(stack.begin(), stack.end(),
                                     [&](const AblationVariant& v) { return v.name == name; });
        if (it == stack.end()) {
            throw ConfigError("unknown ablation variant '" + name +
                              "' (valid: all|condition_interp|semantic_align|structure_interp|"
                              "texture_fusion)");
        }
        out.push_back(*it);
    }
    if (out.empty()) {
        throw ConfigError(
            "no ablation variants selected "
            "(valid: all|condition_interp|semantic_align|structure_interp|texture_fusion)");
    }
    return out;
}

std::vector<MetricRow> metric_rows(const TrajectoryMetrics& m, const std::string& variant) {
    return {
        {variant, "fid", m.fid},
        {variant, "kid", m.kid},
        {variant, "ppl", m.ppl},
        {variant, "adjacent_distance", m.adjacent_distance},
        {variant, "adjacent_cosine", m.adjacent_cosine},
    };
}

std::vector<MetricRow> run_ablation(const MorphConfig& config,
                                    const std::vector<AblationVariant>& variants) {
    if (variants.empty()) throw ConfigError("run_ablation: need at least one variant");
    MorphConfig base = config;
    // the widest variant drives cache capture; endpoints are hook-independent
    base.capture_kv_caches = true;
    base.stage1_hook = HookVariant::fused_structure;
    base.stage2_hook = HookVariant::texture_fusion;
    const PreparedRun prepared = prepare_run(base);
    const FeatureExtractor extractor = parse_extractor(config.extractor, config.seed);

    std::vector<MetricRow> rows;
    for (const AblationVariant& variant : variants) {
        MorphConfig vcfg = config;
        vcfg.semantic_align = variant.semantic_align;
        vcfg.stage1_hook = variant.stage1;
        vcfg.stage2_hook = variant.stage2;
        vcfg.capture_kv_caches = true;
        const MorphTrajectory traj = morph_with_hooks(prepared, vcfg);
        std::vector<ColoredVoxelAsset> assets;
        assets.reserve(traj.frames.size());
        for (const auto& f : traj.frames) assets.push_back(f.asset);
        const TrajectoryMetrics metrics =
            compute_trajectory_metrics(assets, config.views, extractor, config.image_size);
        for (auto& row : metric_rows(metrics, variant.name)) rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Run directory io
// ---------------------------------------------------------------------------

std::string frame_file_name(int index, double alpha) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "frame_%d_alpha_%.4f.ply", index, alpha);
    return buf;
}

void write_trajectory(const MorphTrajectory& trajectory, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "frames", ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir + ": " + ec.message());

    ordered_json manifest;
    manifest["run_id"] = trajectory.config.run_id;
    manifest["tool_version"] = kVersion;
    manifest["config"] = ordered_json::parse(config_to_json(trajectory.config));
    // output placement is given by the manifest's own location, not identity
    manifest["config"].erase("output_dir");
    manifest["alphas"] = trajectory.schedule.alphas;
    ordered_json frames = ordered_json::array();
    for (size_t i = 0; i < trajectory.frames.size(); ++i) {
        const MorphFrame& frame = trajectory.frames[i];
        const std::string name = frame_file_name(static_cast<int>(i), frame.alpha);
        write_ply((fs::path(out_dir) / "frames" / name).string(), frame.asset);
        ordered_json entry;
        entry["index"] = i;
        entry["alpha"] = frame.alpha;
        entry["file"] = "frames/" + name;
        entry["voxels"] = frame.asset.positions.size();
        entry["degenerate_tokens"] = frame.degenerate_tokens;
        frames.push_back(std::move(entry));
    }
    manifest["frames"] = std::move(frames);
    ordered_json timings;
    timings["prepare_s"] = trajectory.timings.prepare_s;
    timings["frames_s"] = trajectory.timings.frames_s;
    timings["total_s"] = trajectory.timings.total_s;
    manifest["timings"] = std::move(timings);

    std::ofstream out(fs::path(out_dir) / "manifest.json");
    if (!out) throw IoError("cannot write manifest under " + out_dir);
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("manifest write failed under " + out_dir);
}

LoadedTrajectory load_trajectory(const std::string& dir) {
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest: " + manifest_path.string());
    ordered_json manifest;
    try {
        in >> manifest;
    } catch (const std::exception& e) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    if (!manifest.is_object() || !manifest.contains("config") || !manifest.contains("frames")) {
        throw IoError("not a run manifest: " + manifest_path.string());
    }
    LoadedTrajectory loaded;
    loaded.config = parse_config_json(manifest["config"].dump(), manifest_path.string());
    for (const auto& entry : manifest["frames"]) {
        loaded.alphas.push_back(entry["alpha"].get<double>());
        const fs::path file = fs::path(dir) / entry["file"].get<std::string>();
        loaded.frames.push_back(read_ply(file.string(), loaded.config.grid_resolution));
    }
    if (loaded.frames.size() < 2) {
        throw InvalidInputError("trajectory at " + dir + " has fewer than 2 frames");
    }
    return loaded;
}

void write_metrics_csv(const std::string& path, const std::string& run_id,
                       const std::vector<MetricRow>& rows, bool with_variant_column, int views,
                       int frames, const std::string& extractor, uint64_t seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "run_id," << (with_variant_column ? "variant," : "")
        << "metric,value,views,frames,extractor,seed\n";
    char value[64];
    for (const MetricRow& row : rows) {
        std::snprintf(value, sizeof(value), "%.9g", row.value);
        out << run_id << ',';
        if (with_variant_column) out << row.variant << ',';
        out << row.metric << ',' << value << ',' << views << ',' << frames << ',' << extractor
            << ',' << seed << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace interp3d
