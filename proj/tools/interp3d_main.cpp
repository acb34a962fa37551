#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "interp3d/config.hpp"
#include "interp3d/io_png.hpp"
#include "interp3d/pipeline.hpp"
#include "interp3d/rng.hpp"
#include "interp3d/version.hpp"

namespace {

using namespace interp3d;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitIo = 4;

std::string one_line(std::string msg) {
    std::replace(msg.begin(), msg.end(), '\n', ';');
    return msg;
}

int report(const char* category, const std::string& msg, int code) {
    std::cerr << "error: " << category << ": " << one_line(msg) << "\n";
    return code;
}

// --method presets: a single name configures both stage hooks.
void apply_method(MorphConfig& config, const std::string& method) {
    if (method == "none") {
        config.stage1_hook = HookVariant::none;
        config.stage2_hook = HookVariant::none;
    } else if (method == "interp_kv" || method == "aid_inner" || method == "aid_outer") {
        config.stage1_hook = parse_hook_variant(method);
        config.stage2_hook = config.stage1_hook;
    } else if (method == "fused_structure") {
        config.stage1_hook = HookVariant::fused_structure;
        config.stage2_hook = HookVariant::none;
    } else if (method == "texture_fusion") {
        config.stage1_hook = HookVariant::fused_structure;
        config.stage2_hook = HookVariant::texture_fusion;
    } else {
        throw ConfigError(
            "unknown method '" + method +
            "' (valid: none|interp_kv|aid_inner|aid_outer|fused_structure|texture_fusion)");
    }
}

int cmd_gen_assets(uint64_t seed, const std::string& shape_class,
                   const std::vector<float>& palette, const std::string& out_path,
                   const std::string& preview_path, int grid, int steps) {
    ConditionInput input;
    input.seed = seed;
    input.shape_class = shape_class;
    if (palette.empty()) {
        Rng rng(seed, "palette");
        for (auto& p : input.palette) p = static_cast<float>(rng.next_uniform());
    } else if (palette.size() == 3) {
        std::copy(palette.begin(), palette.end(), input.palette.begin());
    } else {
        throw ConfigError("--palette needs exactly 3 values in [0,1]");
    }

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + out_path);
    out << descriptor_to_json(input) << "\n";
    if (!out) throw IoError("write failed: " + out_path);
    std::cout << "wrote descriptor " << out_path << "\n";

    if (!preview_path.empty()) {
        MorphConfig config;
        config.seed = seed;
        config.source = input;
        config.target = input;
        config.grid_resolution = grid;
        config.steps = steps;
        config.frames = 2;
        config.stage1_hook = HookVariant::none;
        config.stage2_hook = HookVariant::none;
        config.validate();
        const PreparedRun run = prepare_run(config);
        const auto cameras = default_cameras(4, grid);
        write_view_grid_png(preview_path, render_views(run.source_asset, cameras), 2);
        std::cout << "wrote preview " << preview_path << "\n";
    }
    return kExitOk;
}

int cmd_morph(const std::string& config_path, const std::string& out_dir,
              std::optional<int> frames, const std::string& method,
              std::optional<int> workers, std::optional<uint64_t> seed, bool skip_metrics) {
    MorphConfig config = load_config(config_path);
    if (frames) config.frames = *frames;
    if (workers) config.workers = *workers;
    if (seed) config.seed = *seed;
    if (!method.empty()) apply_method(config, method);
    if (!out_dir.empty()) config.output_dir = out_dir;
    apply_env_overrides(config);
    config.validate();

    const MorphTrajectory trajectory = run_morph(config);
    write_trajectory(trajectory, config.output_dir);
    std::cout << "wrote " << trajectory.frames.size() << " frames under " << config.output_dir
              << "\n";

    if (!skip_metrics) {
        std::vector<ColoredVoxelAsset> assets;
        assets.reserve(trajectory.frames.size());
        for (const auto& f : trajectory.frames) assets.push_back(f.asset);
        const FeatureExtractor extractor = parse_extractor(config.extractor, config.seed);
        const TrajectoryMetrics metrics =
            compute_trajectory_metrics(assets, config.views, extractor, config.image_size);
        const auto rows = metric_rows(metrics, "");
        write_metrics_csv((fs::path(config.output_dir) / "metrics.csv").string(), config.run_id,
                          rows, false, config.views, config.frames, config.extractor,
                          config.seed);
        std::cout << "wrote metrics under " << config.output_dir << "\n";
    }
    return kExitOk;
}

int cmd_metrics(const std::string& trajectory_dir, int views, const std::string& extractor_name,
                std::optional<uint64_t> seed, const std::string& out_path) {
    const LoadedTrajectory loaded = load_trajectory(trajectory_dir);
    const int effective_views = views > 0 ? views : loaded.config.views;
    const std::string effective_extractor =
        extractor_name.empty() ? loaded.config.extractor : extractor_name;
    const uint64_t effective_seed = seed ? *seed : loaded.config.seed;

    const FeatureExtractor extractor = parse_extractor(effective_extractor, effective_seed);
    const TrajectoryMetrics metrics = compute_trajectory_metrics(
        loaded.frames, effective_views, extractor, loaded.config.image_size);
    write_metrics_csv(out_path, loaded.config.run_id, metric_rows(metrics, ""), false,
                      effective_views, static_cast<int>(loaded.frames.size()),
                      effective_extractor, effective_seed);
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& variant_names,
               const std::string& out_path) {
    MorphConfig config = load_config(config_path);
    apply_env_overrides(config);
    const auto variants = ablation_variants(variant_names);
    const auto rows = run_ablation(config, variants);
    write_metrics_csv(out_path, config.run_id, rows, true, config.views, config.frames,
                      config.extractor, config.seed);
    std::cout << "wrote " << out_path << " (" << rows.size() << " rows)\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"interp3d: deterministic textured 3D morphing sandbox"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    // gen-assets
    auto* gen = app.add_subcommand("gen-assets", "Write a prompt descriptor (and preview)");
    uint64_t gen_seed = 0;
    std::string gen_class = "blob";
    std::vector<float> gen_palette;
    std::string gen_out = "asset.json";
    std::string gen_preview;
    int gen_grid = 16;
    int gen_steps = 8;
    gen->add_option("--seed", gen_seed, "Descriptor seed")->capture_default_str();
    gen->add_option("--class", gen_class, "Shape class label")->capture_default_str();
    gen->add_option("--palette", gen_palette, "Base color r g b in [0,1] (default: from seed)")
        ->expected(3);
    gen->add_option("--out", gen_out, "Descriptor output path")->capture_default_str();
    gen->add_option("--preview", gen_preview, "Also render a preview PNG to this path");
    gen->add_option("--grid", gen_grid, "Preview grid resolution")->capture_default_str();
    gen->add_option("--steps", gen_steps, "Preview denoise steps")->capture_default_str();

    // morph
    auto* morph = app.add_subcommand("morph", "Run a morphing trajectory");
    std::string morph_config;
    std::string morph_out;
    std::optional<int> morph_frames;
    std::string morph_method;
    std::optional<int> morph_workers;
    std::optional<uint64_t> morph_seed;
    bool morph_skip_metrics = false;
    morph->add_option("--config", morph_config, "Config JSON (or a manifest.json)")->required();
    morph->add_option("--out", morph_out, "Output directory (overrides config output_dir)");
    morph->add_option("--frames", morph_frames, "Frame count L (overrides config)");
    morph->add_option("--method", morph_method,
                      "Hook preset: none|interp_kv|aid_inner|aid_outer|fused_structure|"
                      "texture_fusion (texture_fusion = full stack)");
    morph->add_option("--workers", morph_workers, "Worker threads for interior frames");
    morph->add_option("--seed", morph_seed, "Seed (overrides config)");
    morph->add_flag("--skip-metrics", morph_skip_metrics, "Do not compute metrics.csv");

    // metrics
    auto* met = app.add_subcommand("metrics", "Evaluate a written trajectory");
    std::string met_dir;
    int met_views = 0;
    std::string met_extractor;
    std::optional<uint64_t> met_seed;
    std::string met_out = "metrics.csv";
    met->add_option("--trajectory", met_dir, "Trajectory directory (with manifest.json)")
        ->required();
    met->add_option("--views", met_views, "Render views per frame (default: from manifest)");
    met->add_option("--extractor", met_extractor,
                    "Feature extractor: flatten|proj (default: from manifest)");
    met->add_option("--seed", met_seed, "Extractor seed (default: from manifest)");
    met->add_option("--out", met_out, "CSV output path")->capture_default_str();

    // ablate
    auto* abl = app.add_subcommand("ablate", "Compare hook variants on one config");
    std::string abl_config;
    std::vector<std::string> abl_variants = {"all"};
    std::string abl_out = "ablation.csv";
    abl->add_option("--config", abl_config, "Config JSON")->required();
    abl->add_option("--variants", abl_variants,
                    "Variants: all or any of condition_interp semantic_align structure_interp "
                    "texture_fusion")
        ->delimiter(',')
        ->capture_default_str();
    abl->add_option("--out", abl_out, "CSV output path")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            return cmd_gen_assets(gen_seed, gen_class, gen_palette, gen_out, gen_preview,
                                  gen_grid, gen_steps);
        }
        if (morph->parsed()) {
            return cmd_morph(morph_config, morph_out, morph_frames, morph_method, morph_workers,
                             morph_seed, morph_skip_metrics);
        }
        if (met->parsed()) {
            return cmd_metrics(met_dir, met_views, met_extractor, met_seed, met_out);
        }
        if (abl->parsed()) {
            return cmd_ablate(abl_config, abl_variants, abl_out);
        }
    } catch (const ConfigError& e) {
        return report("config", e.what(), kExitConfig);
    } catch (const IoError& e) {
        return report("io", e.what(), kExitIo);
    } catch (const Error& e) {
        return report("runtime", e.what(), kExitRuntime);
    } catch (const std::exception& e) {
        return report("runtime", e.what(), kExitRuntime);
    }
    return kExitOk;
}
