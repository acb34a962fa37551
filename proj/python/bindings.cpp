#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "interp3d/attention.hpp"
#include "interp3d/condition.hpp"
#include "interp3d/config.hpp"
#include "interp3d/correspond.hpp"
#include "interp3d/linalg.hpp"
#include "interp3d/metrics.hpp"
#include "interp3d/pipeline.hpp"
#include "interp3d/rng.hpp"
#include "interp3d/schedule.hpp"
#include "interp3d/version.hpp"

namespace py = pybind11;
using namespace interp3d;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

FeatureMatrix to_matrix(const FloatArray& arr) {
    if (arr.ndim() != 2) throw InvalidInputError("expected a 2-D float array");
    FeatureMatrix m(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    std::memcpy(m.data.data(), arr.data(), m.data.size() * sizeof(float));
    return m;
}

py::array_t<float> from_matrix(const FeatureMatrix& m) {
    py::array_t<float> arr({m.rows, m.cols});
    std::memcpy(arr.mutable_data(), m.data.data(), m.data.size() * sizeof(float));
    return arr;
}

CorrespondenceMap to_map(const py::array_t<int64_t>& mapping, const py::array_t<bool>& matched) {
    if (mapping.ndim() != 1 || matched.ndim() != 1 || mapping.shape(0) != matched.shape(0)) {
        throw InvalidInputError("mapping and matched must be equal-length 1-D arrays");
    }
    CorrespondenceMap map;
    map.mapping.assign(mapping.data(), mapping.data() + mapping.shape(0));
    map.matched.resize(static_cast<size_t>(matched.shape(0)));
    for (py::ssize_t i = 0; i < matched.shape(0); ++i) {
        map.matched[static_cast<size_t>(i)] = matched.at(i) ? 1 : 0;
    }
    map.validate();
    return map;
}

py::dict metrics_dict(const TrajectoryMetrics& m) {
    py::dict d;
    d["fid"] = m.fid;
    d["kid"] = m.kid;
    d["ppl"] = m.ppl;
    d["adjacent_distance"] = m.adjacent_distance;
    d["adjacent_cosine"] = m.adjacent_cosine;
    return d;
}

}  // namespace

PYBIND11_MODULE(_interp3d, m) {
    m.doc() = "Deterministic textured 3D morphing sandbox (C++ core)";
    m.attr("__version__") = kVersion;

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<IoError>(m, "IoError");
    py::register_exception<Error>(m, "Interp3DError");

    m.def(
        "cosine_similarity_matrix",
        [](const FloatArray& a, const FloatArray& b) {
            return from_matrix(cosine_similarity_matrix(to_matrix(a), to_matrix(b)));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "psd_sqrt",
        [](const FloatArray& s) { return from_matrix(psd_sqrt(to_matrix(s))); },
        py::arg("s"));

    m.def(
        "solve_assignment",
        [](const FloatArray& sim) {
            const CorrespondenceMap map = solve_assignment(to_matrix(sim));
            py::array_t<int64_t> mapping(static_cast<py::ssize_t>(map.size()));
            std::memcpy(mapping.mutable_data(), map.mapping.data(),
                        map.size() * sizeof(int64_t));
            return mapping;
        },
        py::arg("similarity"));

    m.def(
        "alpha_schedule",
        [](int frames, double beta) {
            const MorphSchedule s = alpha_schedule(frames, beta);
            py::array_t<double> arr(static_cast<py::ssize_t>(s.alphas.size()));
            std::memcpy(arr.mutable_data(), s.alphas.data(), s.alphas.size() * sizeof(double));
            return arr;
        },
        py::arg("frames"), py::arg("beta") = 5.0);

    m.def("patch_size_schedule", &patch_size_schedule, py::arg("t"), py::arg("total_steps"),
          py::arg("s_max"));
    m.def("beta_inverse_cdf", &beta_inverse_cdf, py::arg("beta"), py::arg("p"));

    m.def(
        "attention",
        [](const FloatArray& q, const FloatArray& k, const FloatArray& v) {
            return from_matrix(attention(to_matrix(q), to_matrix(k), to_matrix(v)));
        },
        py::arg("q"), py::arg("k"), py::arg("v"));

    m.def(
        "interp_attention",
        [](const FloatArray& q, const FloatArray& ks, const FloatArray& kt, const FloatArray& vs,
           const FloatArray& vt, float alpha) {
            return from_matrix(interp_attention(to_matrix(q), to_matrix(ks), to_matrix(kt),
                                                to_matrix(vs), to_matrix(vt), alpha));
        },
        py::arg("q"), py::arg("k_source"), py::arg("k_target"), py::arg("v_source"),
        py::arg("v_target"), py::arg("alpha"));

    m.def(
        "aid_inner",
        [](const FloatArray& q, const FloatArray& ks, const FloatArray& kt, const FloatArray& ki,
           const FloatArray& vs, const FloatArray& vt, const FloatArray& vi, float alpha) {
            return from_matrix(aid_inner(to_matrix(q), to_matrix(ks), to_matrix(kt),
                                         to_matrix(ki), to_matrix(vs), to_matrix(vt),
                                         to_matrix(vi), alpha));
        },
        py::arg("q"), py::arg("k_source"), py::arg("k_target"), py::arg("k_own"),
        py::arg("v_source"), py::arg("v_target"), py::arg("v_own"), py::arg("alpha"));

    m.def(
        "aid_outer",
        [](const FloatArray& q, const FloatArray& ks, const FloatArray& kt, const FloatArray& ki,
           const FloatArray& vs, const FloatArray& vt, const FloatArray& vi, float alpha) {
            return from_matrix(aid_outer(to_matrix(q), to_matrix(ks), to_matrix(kt),
                                         to_matrix(ki), to_matrix(vs), to_matrix(vt),
                                         to_matrix(vi), alpha));
        },
        py::arg("q"), py::arg("k_source"), py::arg("k_target"), py::arg("k_own"),
        py::arg("v_source"), py::arg("v_target"), py::arg("v_own"), py::arg("alpha"));

    m.def(
        "fused_structure_attention",
        [](const FloatArray& q, const FloatArray& ks, const FloatArray& vs, const FloatArray& kt,
           const FloatArray& vt, const FloatArray& ki, const FloatArray& vi, float alpha,
           const py::array_t<int64_t>& mapping, const py::array_t<bool>& matched,
           int grid_resolution, int patch_side) {
            PatchGrid layout;
            layout.grid_resolution = grid_resolution;
            layout.patch_side = patch_side;
            layout.patches_per_axis = (grid_resolution + patch_side - 1) / patch_side;
            return from_matrix(fused_structure_attention(
                to_matrix(q), to_matrix(ks), to_matrix(vs), to_matrix(kt), to_matrix(vt),
                to_matrix(ki), to_matrix(vi), alpha, to_map(mapping, matched), layout));
        },
        py::arg("q"), py::arg("k_source"), py::arg("v_source"), py::arg("k_target"),
        py::arg("v_target"), py::arg("k_own"), py::arg("v_own"), py::arg("alpha"),
        py::arg("mapping"), py::arg("matched"), py::arg("grid_resolution"),
        py::arg("patch_side"));

    m.def(
        "texture_match",
        [](const FloatArray& ki, const FloatArray& ks, const FloatArray& kt) {
            const TextureMatches matches =
                texture_match(to_matrix(ki), to_matrix(ks), to_matrix(kt));
            return py::make_tuple(py::cast(matches.source), py::cast(matches.target));
        },
        py::arg("k_own"), py::arg("k_source"), py::arg("k_target"));

    m.def(
        "texture_fuse",
        [](const FloatArray& ki, const FloatArray& vi, const FloatArray& ks,
           const FloatArray& vs, const FloatArray& kt, const FloatArray& vt, float alpha) {
            const FeatureMatrix k_own = to_matrix(ki);
            const TextureMatches matches = texture_match(k_own, to_matrix(ks), to_matrix(kt));
            const TextureFuseResult fused =
                texture_fuse(k_own, to_matrix(vi), matches, to_matrix(ks), to_matrix(vs),
                             to_matrix(kt), to_matrix(vt), alpha);
            return py::make_tuple(from_matrix(fused.k), from_matrix(fused.v),
                                  fused.degenerate_tokens);
        },
        py::arg("k_own"), py::arg("v_own"), py::arg("k_source"), py::arg("v_source"),
        py::arg("k_target"), py::arg("v_target"), py::arg("alpha"));

    m.def(
        "seeded_gaussian",
        [](uint64_t seed, const std::string& purpose, uint64_t frame, uint64_t step, int rows,
           int cols) {
            Rng rng(seed, purpose, frame, step);
            return from_matrix(seeded_gaussian(rng, rows, cols));
        },
        py::arg("seed"), py::arg("purpose"), py::arg("frame"), py::arg("step"), py::arg("rows"),
        py::arg("cols"));

    m.def(
        "encode_condition",
        [](uint64_t seed, const std::string& shape_class, std::array<float, 3> palette,
           int tokens, int channels) {
            ConditionInput input;
            input.seed = seed;
            input.shape_class = shape_class;
            input.palette = palette;
            return from_matrix(encode_condition(input, tokens, channels).tokens);
        },
        py::arg("seed"), py::arg("shape_class"), py::arg("palette"), py::arg("tokens"),
        py::arg("channels"));

    m.def(
        "fid",
        [](const FloatArray& a, const FloatArray& b) { return fid(to_matrix(a), to_matrix(b)); },
        py::arg("features_a"), py::arg("features_b"));

    m.def(
        "kid",
        [](const FloatArray& a, const FloatArray& b) { return kid(to_matrix(a), to_matrix(b)); },
        py::arg("features_a"), py::arg("features_b"));

    m.def(
        "ppl",
        [](const FloatArray& traj, const std::string& metric) {
            const DistanceMetric dist =
                metric == "cosine" ? DistanceMetric::cosine : DistanceMetric::euclidean;
            return ppl(to_matrix(traj), dist);
        },
        py::arg("trajectory_features"), py::arg("metric") = "euclidean");

    m.def(
        "adjacent_stats",
        [](const FloatArray& traj) {
            const AdjacentStats stats = adjacent_stats(to_matrix(traj));
            return py::make_tuple(stats.mean_distance, stats.mean_cosine);
        },
        py::arg("trajectory_features"));

    m.def(
        "morph",
        [](const std::string& config_path, const std::string& out_dir) {
            MorphConfig config = load_config(config_path);
            if (!out_dir.empty()) config.output_dir = out_dir;
            apply_env_overrides(config);
            config.validate();
            const MorphTrajectory trajectory = run_morph(config);
            write_trajectory(trajectory, config.output_dir);
            py::list frames;
            for (const auto& f : trajectory.frames) {
                py::dict entry;
                entry["alpha"] = f.alpha;
                entry["voxels"] = f.asset.positions.size();
                frames.append(entry);
            }
            py::dict summary;
            summary["run_id"] = config.run_id;
            summary["output_dir"] = config.output_dir;
            summary["frames"] = frames;
            return summary;
        },
        py::arg("config_path"), py::arg("out_dir") = std::string());

    m.def(
        "validate_config",
        [](const std::string& config_path) {
            MorphConfig config = load_config(config_path);
            config.validate();
            return config_to_json(config);
        },
        py::arg("config_path"));

    m.def(
        "evaluate_trajectory",
        [](const std::string& dir, int views, const std::string& extractor_name,
           std::optional<uint64_t> seed) {
            const LoadedTrajectory loaded = load_trajectory(dir);
            const FeatureExtractor extractor = parse_extractor(
                extractor_name.empty() ? loaded.config.extractor : extractor_name,
                seed ? *seed : loaded.config.seed);
            return metrics_dict(compute_trajectory_metrics(
                loaded.frames, views > 0 ? views : loaded.config.views, extractor,
                loaded.config.image_size));
        },
        py::arg("trajectory_dir"), py::arg("views") = 0, py::arg("extractor") = std::string(),
        py::arg("seed") = std::nullopt);
}
