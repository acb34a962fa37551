#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "interp3d/tensor.hpp"
#include "interp3d/toyprior.hpp"

namespace interp3d {

struct Camera {
    float azimuth_deg = 0.0f;
    float elevation_deg = 20.0f;
    float ortho_scale = 1.0f;  // world half-extent covered by the image
};

struct RenderedView {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;  // width*height*3, row-major, in [0,1]
    Camera camera;
};

/// Evenly spaced azimuths at fixed elevation; scale sized to the asset grid.
std::vector<Camera> default_cameras(int count, int grid_resolution,
                                    float elevation_deg = 20.0f);

/// Orthographic splat renderer with z-buffer; opacity blends each voxel over
/// a white background. Deterministic for identical asset and cameras.
std::vector<RenderedView> render_views(const ColoredVoxelAsset& asset,
                                       const std::vector<Camera>& cameras, int width = 64,
                                       int height = 64);

enum class ExtractorKind { flatten, seeded_projection };

struct FeatureExtractor {
    ExtractorKind kind = ExtractorKind::seeded_projection;
    int depth = 2;       // hidden layers (seeded_projection)
    int width = 64;      // hidden width
    int out_dim = 16;    // d
    uint64_t seed = 0;
};

FeatureExtractor parse_extractor(const std::string& name, uint64_t seed);
std::string extractor_name(const FeatureExtractor& e);

/// One d-vector per view. flatten returns raw pixels; seeded_projection runs
/// fixed seeded affine layers with max(x, 0.1x) between them.
FeatureMatrix feature_extract(const std::vector<RenderedView>& views,
                              const FeatureExtractor& extractor);

/// Frechet distance between Gaussian fits of the two sample sets (rows are
/// samples). Requires >= 2 samples per side and feature dim <= 256.
double fid(const FeatureMatrix& features_a, const FeatureMatrix& features_b);

/// Unbiased MMD^2 with polynomial kernel (x.y/d + 1)^3.
double kid(const FeatureMatrix& features_a, const FeatureMatrix& features_b);

enum class DistanceMetric { euclidean, cosine };

/// Cumulative adjacent distance normalized by the endpoint distance.
double ppl(const FeatureMatrix& trajectory_features,
           DistanceMetric dist = DistanceMetric::euclidean);

struct AdjacentStats {
    double mean_distance = 0.0;
    double mean_cosine = 0.0;
};

AdjacentStats adjacent_stats(const FeatureMatrix& trajectory_features);

/// The full per-trajectory suite: renders each frame from `views` cameras and
/// reports fid/kid (middle frames vs pooled endpoints) plus per-view-averaged
/// ppl and adjacency stats.
struct TrajectoryMetrics {
    double fid = 0.0;
    double kid = 0.0;
    double ppl = 0.0;
    double adjacent_distance = 0.0;
    double adjacent_cosine = 0.0;
};

TrajectoryMetrics compute_trajectory_metrics(const std::vector<ColoredVoxelAsset>& frames,
                                             int views, const FeatureExtractor& extractor,
                                             int image_size = 64);

}  // namespace interp3d
