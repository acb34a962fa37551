#include "interp3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "interp3d/attention.hpp"
#include "interp3d/linalg.hpp"
#include "interp3d/rng.hpp"

namespace interp3d {

std::vector<Camera> default_cameras(int count, int grid_resolution, float elevation_deg) {
    if (count < 1) throw InvalidInputError("default_cameras: need at least one view");
    if (grid_resolution < 1) throw InvalidInputError("default_cameras: resolution must be >= 1");
    std::vector<Camera> cams(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        cams[static_cast<size_t>(i)].azimuth_deg = 360.0f * static_cast<float>(i) / count;
        cams[static_cast<size_t>(i)].elevation_deg = elevation_deg;
        cams[static_cast<size_t>(i)].ortho_scale = 0.9f * static_cast<float>(grid_resolution);
    }
    return cams;
}

std::vector<RenderedView> render_views(const ColoredVoxelAsset& asset,
                                       const std::vector<Camera>& cameras, int width,
                                       int height) {
    asset.validate();
    if (asset.resolution < 1) throw InvalidInputError("render_views: asset has no grid extent");
    if (cameras.empty()) throw InvalidInputError("render_views: camera list is empty");
    if (width < 1 || height < 1) throw InvalidInputError("render_views: bad image size");
    for (const Camera& cam : cameras) {
        if (!(cam.ortho_scale > 0.0f)) {
            throw InvalidInputError("render_views: ortho scale must be positive");
        }
    }

    std::vector<RenderedView> out;
    out.reserve(cameras.size());
    const float center = 0.5f * static_cast<float>(asset.resolution - 1);
    constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

    for (const Camera& cam : cameras) {
        RenderedView view;
        view.width = width;
        view.height = height;
        view.camera = cam;
        view.rgb.assign(static_cast<size_t>(width) * height * 3, 1.0f);  // white background
        std::vector<float> zbuf(static_cast<size_t>(width) * height,
                                std::numeric_limits<float>::infinity());

        const double az = cam.azimuth_deg * kDegToRad;
        const double el = cam.elevation_deg * kDegToRad;
        const float vx = static_cast<float>(std::cos(el) * std::cos(az));
        const float vy = static_cast<float>(std::cos(el) * std::sin(az));
        const float vz = static_cast<float>(std::sin(el));
        const float rx = static_cast<float>(-std::sin(az));
        const float ry = static_cast<float>(std::cos(az));
        // up' = view x right
        const float ux = vy * 0.0f - vz * ry;
        const float uy = vz * rx - vx * 0.0f;
        const float uz = vx * ry - vy * rx;

        const float scale = cam.ortho_scale;
        const int splat = std::max(1, static_cast<int>(std::lround(width / (2.0f * scale))));

        for (size_t i = 0; i < asset.positions.size(); ++i) {
            const float px = static_cast<float>(asset.positions[i][0]) - center;
            const float py = static_cast<float>(asset.positions[i][1]) - center;
            const float pz = static_cast<float>(asset.positions[i][2]) - center;
            const float u = px * rx + py * ry;  // right has no z component
            const float w = px * ux + py * uy + pz * uz;
            const float depth = -(px * vx + py * vy + pz * vz);
            const int cx = static_cast<int>(std::floor((u / scale * 0.5f + 0.5f) * width));
            const int cy = static_cast<int>(std::floor((0.5f - w / scale * 0.5f) * height));
            const float op = asset.opacity[i];
            const float cr = op * asset.rgb[i][0] + (1.0f - op);
            const float cg = op * asset.rgb[i][1] + (1.0f - op);
            const float cb = op * asset.rgb[i][2] + (1.0f - op);
            for (int dy = 0; dy < splat; ++dy) {
                const int yy = cy - splat / 2 + dy;
                if (yy < 0 || yy >= height) continue;
                for (int dx = 0; dx < splat; ++dx) {
                    const int xx = cx - splat / 2 + dx;
                    if (xx < 0 || xx >= width) continue;
                    const size_t pix = static_cast<size_t>(yy) * width + xx;
                    if (depth < zbuf[pix]) {
                        zbuf[pix] = depth;
                        view.rgb[pix * 3 + 0] = cr;
                        view.rgb[pix * 3 + 1] = cg;
                        view.rgb[pix * 3 + 2] = cb;
                    }
                }
            }
        }
        out.push_back(std::move(view));
    }
    return out;
}

FeatureExtractor parse_extractor(const std::string& name, uint64_t seed) {
    FeatureExtractor e;
    e.seed = seed;
    if (name == "flatten") {
        e.kind = ExtractorKind::flatten;
        return e;
    }
    if (name == "proj" || name == "seeded_projection") {
        e.kind = ExtractorKind::seeded_projection;
        return e;
    }
    throw InvalidInputError("unknown extractor '" + name + "' (valid: flatten|proj)");
}

std::string extractor_name(const FeatureExtractor& e) {
    return e.kind == ExtractorKind::flatten ? "flatten" : "proj";
}

FeatureMatrix feature_extract(const std::vector<RenderedView>& views,
                              const FeatureExtractor& extractor) {
    if (views.empty()) throw InvalidInputError("feature_extract: no views");
    const int in_dim = views[0].width * views[0].height * 3;
    for (const auto& v : views) {
        if (v.width * v.height * 3 != in_dim) {
            throw InvalidInputError("feature_extract: views must share one size");
        }
    }

    if (extractor.kind == ExtractorKind::flatten) {
        FeatureMatrix out(static_cast<int>(views.size()), in_dim);
        for (size_t i = 0; i < views.size(); ++i) {
            std::copy(views[i].rgb.begin(), views[i].rgb.end(), out.row(static_cast<int>(i)));
        }
        return out;
    }

    if (extractor.depth < 0 || extractor.width < 1 || extractor.out_dim < 1) {
        throw InvalidInputError("feature_extract: bad projection config");
    }
    // Fixed seeded affine stack with leaky rectification between layers.
    struct Layer {
        FeatureMatrix w;
        std::vector<float> b;
    };
    std::vector<Layer> layers;
    int cur = in_dim;
    for (int l = 0; l <= extractor.depth; ++l) {
        const int next = (l == extractor.depth) ? extractor.out_dim : extractor.width;
        Rng rng(extractor.seed, "extractor", static_cast<uint64_t>(l));
        Layer layer;
        layer.w = seeded_gaussian(rng, cur, next);
        const float scale = 1.0f / std::sqrt(static_cast<float>(cur));
        for (auto& x : layer.w.data) x *= scale;
        layer.b.resize(static_cast<size_t>(next));
        for (auto& x : layer.b) x = 0.1f * rng.next_gaussian();
        layers.push_back(std::move(layer));
        cur = next;
    }

    FeatureMatrix features(static_cast<int>(views.size()), in_dim);
    for (size_t i = 0; i < views.size(); ++i) {
        std::copy(views[i].rgb.begin(), views[i].rgb.end(), features.row(static_cast<int>(i)));
    }
    for (size_t l = 0; l < layers.size(); ++l) {
        features = matmul(features, layers[l].w);
        for (int r = 0; r < features.rows; ++r) {
            float* row = features.row(r);
            for (int c = 0; c < features.cols; ++c) {
                row[c] += layers[l].b[static_cast<size_t>(c)];
                if (l + 1 < layers.size() && row[c] < 0.0f) row[c] *= 0.1f;
            }
        }
    }
    return features;
}

// ---------------------------------------------------------------------------
// Distribution metrics
// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxFidDim = 256;

std::vector<double> sample_mean(const FeatureMatrix& x) {
    std::vector<double> mu(static_cast<size_t>(x.cols), 0.0);
    std::vector<double> buf(static_cast<size_t>(x.rows));
    for (int c = 0; c < x.cols; ++c) {
        for (int r = 0; r < x.rows; ++r) buf[static_cast<size_t>(r)] = x.at(r, c);
        mu[static_cast<size_t>(c)] = pairwise_sum(buf) / x.rows;
    }
    return mu;
}

// Unbiased covariance, pairwise-summed per entry.
std::vector<double> sample_cov(const FeatureMatrix& x, const std::vector<double>& mu) {
    const int d = x.cols;
    std::vector<double> cov(static_cast<size_t>(d) * d, 0.0);
    std::vector<double> buf(static_cast<size_t>(x.rows));
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            for (int r = 0; r < x.rows; ++r) {
                buf[static_cast<size_t>(r)] = (x.at(r, i) - mu[static_cast<size_t>(i)]) *
                                              (x.at(r, j) - mu[static_cast<size_t>(j)]);
            }
            const double v = pairwise_sum(buf) / (x.rows - 1);
            cov[static_cast<size_t>(i) * d + j] = v;
            cov[static_cast<size_t>(j) * d + i] = v;
        }
    }
    return cov;
}

std::vector<double> dmatmul(const std::vector<double>& a, const std::vector<double>& b, int d) {
    std::vector<double> out(static_cast<size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) {
        for (int k = 0; k < d; ++k) {
            const double aik = a[static_cast<size_t>(i) * d + k];
            if (aik == 0.0) continue;
            for (int j = 0; j < d; ++j) {
                out[static_cast<size_t>(i) * d + j] += aik * b[static_cast<size_t>(k) * d + j];
            }
        }
    }
    return out;
}

double poly_kernel(const float* x, const float* y, int d) {
    double dot = 0.0;
    for (int c = 0; c < d; ++c) dot += static_cast<double>(x[c]) * y[c];
    const double base = dot / d + 1.0;
    return base * base * base;
}

double euclidean(const float* a, const float* b, int d) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
        const double diff = static_cast<double>(a[c]) - b[c];
        s += diff * diff;
    }
    return std::sqrt(s);
}

double cosine(const float* a, const float* b, int d) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int c = 0; c < d; ++c) {
        dot += static_cast<double>(a[c]) * b[c];
        na += static_cast<double>(a[c]) * a[c];
        nb += static_cast<double>(b[c]) * b[c];
    }
    if (na < 1e-24 || nb < 1e-24) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double fid(const FeatureMatrix& features_a, const FeatureMatrix& features_b) {
    if (features_a.cols != features_b.cols) throw InvalidInputError("fid: feature dims differ");
    if (features_a.rows < 2 || features_b.rows < 2) {
        throw InvalidInputError("fid: need at least 2 samples per side");
    }
    if (features_a.cols > kMaxFidDim) {
        throw InvalidInputError("fid: feature dim above " + std::to_string(kMaxFidDim) +
                                "; use a projecting extractor");
    }
    const int d = features_a.cols;
    const auto mu_a = sample_mean(features_a);
    const auto mu_b = sample_mean(features_b);
    const auto cov_a = sample_cov(features_a, mu_a);
    const auto cov_b = sample_cov(features_b, mu_b);

    std::vector<double> mean_terms(static_cast<size_t>(d));
    for (int c = 0; c < d; ++c) {
        const double diff = mu_a[static_cast<size_t>(c)] - mu_b[static_cast<size_t>(c)];
        mean_terms[static_cast<size_t>(c)] = diff * diff;
    }
    double result = pairwise_sum(mean_terms);

    const auto root_a = psd_sqrt(cov_a, d);
    auto inner = dmatmul(dmatmul(root_a, cov_b, d), root_a, d);
    // symmetrize the product before the second root
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            const double m = 0.5 * (inner[static_cast<size_t>(i) * d + j] +
                                    inner[static_cast<size_t>(j) * d + i]);
            inner[static_cast<size_t>(i) * d + j] = m;
            inner[static_cast<size_t>(j) * d + i] = m;
        }
    }
    const auto cross = psd_sqrt(inner, d);
    for (int i = 0; i < d; ++i) {
        result += cov_a[static_cast<size_t>(i) * d + i] + cov_b[static_cast<size_t>(i) * d + i] -
                  2.0 * cross[static_cast<size_t>(i) * d + i];
    }
    if (result < -1e-6) {
        throw InvalidInputError("fid: distance unexpectedly negative: " + std::to_string(result));
    }
    return result < 0.0 ? 0.0 : result;
}

double kid(const FeatureMatrix& features_a, const FeatureMatrix& features_b) {
    if (features_a.cols != features_b.cols) throw InvalidInputError("kid: feature dims differ");
    const int m = features_a.rows;
    const int n = features_b.rows;
    if (m < 2 || n < 2) throw InvalidInputError("kid: need at least 2 samples per side");
    const int d = features_a.cols;

    std::vector<double> terms;
    terms.reserve(static_cast<size_t>(m) * (m - 1));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            terms.push_back(poly_kernel(features_a.row(i), features_a.row(j), d));
        }
    }
    const double term_aa = pairwise_sum(terms) / (static_cast<double>(m) * (m - 1));

    terms.clear();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            terms.push_back(poly_kernel(features_b.row(i), features_b.row(j), d));
        }
    }
    const double term_bb = pairwise_sum(terms) / (static_cast<double>(n) * (n - 1));

    terms.clear();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            terms.push_back(poly_kernel(features_a.row(i), features_b.row(j), d));
        }
    }
    const double term_ab = 2.0 * pairwise_sum(terms) / (static_cast<double>(m) * n);

    return term_aa + term_bb - term_ab;
}

double ppl(const FeatureMatrix& trajectory_features, DistanceMetric dist) {
    const int frames = trajectory_features.rows;
    if (frames < 2) throw InvalidInputError("ppl: need at least 2 frames");
    const int d = trajectory_features.cols;
    auto distance = [&](int i, int j) {
        const float* a = trajectory_features.row(i);
        const float* b = trajectory_features.row(j);
        return dist == DistanceMetric::euclidean ? euclidean(a, b, d) : 1.0 - cosine(a, b, d);
    };
    const double endpoint = distance(0, frames - 1);
    if (endpoint <= 1e-12) {
        throw InvalidInputError("ppl: degenerate endpoints (source and target coincide)");
    }
    std::vector<double> steps(static_cast<size_t>(frames - 1));
    for (int i = 0; i + 1 < frames; ++i) steps[static_cast<size_t>(i)] = distance(i, i + 1);
    return pairwise_sum(steps) / endpoint;
}

AdjacentStats adjacent_stats(const FeatureMatrix& trajectory_features) {
    const int frames = trajectory_features.rows;
    if (frames < 2) throw InvalidInputError("adjacent_stats: need at least 2 frames");
    const int d = trajectory_features.cols;
    std::vector<double> dists(static_cast<size_t>(frames - 1));
    std::vector<double> cosines(static_cast<size_t>(frames - 1));
    for (int i = 0; i + 1 < frames; ++i) {
        dists[static_cast<size_t>(i)] =
            euclidean(trajectory_features.row(i), trajectory_features.row(i + 1), d);
        cosines[static_cast<size_t>(i)] =
            cosine(trajectory_features.row(i), trajectory_features.row(i + 1), d);
    }
    AdjacentStats stats;
    stats.mean_distance = pairwise_sum(dists) / (frames - 1);
    stats.mean_cosine = pairwise_sum(cosines) / (frames - 1);
    return stats;
}

TrajectoryMetrics compute_trajectory_metrics(const std::vector<ColoredVoxelAsset>& frames,
                                             int views, const FeatureExtractor& extractor,
                                             int image_size) {
    if (frames.size() < 2) {
        throw InvalidInputError("compute_trajectory_metrics: need at least 2 frames");
    }
    const int frame_count = static_cast<int>(frames.size());
    const auto cameras = default_cameras(views, frames[0].resolution);

    // features[frame] has one row per view
    std::vector<FeatureMatrix> features(frames.size());
    for (size_t f = 0; f < frames.size(); ++f) {
        features[f] = feature_extract(render_views(frames[f], cameras, image_size, image_size),
                                      extractor);
    }
    const int d = features[0].cols;

    // endpoint pool vs deterministic middle frames
    const int mid_a = frame_count / 3;
    const int mid_b = (2 * frame_count) / 3 < frame_count ? (2 * frame_count) / 3
                                                          : frame_count - 1;
    FeatureMatrix reference = concat_rows(features.front(), features.back());
    FeatureMatrix generated = concat_rows(features[static_cast<size_t>(mid_a)],
                                          features[static_cast<size_t>(mid_b)]);

    TrajectoryMetrics out;
    out.fid = fid(generated, reference);
    out.kid = kid(generated, reference);

    std::vector<double> ppls(static_cast<size_t>(views));
    std::vector<double> adist(static_cast<size_t>(views));
    std::vector<double> acos(static_cast<size_t>(views));
    FeatureMatrix per_view(frame_count, d);
    for (int v = 0; v < views; ++v) {
        for (int f = 0; f < frame_count; ++f) {
            std::copy_n(features[static_cast<size_t>(f)].row(v), d, per_view.row(f));
        }
        ppls[static_cast<size_t>(v)] = ppl(per_view);
        const AdjacentStats stats = adjacent_stats(per_view);
        adist[static_cast<size_t>(v)] = stats.mean_distance;
        acos[static_cast<size_t>(v)] = stats.mean_cosine;
    }
    out.ppl = pairwise_sum(ppls) / views;
    out.adjacent_distance = pairwise_sum(adist) / views;
    out.adjacent_cosine = pairwise_sum(acos) / views;
    return out;
}

}  // namespace interp3d
