#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "interp3d/metrics.hpp"
#include "interp3d/rng.hpp"

using namespace interp3d;

namespace {

FeatureMatrix random_matrix(uint64_t seed, int rows, int cols) {
    Rng rng(seed, "metrics");
    return seeded_gaussian(rng, rows, cols);
}

ColoredVoxelAsset single_voxel_asset(int n, VoxelPos pos, std::array<float, 3> rgb,
                                     float opacity) {
    ColoredVoxelAsset asset;
    asset.resolution = n;
    asset.positions = {pos};
    asset.rgb = {rgb};
    asset.opacity = {opacity};
    return asset;
}

// Sample sets with exactly diagonal sample covariance: for each dim j the
// points mu +- c_j e_j; mean is mu, cov is diag(2 c_j^2 / (n-1)).
FeatureMatrix diagonal_design(const std::vector<double>& mu, const std::vector<double>& c) {
    const int d = static_cast<int>(mu.size());
    FeatureMatrix x(2 * d, d);
    for (int j = 0; j < d; ++j) {
        for (int k = 0; k < d; ++k) {
            x.at(2 * j, k) = static_cast<float>(mu[static_cast<size_t>(k)]);
            x.at(2 * j + 1, k) = static_cast<float>(mu[static_cast<size_t>(k)]);
        }
        x.at(2 * j, j) += static_cast<float>(c[static_cast<size_t>(j)]);
        x.at(2 * j + 1, j) -= static_cast<float>(c[static_cast<size_t>(j)]);
    }
    return x;
}

double poly3(const float* a, const float* b, int d) {
    double dot = 0.0;
    for (int c = 0; c < d; ++c) dot += static_cast<double>(a[c]) * b[c];
    const double base = dot / d + 1.0;
    return base * base * base;
}

}  // namespace

TEST_CASE("an empty asset renders pure white") {
    ColoredVoxelAsset asset;
    asset.resolution = 8;
    const auto views = render_views(asset, default_cameras(2, 8), 32, 32);
    for (const auto& view : views) {
        for (float v : view.rgb) CHECK(v == 1.0f);
    }
}

TEST_CASE("a single opaque voxel lands in the image center") {
    const ColoredVoxelAsset asset =
        single_voxel_asset(9, {4, 4, 4}, {1.0f, 0.0f, 0.0f}, 1.0f);
    Camera front;
    front.azimuth_deg = 0.0f;
    front.elevation_deg = 0.0f;
    front.ortho_scale = 9.0f;
    const auto views = render_views(asset, {front}, 64, 64);
    const auto& img = views[0].rgb;
    auto pixel = [&](int x, int y) {
        const size_t p = (static_cast<size_t>(y) * 64 + x) * 3;
        return std::array<float, 3>{img[p], img[p + 1], img[p + 2]};
    };
    const auto center = pixel(32, 32);
    CHECK(center[0] == 1.0f);
    CHECK(center[1] == 0.0f);
    CHECK(center[2] == 0.0f);
    const auto corner = pixel(1, 1);
    CHECK(corner[0] == 1.0f);
    CHECK(corner[1] == 1.0f);
    CHECK(corner[2] == 1.0f);
}

TEST_CASE("the z-buffer keeps the voxel nearer to the camera") {
    ColoredVoxelAsset asset;
    asset.resolution = 9;
    asset.positions = {{2, 4, 4}, {6, 4, 4}};  // same ray for the front camera
    asset.rgb = {{0.0f, 1.0f, 0.0f}, {0.0f, 0.0f, 1.0f}};
    asset.opacity = {1.0f, 1.0f};
    Camera front;
    front.azimuth_deg = 0.0f;
    front.elevation_deg = 0.0f;
    front.ortho_scale = 9.0f;
    const auto views = render_views(asset, {front}, 64, 64);
    // camera sits toward +x; the x=6 voxel (blue) is nearer
    const size_t p = (static_cast<size_t>(32) * 64 + 32) * 3;
    CHECK(views[0].rgb[p + 2] == 1.0f);
    CHECK(views[0].rgb[p + 1] == 0.0f);
}

TEST_CASE("rendering is bitwise deterministic") {
    ColoredVoxelAsset asset;
    asset.resolution = 8;
    Rng rng(5, "asset");
    for (int x = 0; x < 8; x += 2)
        for (int y = 0; y < 8; y += 3)
            for (int z = 0; z < 8; z += 2) asset.positions.push_back({x, y, z});
    for (size_t i = 0; i < asset.positions.size(); ++i) {
        asset.rgb.push_back({static_cast<float>(rng.next_uniform()),
                             static_cast<float>(rng.next_uniform()),
                             static_cast<float>(rng.next_uniform())});
        asset.opacity.push_back(static_cast<float>(rng.next_uniform()));
    }
    const auto a = render_views(asset, default_cameras(4, 8), 48, 48);
    const auto b = render_views(asset, default_cameras(4, 8), 48, 48);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].rgb == b[i].rgb);
}

TEST_CASE("rendering rejects an empty camera list") {
    ColoredVoxelAsset asset;
    asset.resolution = 4;
    CHECK_THROWS_AS(render_views(asset, {}, 8, 8), InvalidInputError);
}

TEST_CASE("flatten extraction returns pixels in order") {
    RenderedView view;
    view.width = 2;
    view.height = 2;
    view.rgb = {0.0f, 0.1f, 0.2f, 0.3f, 0.4f, 0.5f,
                0.6f, 0.7f, 0.8f, 0.9f, 1.0f, 0.95f};
    FeatureExtractor flatten;
    flatten.kind = ExtractorKind::flatten;
    const FeatureMatrix f = feature_extract({view}, flatten);
    CHECK(f.rows == 1);
    CHECK(f.cols == 12);
    for (int c = 0; c < 12; ++c) CHECK(f.at(0, c) == view.rgb[static_cast<size_t>(c)]);
}

TEST_CASE("projection extraction is deterministic with the configured width") {
    RenderedView view;
    view.width = 8;
    view.height = 8;
    view.rgb.assign(8 * 8 * 3, 0.25f);
    for (int out_dim : {4, 8, 12, 16, 24}) {
        FeatureExtractor e;
        e.kind = ExtractorKind::seeded_projection;
        e.depth = 2;
        e.width = 32;
        e.out_dim = out_dim;
        e.seed = 11;
        const FeatureMatrix a = feature_extract({view}, e);
        const FeatureMatrix b = feature_extract({view}, e);
        CHECK(a.cols == out_dim);
        CHECK(a.data == b.data);
    }
}

TEST_CASE("fid vanishes for identical sample sets") {
    const FeatureMatrix a = random_matrix(21, 12, 6);
    CHECK(fid(a, a) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("fid reduces to the squared mean gap in one dimension") {
    FeatureMatrix a(2, 1);
    a.at(0, 0) = 0.0f;
    a.at(1, 0) = 2.0f;
    FeatureMatrix b = a;
    const float shift = 1.75f;
    for (auto& v : b.data) v += shift;
    CHECK(fid(a, b) == doctest::Approx(static_cast<double>(shift) * shift).epsilon(1e-6));
}

TEST_CASE("fid matches the diagonal-covariance closed form") {
    const std::vector<double> mu_a = {0.0, 1.0, -0.5};
    const std::vector<double> c_a = {0.8, 1.2, 0.5};
    const std::vector<double> mu_b = {0.4, 0.2, 0.3};
    const std::vector<double> c_b = {1.1, 0.6, 0.9};
    const FeatureMatrix a = diagonal_design(mu_a, c_a);
    const FeatureMatrix b = diagonal_design(mu_b, c_b);
    const double n_minus_1 = 5.0;  // 2d = 6 samples
    double expected = 0.0;
    for (int j = 0; j < 3; ++j) {
        const double mean_diff = mu_a[static_cast<size_t>(j)] - mu_b[static_cast<size_t>(j)];
        const double sigma_a = c_a[static_cast<size_t>(j)] * std::sqrt(2.0 / n_minus_1);
        const double sigma_b = c_b[static_cast<size_t>(j)] * std::sqrt(2.0 / n_minus_1);
        expected += mean_diff * mean_diff + (sigma_a - sigma_b) * (sigma_a - sigma_b);
    }
    CHECK(fid(a, b) == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("fid is symmetric") {
    const FeatureMatrix a = random_matrix(22, 10, 5);
    const FeatureMatrix b = random_matrix(23, 14, 5);
    CHECK(fid(a, b) == doctest::Approx(fid(b, a)).epsilon(1e-6));
}

TEST_CASE("fid validates sample counts and dimension") {
    const FeatureMatrix one = random_matrix(24, 1, 4);
    const FeatureMatrix two = random_matrix(25, 2, 4);
    CHECK_THROWS_AS(fid(one, two), InvalidInputError);
    const FeatureMatrix wide = random_matrix(26, 4, 300);
    CHECK_THROWS_AS(fid(wide, wide), InvalidInputError);
}

TEST_CASE("kid at n=2 matches the hand-expanded estimator") {
    const FeatureMatrix a = random_matrix(27, 2, 5);
    const FeatureMatrix b = random_matrix(28, 2, 5);
    const double expected = poly3(a.row(0), a.row(1), 5) + poly3(b.row(0), b.row(1), 5) -
                            0.5 * (poly3(a.row(0), b.row(0), 5) + poly3(a.row(0), b.row(1), 5) +
                                   poly3(a.row(1), b.row(0), 5) + poly3(a.row(1), b.row(1), 5));
    CHECK(kid(a, b) == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("kid on identical sets stays at or below zero in expectation") {
    double total = 0.0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const FeatureMatrix a = random_matrix(40 + seed, 16, 6);
        total += kid(a, a);
    }
    CHECK(total / 20.0 <= 1e-6);
}

TEST_CASE("kid is unbiased near zero for same-distribution samples") {
    std::vector<double> estimates;
    for (uint64_t seed = 0; seed < 40; ++seed) {
        const FeatureMatrix a = random_matrix(1000 + 2 * seed, 24, 4);
        const FeatureMatrix b = random_matrix(1001 + 2 * seed, 24, 4);
        estimates.push_back(kid(a, b));
    }
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= static_cast<double>(estimates.size());
    double var = 0.0;
    for (double e : estimates) var += (e - mean) * (e - mean);
    var /= static_cast<double>(estimates.size() - 1);
    const double stderr_mean = std::sqrt(var / static_cast<double>(estimates.size()));
    CHECK(std::abs(mean) <= 3.0 * stderr_mean + 1e-12);
}

TEST_CASE("kid grows with cluster separation") {
    double prev = 0.0;
    for (double separation : {1.0, 2.0, 4.0}) {
        FeatureMatrix a = random_matrix(60, 12, 4);
        FeatureMatrix b = random_matrix(61, 12, 4);
        for (auto& v : b.data) v += static_cast<float>(separation);
        const double estimate = kid(a, b);
        CHECK(estimate > 0.0);
        CHECK(estimate > prev);
        prev = estimate;
    }
}

TEST_CASE("two frames give unit ppl") {
    const FeatureMatrix traj = random_matrix(62, 2, 6);
    CHECK(ppl(traj) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("collinear equally spaced features give unit ppl") {
    FeatureMatrix traj(5, 3);
    for (int i = 0; i < 5; ++i) {
        traj.at(i, 0) = static_cast<float>(i) * 0.5f;
        traj.at(i, 1) = static_cast<float>(i) * -0.25f;
        traj.at(i, 2) = static_cast<float>(i) * 1.5f;
    }
    CHECK(ppl(traj) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("ppl never drops below one") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const FeatureMatrix traj = random_matrix(100 + seed, 6, 8);
        CHECK(ppl(traj) >= 1.0 - 1e-6);
    }
}

TEST_CASE("ppl is invariant under uniform scaling") {
    const FeatureMatrix traj = random_matrix(63, 7, 5);
    FeatureMatrix pow2 = traj;
    for (auto& v : pow2.data) v *= 32.0f;  // exact in float
    CHECK(ppl(pow2) == doctest::Approx(ppl(traj)).epsilon(1e-9));
    FeatureMatrix general = traj;
    for (auto& v : general.data) v *= 37.5f;
    CHECK(ppl(general) == doctest::Approx(ppl(traj)).epsilon(1e-6));
}

TEST_CASE("ppl rejects coincident endpoints") {
    FeatureMatrix traj = random_matrix(64, 4, 5);
    std::copy_n(traj.row(0), 5, traj.row(3));
    CHECK_THROWS_AS(ppl(traj), InvalidInputError);
}

TEST_CASE("a constant trajectory has zero distance and unit cosine") {
    FeatureMatrix traj(4, 3);
    for (int i = 0; i < 4; ++i) {
        traj.at(i, 0) = 1.0f;
        traj.at(i, 1) = 2.0f;
        traj.at(i, 2) = -1.0f;
    }
    const AdjacentStats stats = adjacent_stats(traj);
    CHECK(stats.mean_distance == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(stats.mean_cosine == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("antipodal unit vectors give distance two and cosine minus one") {
    FeatureMatrix traj(2, 3);
    traj.at(0, 0) = 1.0f;
    traj.at(1, 0) = -1.0f;
    const AdjacentStats stats = adjacent_stats(traj);
    CHECK(stats.mean_distance == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(stats.mean_cosine == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("adjacent stats match a scalar-loop oracle") {
    const FeatureMatrix traj = random_matrix(65, 5, 6);
    const AdjacentStats stats = adjacent_stats(traj);
    double dist_sum = 0.0, cos_sum = 0.0;
    for (int i = 0; i + 1 < 5; ++i) {
        double d2 = 0.0, dot = 0.0, na = 0.0, nb = 0.0;
        for (int c = 0; c < 6; ++c) {
            const double a = traj.at(i, c);
            const double b = traj.at(i + 1, c);
            d2 += (a - b) * (a - b);
            dot += a * b;
            na += a * a;
            nb += b * b;
        }
        dist_sum += std::sqrt(d2);
        cos_sum += dot / (std::sqrt(na) * std::sqrt(nb));
    }
    CHECK(stats.mean_distance == doctest::Approx(dist_sum / 4.0).epsilon(1e-6));
    CHECK(stats.mean_cosine == doctest::Approx(cos_sum / 4.0).epsilon(1e-6));
}

TEST_CASE("the trajectory suite reports finite metrics on toy assets") {
    std::vector<ColoredVoxelAsset> frames;
    Rng rng(66, "assets");
    for (int f = 0; f < 4; ++f) {
        ColoredVoxelAsset asset;
        asset.resolution = 8;
        for (int x = 0; x < 8; x += 2) {
            for (int y = 0; y < 8; y += 2) {
                asset.positions.push_back({x, y, (x + y + f) % 8});
            }
        }
        std::sort(asset.positions.begin(), asset.positions.end());
        for (size_t i = 0; i < asset.positions.size(); ++i) {
            asset.rgb.push_back({static_cast<float>(rng.next_uniform()),
                                 static_cast<float>(rng.next_uniform()),
                                 static_cast<float>(rng.next_uniform())});
            asset.opacity.push_back(0.8f);
        }
        frames.push_back(std::move(asset));
    }
    FeatureExtractor e;
    e.kind = ExtractorKind::seeded_projection;
    e.out_dim = 8;
    e.seed = 3;
    const TrajectoryMetrics m = compute_trajectory_metrics(frames, 6, e, 32);
    CHECK(std::isfinite(m.fid));
    CHECK(std::isfinite(m.kid));
    CHECK(m.ppl >= 1.0 - 1e-6);
    CHECK(m.adjacent_distance >= 0.0);
    CHECK(m.adjacent_cosine <= 1.0 + 1e-9);
}

TEST_CASE("rendering guards degenerate assets and cameras") {
    ColoredVoxelAsset no_extent;  // resolution 0
    CHECK_THROWS_AS(render_views(no_extent, default_cameras(1, 8), 8, 8), InvalidInputError);
    CHECK_THROWS_AS(default_cameras(1, 0), InvalidInputError);
    ColoredVoxelAsset ok;
    ok.resolution = 4;
    Camera flat;
    flat.ortho_scale = 0.0f;
    CHECK_THROWS_AS(render_views(ok, {flat}, 8, 8), InvalidInputError);
}
