#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>

#include "interp3d/correspond.hpp"
#include "interp3d/linalg.hpp"
#include "interp3d/rng.hpp"

using namespace interp3d;

namespace {

FeatureMatrix random_matrix(uint64_t seed, int rows, int cols) {
    Rng rng(seed, "test");
    return seeded_gaussian(rng, rows, cols);
}

// Exhaustive assignment maximum over all permutations.
double brute_force_assignment(const FeatureMatrix& sim) {
    const int n = sim.rows;
    std::vector<int> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = -1e300;
    do {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += sim.at(i, perm[static_cast<size_t>(i)]);
        best = std::max(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Exhaustive search over injective partial matchings, with an admissible-sum
// bound so provably non-improving branches are skipped (result stays exact).
struct PartialOracle {
    int g = 0;
    std::vector<std::vector<std::pair<double, int>>> options;  // per source, sim desc
    std::vector<double> suffix_bound;
    std::vector<uint8_t> used;
    double best = 0.0;
    long long nodes = 0;

    void prepare() {
        suffix_bound.assign(static_cast<size_t>(g) + 1, 0.0);
        for (int p = g - 1; p >= 0; --p) {
            auto& opts = options[static_cast<size_t>(p)];
            std::sort(opts.begin(), opts.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
            const double local = opts.empty() ? 0.0 : std::max(0.0, opts.front().first);
            suffix_bound[static_cast<size_t>(p)] = suffix_bound[static_cast<size_t>(p) + 1] + local;
        }
        used.assign(static_cast<size_t>(g), 0);
    }

    void search(int p, double current) {
        ++nodes;
        if (current > best) best = current;
        if (p == g) return;
        if (current + suffix_bound[static_cast<size_t>(p)] <= best + 1e-12) return;
        for (const auto& [s, q] : options[static_cast<size_t>(p)]) {
            if (used[static_cast<size_t>(q)]) continue;
            used[static_cast<size_t>(q)] = 1;
            search(p + 1, current + s);
            used[static_cast<size_t>(q)] = 0;
        }
        search(p + 1, current);  // p unmatched
    }
};

std::vector<std::vector<std::pair<double, int>>> admissible_edges(const PatchGrid& src,
                                                                  const PatchGrid& tgt,
                                                                  float tau0) {
    const int g = src.patch_count();
    std::vector<std::vector<std::pair<double, int>>> options(static_cast<size_t>(g));
    for (int p = 0; p < g; ++p) {
        for (int q = 0; q < g; ++q) {
            double dot = 0.0, np = 0.0, nq = 0.0;
            for (int c = 0; c < src.features.cols; ++c) {
                dot += static_cast<double>(src.features.at(p, c)) * tgt.features.at(q, c);
                np += static_cast<double>(src.features.at(p, c)) * src.features.at(p, c);
                nq += static_cast<double>(tgt.features.at(q, c)) * tgt.features.at(q, c);
            }
            if (std::sqrt(np) < 1e-12 || std::sqrt(nq) < 1e-12) continue;
            const double cosv = dot / (std::sqrt(np) * std::sqrt(nq));
            if (cosv > tau0) options[static_cast<size_t>(p)].push_back({cosv, q});
        }
    }
    return options;
}

// Exhaustive maximum over injective partial matchings. Tractable for g <= 8.
double brute_force_partial(const PatchGrid& src, const PatchGrid& tgt, float tau0) {
    const int g = src.patch_count();
    REQUIRE(g <= 8);
    PartialOracle oracle;
    oracle.g = g;
    oracle.options = admissible_edges(src, tgt, tau0);
    oracle.prepare();
    oracle.search(0, 0.0);
    return oracle.best;
}

// Exact max-weight matching by successive shortest augmenting paths
// (Bellman-Ford over the residual graph); stops when no augmentation
// improves the total. Independent of the padded-assignment implementation.
double flow_oracle_partial(const PatchGrid& src, const PatchGrid& tgt, float tau0) {
    const int g = src.patch_count();
    const auto options = admissible_edges(src, tgt, tau0);
    std::vector<int> match_of_source(static_cast<size_t>(g), -1);
    std::vector<int> match_of_target(static_cast<size_t>(g), -1);
    double total = 0.0;
    while (true) {
        // dist over 2g nodes: sources [0,g), targets [g,2g)
        std::vector<double> dist(static_cast<size_t>(2 * g),
                                 std::numeric_limits<double>::infinity());
        std::vector<int> prev(static_cast<size_t>(2 * g), -1);
        for (int p = 0; p < g; ++p) {
            if (match_of_source[static_cast<size_t>(p)] < 0) dist[static_cast<size_t>(p)] = 0.0;
        }
        for (int round = 0; round < 2 * g; ++round) {
            bool changed = false;
            for (int p = 0; p < g; ++p) {
                if (!std::isfinite(dist[static_cast<size_t>(p)])) continue;
                for (const auto& [s, q] : options[static_cast<size_t>(p)]) {
                    if (match_of_source[static_cast<size_t>(p)] == q) continue;
                    const double cand = dist[static_cast<size_t>(p)] - s;
                    if (cand < dist[static_cast<size_t>(g + q)] - 1e-15) {
                        dist[static_cast<size_t>(g + q)] = cand;
                        prev[static_cast<size_t>(g + q)] = p;
                        changed = true;
                    }
                }
            }
            for (int q = 0; q < g; ++q) {
                const int p = match_of_target[static_cast<size_t>(q)];
                if (p < 0 || !std::isfinite(dist[static_cast<size_t>(g + q)])) continue;
                double edge = 0.0;
                for (const auto& [s, qq] : options[static_cast<size_t>(p)]) {
                    if (qq == q) edge = s;
                }
                const double cand = dist[static_cast<size_t>(g + q)] + edge;
                if (cand < dist[static_cast<size_t>(p)] - 1e-15) {
                    dist[static_cast<size_t>(p)] = cand;
                    prev[static_cast<size_t>(p)] = g + q;
                    changed = true;
                }
            }
            if (!changed) break;
        }
        int best_target = -1;
        double best_cost = -1e-12;  // only strictly improving augmentations
        for (int q = 0; q < g; ++q) {
            if (match_of_target[static_cast<size_t>(q)] >= 0) continue;
            if (dist[static_cast<size_t>(g + q)] < best_cost) {
                best_cost = dist[static_cast<size_t>(g + q)];
                best_target = q;
            }
        }
        if (best_target < 0) break;
        total -= best_cost;
        // walk the alternating path back to its free source, flipping edges
        int node = g + best_target;
        while (true) {
            const int p = prev[static_cast<size_t>(node)];
            const int q = node - g;
            const int continuation = prev[static_cast<size_t>(p)];  // g+old_q or -1
            match_of_source[static_cast<size_t>(p)] = q;
            match_of_target[static_cast<size_t>(q)] = p;
            if (continuation < 0) break;
            node = continuation;
        }
    }
    return total;
}

PatchGrid patch_grid_from(const FeatureMatrix& features, int per_axis) {
    PatchGrid pg;
    pg.grid_resolution = per_axis;
    pg.patch_side = 1;
    pg.patches_per_axis = per_axis;
    pg.features = features;
    return pg;
}

SparseVoxelLatent make_slat(std::vector<VoxelPos> positions, const FeatureMatrix& features,
                            int resolution) {
    SparseVoxelLatent slat;
    slat.positions = std::move(positions);
    slat.features = features;
    slat.resolution = resolution;
    normalize_positions(slat.positions, resolution);
    return slat;
}

}  // namespace

TEST_CASE("identity similarity yields the identity permutation") {
    FeatureMatrix sim(4, 4);
    for (int i = 0; i < 4; ++i) sim.at(i, i) = 1.0f;
    const CorrespondenceMap map = solve_assignment(sim);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(map.mapping[i] == static_cast<int64_t>(i));
        CHECK(map.matched[i] == 1);
    }
}

TEST_CASE("anti-diagonal 2x2 similarity forces the swap") {
    FeatureMatrix sim(2, 2);
    sim.at(0, 1) = 1.0f;
    sim.at(1, 0) = 1.0f;
    const CorrespondenceMap map = solve_assignment(sim);
    CHECK(map.mapping[0] == 1);
    CHECK(map.mapping[1] == 0);
    CHECK(assignment_objective(sim, map) == doctest::Approx(2.0));
}

TEST_CASE("solve_assignment matches 6x6 brute force") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const FeatureMatrix sim = random_matrix(100 + seed, 6, 6);
        const CorrespondenceMap map = solve_assignment(sim);
        CHECK(assignment_objective(sim, map) ==
              doctest::Approx(brute_force_assignment(sim)).epsilon(1e-9));
    }
}

TEST_CASE("solve_assignment rejects non-square input") {
    CHECK_THROWS_AS(solve_assignment(random_matrix(3, 3, 4)), InvalidInputError);
}

TEST_CASE("assignment beats random permutations") {
    const FeatureMatrix sim = random_matrix(55, 12, 12);
    const CorrespondenceMap map = solve_assignment(sim);
    const double best = assignment_objective(sim, map);
    Rng rng(56, "perm");
    std::vector<int> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    for (int trial = 0; trial < 1000; ++trial) {
        for (int i = 11; i > 0; --i) {
            const int j = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(i + 1));
            std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
        }
        double total = 0.0;
        for (int i = 0; i < 12; ++i) total += sim.at(i, perm[static_cast<size_t>(i)]);
        CHECK(best >= total - 1e-9);
    }
}

TEST_CASE("densify_project keeps a single voxel in its cell") {
    FeatureMatrix f(1, 3);
    f.at(0, 0) = 1.5f;
    f.at(0, 1) = -2.0f;
    f.at(0, 2) = 0.25f;
    const SparseVoxelLatent slat = make_slat({{0, 0, 0}}, f, 4);
    const DenseGrid grid = densify_project(slat, 4);
    CHECK(grid.at(0, 0, 0, 0) == 1.5f);
    CHECK(grid.at(0, 0, 0, 1) == -2.0f);
    CHECK(grid.at(0, 0, 0, 2) == 0.25f);
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            for (int z = 0; z < 4; ++z)
                if (x + y + z > 0) CHECK(grid.at(x, y, z, 0) == 0.0f);
}

TEST_CASE("densify_project of an empty latent is all zeros") {
    SparseVoxelLatent slat;
    slat.resolution = 4;
    slat.features = FeatureMatrix(0, 2);
    const DenseGrid grid = densify_project(slat, 2);
    for (float v : grid.data) CHECK(v == 0.0f);
}

TEST_CASE("densify_project averages a full 2^3 block") {
    std::vector<VoxelPos> positions;
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int z = 0; z < 2; ++z) positions.push_back({x, y, z});
    const FeatureMatrix f = random_matrix(77, 8, 3);
    const SparseVoxelLatent slat = make_slat(positions, f, 4);
    const DenseGrid grid = densify_project(slat, 2);
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (int r = 0; r < 8; ++r) mean += f.at(r, c);
        mean /= 8.0;
        CHECK(grid.at(0, 0, 0, c) == doctest::Approx(mean).epsilon(1e-6));
    }
}

TEST_CASE("densify_project rejects non-divisible resolutions") {
    const SparseVoxelLatent slat = make_slat({{0, 0, 0}}, random_matrix(1, 1, 2), 4);
    CHECK_THROWS_AS(densify_project(slat, 3), InvalidInputError);
}

TEST_CASE("densify_project preserves mass when fully occupied") {
    std::vector<VoxelPos> positions;
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            for (int z = 0; z < 4; ++z) positions.push_back({x, y, z});
    const FeatureMatrix f = random_matrix(88, 64, 2);
    const SparseVoxelLatent slat = make_slat(positions, f, 4);
    const DenseGrid grid = densify_project(slat, 2);
    for (int c = 0; c < 2; ++c) {
        double fine_sum = 0.0;
        for (int r = 0; r < 64; ++r) fine_sum += f.at(r, c);
        double coarse_sum = 0.0;
        for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y)
                for (int z = 0; z < 2; ++z) coarse_sum += grid.at(x, y, z, c);
        coarse_sum *= 8.0;  // cell volume in fine voxels
        CHECK(std::abs(coarse_sum - fine_sum) <= 1e-4 * std::max(1.0, std::abs(fine_sum)));
    }
}

TEST_CASE("partition_patches patch counts follow the ceiling rule") {
    DenseGrid grid(64, 2);
    const PatchGrid pg = partition_patches(grid, 4);
    CHECK(pg.patches_per_axis == 16);
    CHECK(pg.patch_count() == 4096);
}

TEST_CASE("a single whole-grid patch pools to the global mean") {
    DenseGrid grid(4, 2);
    Rng rng(5, "grid");
    for (auto& v : grid.data) v = rng.next_gaussian();
    const PatchGrid pg = partition_patches(grid, 4);
    CHECK(pg.patch_count() == 1);
    for (int c = 0; c < 2; ++c) {
        double mean = 0.0;
        for (int x = 0; x < 4; ++x)
            for (int y = 0; y < 4; ++y)
                for (int z = 0; z < 4; ++z) mean += grid.at(x, y, z, c);
        mean /= 64.0;
        CHECK(pg.features.at(0, c) == doctest::Approx(mean).epsilon(1e-6));
    }
}

TEST_CASE("unit patches reproduce the cells exactly") {
    DenseGrid grid(3, 2);
    Rng rng(6, "grid");
    for (auto& v : grid.data) v = rng.next_gaussian();
    const PatchGrid pg = partition_patches(grid, 1);
    CHECK(pg.patch_count() == 27);
    for (int x = 0; x < 3; ++x)
        for (int y = 0; y < 3; ++y)
            for (int z = 0; z < 3; ++z)
                for (int c = 0; c < 2; ++c)
                    CHECK(pg.features.at(static_cast<int>(grid.cell(x, y, z)), c) ==
                          grid.at(x, y, z, c));
}

TEST_CASE("partition_patches rejects bad patch sides") {
    DenseGrid grid(4, 1);
    CHECK_THROWS_AS(partition_patches(grid, 0), InvalidInputError);
    CHECK_THROWS_AS(partition_patches(grid, 5), InvalidInputError);
}

TEST_CASE("self correspondence is the identity when features are distinct") {
    const FeatureMatrix f = random_matrix(9, 8, 6);
    const PatchGrid pg = patch_grid_from(f, 2);
    const CorrespondenceMap map = dynamic_patch_correspondence(pg, pg, 0.5f);
    for (size_t i = 0; i < map.size(); ++i) {
        CHECK(map.matched[i] == 1);
        CHECK(map.mapping[i] == static_cast<int64_t>(i));
    }
}

TEST_CASE("an impossible threshold leaves everything unmatched") {
    const FeatureMatrix f = random_matrix(10, 8, 6);
    const PatchGrid pg = patch_grid_from(f, 2);
    const CorrespondenceMap map = dynamic_patch_correspondence(pg, pg, 1.1f);
    for (size_t i = 0; i < map.size(); ++i) {
        CHECK(map.matched[i] == 0);
        CHECK(map.mapping[i] == static_cast<int64_t>(i));
    }
}

TEST_CASE("patch correspondence matches exhaustive search on 2x2x2 grids") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const PatchGrid src = patch_grid_from(random_matrix(400 + seed, 8, 4), 2);
        const PatchGrid tgt = patch_grid_from(random_matrix(500 + seed, 8, 4), 2);
        for (float tau0 : {-0.3f, 0.0f, 0.4f}) {
            const CorrespondenceMap map = dynamic_patch_correspondence(src, tgt, tau0);
            const double objective = matched_similarity(src, tgt, map);
            CHECK(objective ==
                  doctest::Approx(brute_force_partial(src, tgt, tau0)).epsilon(1e-9));
            CHECK(objective ==
                  doctest::Approx(flow_oracle_partial(src, tgt, tau0)).epsilon(1e-9));
        }
    }
}

TEST_CASE("patch correspondence matches the flow oracle on 3x3x3 grids") {
    for (uint64_t seed = 0; seed < 3; ++seed) {
        const PatchGrid src = patch_grid_from(random_matrix(200 + seed, 27, 4), 3);
        const PatchGrid tgt = patch_grid_from(random_matrix(300 + seed, 27, 4), 3);
        const CorrespondenceMap map = dynamic_patch_correspondence(src, tgt, 0.0f);
        const double objective = matched_similarity(src, tgt, map);
        const double oracle = flow_oracle_partial(src, tgt, 0.0f);
        CHECK(objective == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("zero-feature patches never match") {
    FeatureMatrix src = random_matrix(11, 8, 4);
    FeatureMatrix tgt = src;
    for (int c = 0; c < 4; ++c) src.at(3, c) = 0.0f;
    const CorrespondenceMap map =
        dynamic_patch_correspondence(patch_grid_from(src, 2), patch_grid_from(tgt, 2), -1.0f);
    CHECK(map.matched[3] == 0);
}

TEST_CASE("matched similarity is monotone non-increasing in tau0") {
    const PatchGrid src = patch_grid_from(random_matrix(12, 8, 4), 2);
    const PatchGrid tgt = patch_grid_from(random_matrix(13, 8, 4), 2);
    double prev = std::numeric_limits<double>::infinity();
    for (float tau0 : {-0.5f, 0.0f, 0.3f, 0.6f, 0.9f}) {
        const double objective =
            matched_similarity(src, tgt, dynamic_patch_correspondence(src, tgt, tau0));
        CHECK(objective <= prev + 1e-9);
        prev = objective;
    }
}

TEST_CASE("identity map leaves K/V untouched") {
    const FeatureMatrix k = random_matrix(14, 8, 3);
    const FeatureMatrix v = random_matrix(15, 8, 3);
    const PatchGrid layout = patch_grid_from(FeatureMatrix(8, 1), 2);
    const auto [k_out, v_out] =
        apply_permutation(k, v, CorrespondenceMap::identity(8), layout);
    CHECK(k_out.data == k.data);
    CHECK(v_out.data == v.data);
}

TEST_CASE("a two-patch swap exchanges blocks and inverts cleanly") {
    // layout: resolution 2, patch side 1 -> 8 single-cell patches
    const FeatureMatrix k = random_matrix(16, 8, 3);
    const FeatureMatrix v = random_matrix(17, 8, 3);
    const PatchGrid layout = patch_grid_from(FeatureMatrix(8, 1), 2);
    CorrespondenceMap swap = CorrespondenceMap::identity(8);
    swap.mapping[0] = 5;
    swap.mapping[5] = 0;
    swap.matched[0] = 1;
    swap.matched[5] = 1;
    const auto [k_swapped, v_swapped] = apply_permutation(k, v, swap, layout);
    for (int c = 0; c < 3; ++c) {
        CHECK(k_swapped.at(0, c) == k.at(5, c));
        CHECK(k_swapped.at(5, c) == k.at(0, c));
        CHECK(k_swapped.at(2, c) == k.at(2, c));
    }
    const auto [k_back, v_back] = apply_permutation(k_swapped, v_swapped, swap.inverse(), layout);
    CHECK(k_back.data == k.data);
    CHECK(v_back.data == v.data);
}

TEST_CASE("random partial maps preserve the token multiset") {
    const FeatureMatrix k = random_matrix(18, 8, 4);
    const FeatureMatrix v = random_matrix(19, 8, 4);
    const PatchGrid layout = patch_grid_from(FeatureMatrix(8, 1), 2);
    Rng rng(20, "maps");
    for (int trial = 0; trial < 20; ++trial) {
        CorrespondenceMap map = CorrespondenceMap::identity(8);
        std::vector<int> targets(8);
        std::iota(targets.begin(), targets.end(), 0);
        for (int i = 7; i > 0; --i) {
            const int j = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(i + 1));
            std::swap(targets[static_cast<size_t>(i)], targets[static_cast<size_t>(j)]);
        }
        for (int i = 0; i < 8; ++i) {
            if (rng.next_u64() % 2 == 0) {
                map.mapping[static_cast<size_t>(i)] = targets[static_cast<size_t>(i)];
                map.matched[static_cast<size_t>(i)] = 1;
            }
        }
        const auto [k_out, v_out] = apply_permutation(k, v, map, layout);
        auto sorted_rows = [](const FeatureMatrix& m) {
            std::vector<std::vector<float>> rows;
            for (int r = 0; r < m.rows; ++r) {
                rows.emplace_back(m.row(r), m.row(r) + m.cols);
            }
            std::sort(rows.begin(), rows.end());
            return rows;
        };
        CHECK(sorted_rows(k_out) == sorted_rows(k));
        CHECK(sorted_rows(v_out) == sorted_rows(v));
    }
}

TEST_CASE("apply_permutation rejects token-count mismatches") {
    const PatchGrid layout = patch_grid_from(FeatureMatrix(8, 1), 2);
    CHECK_THROWS_AS(apply_permutation(random_matrix(1, 7, 3), random_matrix(2, 7, 3),
                                      CorrespondenceMap::identity(8), layout),
                    InvalidInputError);
}

TEST_CASE("correspondence maps round-trip through tensor files") {
    CorrespondenceMap map = CorrespondenceMap::identity(6);
    map.mapping[1] = 4;
    map.matched[1] = 1;
    map.mapping[4] = 2;
    map.matched[4] = 1;
    const std::string prefix =
        (std::filesystem::temp_directory_path() / "corr_roundtrip").string();
    map.save(prefix);
    const CorrespondenceMap loaded = CorrespondenceMap::load(prefix);
    CHECK(loaded.mapping == map.mapping);
    CHECK(loaded.matched == map.matched);
    std::filesystem::remove(prefix + ".index.i3dt");
    std::filesystem::remove(prefix + ".mask.i3dt");
}

TEST_CASE("the greedy fallback returns a valid but possibly weaker bijection") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const FeatureMatrix sim = random_matrix(700 + seed, 7, 7);
        const CorrespondenceMap greedy = solve_assignment_greedy(sim);
        greedy.validate();
        CHECK(greedy.all_matched());
        const double exact = assignment_objective(sim, solve_assignment(sim));
        const double got = assignment_objective(sim, greedy);
        CHECK(got <= exact + 1e-9);
    }
}

TEST_CASE("greedy patch matching stays admissible and below the exact optimum") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const PatchGrid src = patch_grid_from(random_matrix(800 + seed, 8, 4), 2);
        const PatchGrid tgt = patch_grid_from(random_matrix(900 + seed, 8, 4), 2);
        const float tau0 = 0.1f;
        const CorrespondenceMap greedy = dynamic_patch_correspondence_greedy(src, tgt, tau0);
        greedy.validate();
        const FeatureMatrix sim = cosine_similarity_matrix(src.features, tgt.features);
        for (size_t p = 0; p < greedy.size(); ++p) {
            if (greedy.matched[p]) {
                CHECK(sim.at(static_cast<int>(p), static_cast<int>(greedy.mapping[p])) > tau0);
            }
        }
        const double exact = matched_similarity(
            src, tgt, dynamic_patch_correspondence(src, tgt, tau0));
        CHECK(matched_similarity(src, tgt, greedy) <= exact + 1e-9);
    }
}

TEST_CASE("patch correspondence rejects mismatched grids") {
    const PatchGrid a = patch_grid_from(random_matrix(950, 8, 4), 2);
    const PatchGrid b = patch_grid_from(random_matrix(951, 27, 4), 3);
    CHECK_THROWS_AS(dynamic_patch_correspondence(a, b, 0.0f), InvalidInputError);
    PatchGrid c = a;
    c.features = random_matrix(952, 8, 6);  // different channel count
    CHECK_THROWS_AS(dynamic_patch_correspondence(a, c, 0.0f), InvalidInputError);
}

TEST_CASE("solve_assignment rejects non-finite similarities") {
    FeatureMatrix sim = random_matrix(953, 4, 4);
    sim.at(1, 2) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(solve_assignment(sim), InvalidInputError);
}
