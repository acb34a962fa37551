#include "interp3d/correspond.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "interp3d/linalg.hpp"

namespace interp3d {

bool CorrespondenceMap::all_matched() const {
    return std::all_of(matched.begin(), matched.end(), [](uint8_t m) { return m != 0; });
}

CorrespondenceMap CorrespondenceMap::identity(size_t n) {
    CorrespondenceMap map;
    map.mapping.resize(n);
    for (size_t i = 0; i < n; ++i) map.mapping[i] = static_cast<int64_t>(i);
    map.matched.assign(n, 0);
    return map;
}

CorrespondenceMap CorrespondenceMap::inverse() const {
    validate();
    CorrespondenceMap inv = identity(size());
    for (size_t p = 0; p < size(); ++p) {
        if (matched[p]) {
            inv.mapping[static_cast<size_t>(mapping[p])] = static_cast<int64_t>(p);
            inv.matched[static_cast<size_t>(mapping[p])] = 1;
        }
    }
    return inv;
}

void CorrespondenceMap::validate() const {
    if (mapping.size() != matched.size()) {
        throw InvalidInputError("CorrespondenceMap: mapping/matched size mismatch");
    }
    std::vector<uint8_t> seen(size(), 0);
    for (size_t i = 0; i < size(); ++i) {
        const int64_t t = mapping[i];
        if (t < 0 || t >= static_cast<int64_t>(size())) {
            throw InvalidInputError("CorrespondenceMap: target index out of range");
        }
        if (matched[i]) {
            if (seen[static_cast<size_t>(t)]) {
                throw InvalidInputError("CorrespondenceMap: matched targets not injective");
            }
            seen[static_cast<size_t>(t)] = 1;
        } else if (t != static_cast<int64_t>(i)) {
            throw InvalidInputError("CorrespondenceMap: unmatched entry must map to itself");
        }
    }
}

void CorrespondenceMap::save(const std::string& path_prefix) const {
    save_tensor_i64(path_prefix + ".index.i3dt", {mapping.size()}, mapping.data());
    save_tensor_u8(path_prefix + ".mask.i3dt", {matched.size()}, matched.data());
}

CorrespondenceMap CorrespondenceMap::load(const std::string& path_prefix) {
    TensorFile idx = load_tensor(path_prefix + ".index.i3dt");
    TensorFile mask = load_tensor(path_prefix + ".mask.i3dt");
    if (idx.dtype != 1 || mask.dtype != 2 || idx.i64.size() != mask.u8.size()) {
        throw IoError("CorrespondenceMap: malformed tensor pair at " + path_prefix);
    }
    CorrespondenceMap map;
    map.mapping = std::move(idx.i64);
    map.matched = std::move(mask.u8);
    map.validate();
    return map;
}

// ---------------------------------------------------------------------------
// Assignment
// ---------------------------------------------------------------------------

namespace {

// Jonker-Volgenant style shortest augmenting path solver, minimizing total
// cost of a perfect matching on an n x n matrix. Returns rowsol[i] = column.
std::vector<int> min_cost_assignment(const std::vector<double>& cost, int n) {
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<size_t>(n) + 1, 0);
    std::vector<int> way(static_cast<size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(n) + 1,
                                 std::numeric_limits<double>::infinity());
        std::vector<char> used(static_cast<size_t>(n) + 1, 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            const int i0 = p[static_cast<size_t>(j0)];
            int j1 = 0;
            double delta = std::numeric_limits<double>::infinity();
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur =
                    cost[static_cast<size_t>(i0 - 1) * n + (j - 1)] - u[static_cast<size_t>(i0)] -
                    v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> rowsol(static_cast<size_t>(n), -1);
    for (int j = 1; j <= n; ++j) {
        if (p[static_cast<size_t>(j)] != 0) rowsol[static_cast<size_t>(p[static_cast<size_t>(j)]) - 1] = j - 1;
    }
    return rowsol;
}

std::vector<int> greedy_assignment(const FeatureMatrix& sim) {
    const int n = sim.rows;
    struct Entry {
        float s;
        int i, j;
    };
    std::vector<Entry> entries;
    entries.reserve(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) entries.push_back({sim.at(i, j), i, j});
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.s != b.s) return a.s > b.s;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    std::vector<int> rowsol(static_cast<size_t>(n), -1);
    std::vector<uint8_t> col_used(static_cast<size_t>(n), 0);
    int assigned = 0;
    for (const Entry& e : entries) {
        if (assigned == n) break;
        if (rowsol[static_cast<size_t>(e.i)] >= 0 || col_used[static_cast<size_t>(e.j)]) continue;
        rowsol[static_cast<size_t>(e.i)] = e.j;
        col_used[static_cast<size_t>(e.j)] = 1;
        ++assigned;
    }
    return rowsol;
}

}  // namespace

namespace {

CorrespondenceMap full_map_from_rowsol(const std::vector<int>& rowsol) {
    CorrespondenceMap map;
    map.mapping.assign(rowsol.begin(), rowsol.end());
    map.matched.assign(rowsol.size(), 1);
    map.validate();
    return map;
}

}  // namespace

CorrespondenceMap solve_assignment(const FeatureMatrix& sim) {
    if (sim.rows != sim.cols) {
        throw InvalidInputError("solve_assignment: similarity matrix must be square");
    }
    sim.ensure_finite("solve_assignment similarity");
    const int n = sim.rows;
    if (n == 0) return CorrespondenceMap{};
    if (n > kExactAssignmentLimit) return full_map_from_rowsol(greedy_assignment(sim));
    std::vector<double> cost(static_cast<size_t>(n) * n);
    for (size_t i = 0; i < cost.size(); ++i) cost[i] = -static_cast<double>(sim.data[i]);
    return full_map_from_rowsol(min_cost_assignment(cost, n));
}

CorrespondenceMap solve_assignment_greedy(const FeatureMatrix& sim) {
    if (sim.rows != sim.cols) {
        throw InvalidInputError("solve_assignment_greedy: similarity matrix must be square");
    }
    sim.ensure_finite("solve_assignment similarity");
    if (sim.rows == 0) return CorrespondenceMap{};
    return full_map_from_rowsol(greedy_assignment(sim));
}

double assignment_objective(const FeatureMatrix& sim, const CorrespondenceMap& map) {
    double total = 0.0;
    for (size_t i = 0; i < map.size(); ++i) {
        if (map.matched[i]) {
            total += sim.at(static_cast<int>(i), static_cast<int>(map.mapping[i]));
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Patch machinery
// ---------------------------------------------------------------------------

DenseGrid densify_project(const SparseVoxelLatent& slat, int target_resolution) {
    slat.validate();
    if (target_resolution < 1 || slat.resolution < target_resolution ||
        slat.resolution % target_resolution != 0) {
        throw InvalidInputError("densify_project: target resolution must divide latent resolution");
    }
    const int factor = slat.resolution / target_resolution;
    const int channels = slat.features.cols > 0 ? slat.features.cols : 1;
    DenseGrid grid(target_resolution, channels);
    std::vector<double> sums(grid.data.size(), 0.0);
    std::vector<int> counts(static_cast<size_t>(target_resolution) * target_resolution *
                                target_resolution,
                            0);
    for (size_t vi = 0; vi < slat.positions.size(); ++vi) {
        const auto& pos = slat.positions[vi];
        const size_t cell = grid.cell(pos[0] / factor, pos[1] / factor, pos[2] / factor);
        ++counts[cell];
        const float* feat = slat.features.row(static_cast<int>(vi));
        for (int c = 0; c < slat.features.cols; ++c) sums[cell * channels + c] += feat[c];
    }
    for (size_t cell = 0; cell < counts.size(); ++cell) {
        if (counts[cell] == 0) continue;
        for (int c = 0; c < channels; ++c) {
            grid.data[cell * channels + c] =
                static_cast<float>(sums[cell * channels + c] / counts[cell]);
        }
    }
    return grid;
}

PatchGrid partition_patches(const DenseGrid& grid, int patch_side) {
    if (patch_side < 1 || patch_side > grid.resolution) {
        throw InvalidInputError("partition_patches: patch side must be in [1, N]");
    }
    const int n = grid.resolution;
    const int per_axis = (n + patch_side - 1) / patch_side;
    PatchGrid pg;
    pg.grid_resolution = n;
    pg.patch_side = patch_side;
    pg.patches_per_axis = per_axis;
    pg.features = FeatureMatrix(per_axis * per_axis * per_axis, grid.channels);
    std::vector<double> acc(static_cast<size_t>(grid.channels));
    for (int px = 0; px < per_axis; ++px) {
        for (int py = 0; py < per_axis; ++py) {
            for (int pz = 0; pz < per_axis; ++pz) {
                std::fill(acc.begin(), acc.end(), 0.0);
                int cells = 0;
                for (int x = px * patch_side; x < std::min((px + 1) * patch_side, n); ++x) {
                    for (int y = py * patch_side; y < std::min((py + 1) * patch_side, n); ++y) {
                        for (int z = pz * patch_side; z < std::min((pz + 1) * patch_side, n); ++z) {
                            for (int c = 0; c < grid.channels; ++c) {
                                acc[static_cast<size_t>(c)] += grid.at(x, y, z, c);
                            }
                            ++cells;
                        }
                    }
                }
                const int patch = (px * per_axis + py) * per_axis + pz;
                for (int c = 0; c < grid.channels; ++c) {
                    pg.features.at(patch, c) = static_cast<float>(acc[static_cast<size_t>(c)] / cells);
                }
            }
        }
    }
    return pg;
}

namespace {

struct PatchSim {
    // similarity for admissible pairs only; -inf marks inadmissible
    std::vector<double> sim;
    int g = 0;
    double at(int p, int q) const { return sim[static_cast<size_t>(p) * g + q]; }
};

PatchSim admissible_similarity(const PatchGrid& src, const PatchGrid& tgt, float tau0) {
    const int g = src.patch_count();
    PatchSim out;
    out.g = g;
    out.sim.assign(static_cast<size_t>(g) * g, -std::numeric_limits<double>::infinity());
    std::vector<double> ns(static_cast<size_t>(g)), nt(static_cast<size_t>(g));
    auto norms = [](const FeatureMatrix& f, std::vector<double>& n) {
        for (int i = 0; i < f.rows; ++i) {
            double s = 0.0;
            for (int c = 0; c < f.cols; ++c) s += static_cast<double>(f.at(i, c)) * f.at(i, c);
            n[static_cast<size_t>(i)] = std::sqrt(s);
        }
    };
    norms(src.features, ns);
    norms(tgt.features, nt);
    for (int p = 0; p < g; ++p) {
        if (ns[static_cast<size_t>(p)] < 1e-12) continue;  // zero patches never match
        for (int q = 0; q < g; ++q) {
            if (nt[static_cast<size_t>(q)] < 1e-12) continue;
            double dot = 0.0;
            for (int c = 0; c < src.features.cols; ++c) {
                dot += static_cast<double>(src.features.at(p, c)) * tgt.features.at(q, c);
            }
            const double cosv = dot / (ns[static_cast<size_t>(p)] * nt[static_cast<size_t>(q)]);
            if (cosv > static_cast<double>(tau0)) {
                out.sim[static_cast<size_t>(p) * g + q] = cosv;
            }
        }
    }
    return out;
}

// Max-weight partial matching via a padded 2G x 2G assignment: slot G+p lets
// source p stay unmatched at zero cost, slot column G+q does the same for
// target q, dummy-dummy pairs are free.
CorrespondenceMap exact_partial_matching(const PatchSim& ps) {
    const int g = ps.g;
    const int n = 2 * g;
    constexpr double kForbidden = 1e7;
    std::vector<double> cost(static_cast<size_t>(n) * n, kForbidden);
    for (int p = 0; p < g; ++p) {
        for (int q = 0; q < g; ++q) {
            const double s = ps.at(p, q);
            if (std::isfinite(s)) cost[static_cast<size_t>(p) * n + q] = -s;
        }
        cost[static_cast<size_t>(p) * n + (g + p)] = 0.0;
    }
    for (int q = 0; q < g; ++q) {
        cost[static_cast<size_t>(g + q) * n + q] = 0.0;
        for (int p = 0; p < g; ++p) cost[static_cast<size_t>(g + q) * n + (g + p)] = 0.0;
    }
    const std::vector<int> rowsol = min_cost_assignment(cost, n);
    CorrespondenceMap map = CorrespondenceMap::identity(static_cast<size_t>(g));
    for (int p = 0; p < g; ++p) {
        const int q = rowsol[static_cast<size_t>(p)];
        // pairs with non-positive similarity never improve the objective
        if (q < g && std::isfinite(ps.at(p, q)) && ps.at(p, q) > 0.0) {
            map.mapping[static_cast<size_t>(p)] = q;
            map.matched[static_cast<size_t>(p)] = 1;
        }
    }
    map.validate();
    return map;
}

CorrespondenceMap greedy_partial_matching(const PatchSim& ps) {
    const int g = ps.g;
    struct Entry {
        double s;
        int p, q;
    };
    std::vector<Entry> entries;
    for (int p = 0; p < g; ++p) {
        for (int q = 0; q < g; ++q) {
            const double s = ps.at(p, q);
            if (std::isfinite(s) && s > 0.0) entries.push_back({s, p, q});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.s != b.s) return a.s > b.s;
        if (a.p != b.p) return a.p < b.p;
        return a.q < b.q;
    });
    CorrespondenceMap map = CorrespondenceMap::identity(static_cast<size_t>(g));
    std::vector<uint8_t> tgt_used(static_cast<size_t>(g), 0);
    for (const Entry& e : entries) {
        if (map.matched[static_cast<size_t>(e.p)] || tgt_used[static_cast<size_t>(e.q)]) continue;
        map.mapping[static_cast<size_t>(e.p)] = e.q;
        map.matched[static_cast<size_t>(e.p)] = 1;
        tgt_used[static_cast<size_t>(e.q)] = 1;
    }
    map.validate();
    return map;
}

}  // namespace

namespace {

void check_patch_pair(const PatchGrid& src, const PatchGrid& tgt) {
    if (src.patch_count() != tgt.patch_count()) {
        throw InvalidInputError("dynamic_patch_correspondence: patch counts differ");
    }
    if (src.features.cols != tgt.features.cols) {
        throw InvalidInputError("dynamic_patch_correspondence: channel counts differ");
    }
}

}  // namespace

CorrespondenceMap dynamic_patch_correspondence(const PatchGrid& src, const PatchGrid& tgt,
                                               float tau0) {
    check_patch_pair(src, tgt);
    const PatchSim ps = admissible_similarity(src, tgt, tau0);
    if (2 * ps.g <= kExactAssignmentLimit) return exact_partial_matching(ps);
    return greedy_partial_matching(ps);
}

CorrespondenceMap dynamic_patch_correspondence_greedy(const PatchGrid& src,
                                                      const PatchGrid& tgt, float tau0) {
    check_patch_pair(src, tgt);
    return greedy_partial_matching(admissible_similarity(src, tgt, tau0));
}

double matched_similarity(const PatchGrid& src, const PatchGrid& tgt,
                          const CorrespondenceMap& map) {
    const PatchSim ps = admissible_similarity(src, tgt, -2.0f);
    double total = 0.0;
    for (size_t p = 0; p < map.size(); ++p) {
        if (map.matched[p]) total += ps.at(static_cast<int>(p), static_cast<int>(map.mapping[p]));
    }
    return total;
}

// ---------------------------------------------------------------------------
// KV permutation
// ---------------------------------------------------------------------------

std::vector<int> cell_permutation(const CorrespondenceMap& map, const PatchGrid& layout) {
    map.validate();
    const int g = layout.patch_count();
    if (static_cast<int>(map.size()) != g) {
        throw InvalidInputError("cell_permutation: map size != patch count");
    }
    const int n = layout.grid_resolution;
    const int s = layout.patch_side;
    if (n % s != 0) {
        throw InvalidInputError("cell_permutation: patch side must divide grid resolution");
    }

    // Complete the partial injection to a patch-level permutation: matched
    // slots take their target patch; unclaimed targets stay in place where
    // the slot is free; remaining slots and targets pair up in index order.
    std::vector<int> patch_perm(static_cast<size_t>(g), -1);
    std::vector<uint8_t> target_taken(static_cast<size_t>(g), 0);
    for (int p = 0; p < g; ++p) {
        if (map.matched[static_cast<size_t>(p)]) {
            patch_perm[static_cast<size_t>(p)] = static_cast<int>(map.mapping[static_cast<size_t>(p)]);
            target_taken[static_cast<size_t>(map.mapping[static_cast<size_t>(p)])] = 1;
        }
    }
    for (int p = 0; p < g; ++p) {
        if (patch_perm[static_cast<size_t>(p)] < 0 && !target_taken[static_cast<size_t>(p)]) {
            patch_perm[static_cast<size_t>(p)] = p;
            target_taken[static_cast<size_t>(p)] = 1;
        }
    }
    int next_free = 0;
    for (int p = 0; p < g; ++p) {
        if (patch_perm[static_cast<size_t>(p)] >= 0) continue;
        while (target_taken[static_cast<size_t>(next_free)]) ++next_free;
        patch_perm[static_cast<size_t>(p)] = next_free;
        target_taken[static_cast<size_t>(next_free)] = 1;
    }

    const int per_axis = layout.patches_per_axis;
    auto patch_origin = [&](int patch) {
        const int px = patch / (per_axis * per_axis);
        const int py = (patch / per_axis) % per_axis;
        const int pz = patch % per_axis;
        return VoxelPos{px * s, py * s, pz * s};
    };

    std::vector<int> perm(static_cast<size_t>(n) * n * n);
    for (int p = 0; p < g; ++p) {
        const int q = patch_perm[static_cast<size_t>(p)];
        const VoxelPos po = patch_origin(p);
        const VoxelPos qo = patch_origin(q);
        for (int dx = 0; dx < s; ++dx) {
            for (int dy = 0; dy < s; ++dy) {
                for (int dz = 0; dz < s; ++dz) {
                    const size_t dst =
                        (static_cast<size_t>(po[0] + dx) * n + (po[1] + dy)) * n + (po[2] + dz);
                    const int src_cell =
                        ((qo[0] + dx) * n + (qo[1] + dy)) * n + (qo[2] + dz);
                    perm[dst] = src_cell;
                }
            }
        }
    }
    return perm;
}

std::pair<FeatureMatrix, FeatureMatrix> apply_permutation(const FeatureMatrix& k,
                                                          const FeatureMatrix& v,
                                                          const CorrespondenceMap& map,
                                                          const PatchGrid& layout) {
    const int n = layout.grid_resolution;
    const int cells = n * n * n;
    if (k.rows != cells || v.rows != cells) {
        throw InvalidInputError("apply_permutation: token count != grid cell count");
    }
    const std::vector<int> perm = cell_permutation(map, layout);
    FeatureMatrix k_out(k.rows, k.cols);
    FeatureMatrix v_out(v.rows, v.cols);
    for (int r = 0; r < cells; ++r) {
        const int src = perm[static_cast<size_t>(r)];
        std::copy_n(k.row(src), k.cols, k_out.row(r));
        std::copy_n(v.row(src), v.cols, v_out.row(r));
    }
    return {std::move(k_out), std::move(v_out)};
}

}  // namespace interp3d
