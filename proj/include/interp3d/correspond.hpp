#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "interp3d/tensor.hpp"

namespace interp3d {

/// Partial one-to-one index mapping. Matched entries form an injection;
/// unmatched entries map to their own index.
struct CorrespondenceMap {
    std::vector<int64_t> mapping;
    std::vector<uint8_t> matched;

    size_t size() const { return mapping.size(); }
    bool all_matched() const;

    static CorrespondenceMap identity(size_t n);
    CorrespondenceMap inverse() const;
    void validate() const;

    // Serialized as two I3DT tensors: <path>.index.i3dt (i64) and
    // <path>.mask.i3dt (u8).
    void save(const std::string& path_prefix) const;
    static CorrespondenceMap load(const std::string& path_prefix);
};

/// Cubic partition of a DenseGrid into patches of side `patch_side`, with
/// mean-pooled features per patch. Patch index uses the same x-major
/// linearization as grid cells.
struct PatchGrid {
    int grid_resolution = 0;
    int patch_side = 0;
    int patches_per_axis = 0;  // ceil(N / s)
    FeatureMatrix features;    // G x C

    int patch_count() const { return patches_per_axis * patches_per_axis * patches_per_axis; }
};

/// Exact maximum-similarity bijection for square matrices up to
/// `kExactAssignmentLimit`; greedy highest-similarity-first above that.
constexpr int kExactAssignmentLimit = 2048;

CorrespondenceMap solve_assignment(const FeatureMatrix& sim);

/// The highest-similarity-first fallback used above kExactAssignmentLimit.
/// Suboptimal; ties break to the lowest source index, then target index.
CorrespondenceMap solve_assignment_greedy(const FeatureMatrix& sim);

/// Objective of a map against a similarity matrix (sum over matched entries,
/// ascending source order, double accumulation).
double assignment_objective(const FeatureMatrix& sim, const CorrespondenceMap& map);

/// Mean-pools sparse voxel features onto a coarser grid. `target_resolution`
/// must divide the latent resolution; empty cells stay zero.
DenseGrid densify_project(const SparseVoxelLatent& slat, int target_resolution);

PatchGrid partition_patches(const DenseGrid& grid, int patch_side);

/// Injective partial matching between equal-size patch grids, maximizing
/// summed cosine similarity over pairs strictly above tau0. Zero-feature
/// patches are never matched; unmatched patches stay identity with
/// matched=false. Exact when 2G <= kExactAssignmentLimit, greedy beyond.
CorrespondenceMap dynamic_patch_correspondence(const PatchGrid& src, const PatchGrid& tgt,
                                               float tau0);

/// The greedy fallback used when 2G exceeds kExactAssignmentLimit.
CorrespondenceMap dynamic_patch_correspondence_greedy(const PatchGrid& src,
                                                      const PatchGrid& tgt, float tau0);

double matched_similarity(const PatchGrid& src, const PatchGrid& tgt,
                          const CorrespondenceMap& map);

/// Relocates per-patch token blocks of k and v: the block of target patch
/// map[p] lands at patch position p. Partial maps are completed to a
/// permutation (unclaimed patches stay in place where possible, leftovers
/// fill remaining slots in index order). Token r corresponds to grid cell r
/// under the x-major linearization; patch_side must divide the resolution.
std::pair<FeatureMatrix, FeatureMatrix> apply_permutation(const FeatureMatrix& k,
                                                          const FeatureMatrix& v,
                                                          const CorrespondenceMap& map,
                                                          const PatchGrid& patch_layout);

/// The completed cell-level permutation used by apply_permutation:
/// output token r = input token perm[r].
std::vector<int> cell_permutation(const CorrespondenceMap& map, const PatchGrid& patch_layout);

}  // namespace interp3d
