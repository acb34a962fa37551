#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "interp3d/errors.hpp"

namespace interp3d {

/// Dense row-major float matrix. Rows are tokens, columns are channels.
struct FeatureMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;  // rows * cols, row-major

    FeatureMatrix() = default;
    FeatureMatrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0f) {
        if (r < 0 || c < 0) throw InvalidInputError("FeatureMatrix: negative shape");
    }

    float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    const float* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    float* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }

    bool same_shape(const FeatureMatrix& o) const { return rows == o.rows && cols == o.cols; }
    size_t size() const { return data.size(); }

    // Throws if any entry is NaN/Inf; `what` names the offending value.
    void ensure_finite(const std::string& what) const;
};

/// Dense N^3 voxel grid with C channels per cell.
/// Cell linearization is x-major: cell(x,y,z) = x*N^2 + y*N + z; channels are
/// contiguous within a cell.
struct DenseGrid {
    int resolution = 0;  // N
    int channels = 0;    // C
    std::vector<float> data;  // N^3 * C

    DenseGrid() = default;
    DenseGrid(int n, int c);

    size_t cell(int x, int y, int z) const {
        return (static_cast<size_t>(x) * resolution + y) * resolution + z;
    }
    float& at(int x, int y, int z, int c) { return data[cell(x, y, z) * channels + c]; }
    float at(int x, int y, int z, int c) const { return data[cell(x, y, z) * channels + c]; }
};

using VoxelPos = std::array<int, 3>;

/// Sparse structured latent: active voxel positions plus one feature row per voxel.
/// Positions are unique and sorted lexicographically.
struct SparseVoxelLatent {
    std::vector<VoxelPos> positions;
    FeatureMatrix features;  // |positions| x C
    int resolution = 0;

    void validate() const;
};

// Sorts and checks a position list in place (unique, in-range).
void normalize_positions(std::vector<VoxelPos>& positions, int resolution);

// ---------------------------------------------------------------------------
// I3DT tensor files: magic "I3DT", u32 LE version=1, u8 dtype, u8 ndim,
// ndim u64 LE dims, row-major little-endian payload.
// dtype codes: 0 = f32, 1 = i64, 2 = u8.
// ---------------------------------------------------------------------------

void save_tensor_f32(const std::string& path, const std::vector<uint64_t>& dims,
                     const float* values);
void save_tensor_i64(const std::string& path, const std::vector<uint64_t>& dims,
                     const int64_t* values);
void save_tensor_u8(const std::string& path, const std::vector<uint64_t>& dims,
                    const uint8_t* values);

struct TensorFile {
    uint8_t dtype = 0;
    std::vector<uint64_t> dims;
    std::vector<float> f32;
    std::vector<int64_t> i64;
    std::vector<uint8_t> u8;
};

TensorFile load_tensor(const std::string& path);

void save_matrix(const std::string& path, const FeatureMatrix& m);
FeatureMatrix load_matrix(const std::string& path);

}  // namespace interp3d
