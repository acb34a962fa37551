#include "interp3d/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace interp3d {

void FeatureMatrix::ensure_finite(const std::string& what) const {
    for (size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            throw InvalidInputError(what + ": non-finite entry at flat index " +
                                    std::to_string(i));
        }
    }
}

DenseGrid::DenseGrid(int n, int c) : resolution(n), channels(c) {
    if (n < 1) throw InvalidInputError("DenseGrid: resolution must be >= 1");
    if (c < 1) throw InvalidInputError("DenseGrid: channels must be >= 1");
    data.assign(static_cast<size_t>(n) * n * n * c, 0.0f);
}

void normalize_positions(std::vector<VoxelPos>& positions, int resolution) {
    for (const auto& p : positions) {
        for (int axis = 0; axis < 3; ++axis) {
            if (p[axis] < 0 || p[axis] >= resolution) {
                throw InvalidInputError("voxel position out of range for resolution " +
                                        std::to_string(resolution));
            }
        }
    }
    std::sort(positions.begin(), positions.end());
    auto dup = std::adjacent_find(positions.begin(), positions.end());
    if (dup != positions.end()) {
        throw InvalidInputError("duplicate voxel position");
    }
}

void SparseVoxelLatent::validate() const {
    if (features.rows != static_cast<int>(positions.size())) {
        throw InvalidInputError("SparseVoxelLatent: feature rows != position count");
    }
    auto sorted_unique = std::is_sorted(positions.begin(), positions.end()) &&
                         std::adjacent_find(positions.begin(), positions.end()) == positions.end();
    if (!sorted_unique) {
        throw InvalidInputError("SparseVoxelLatent: positions must be sorted and unique");
    }
    for (const auto& p : positions) {
        for (int axis = 0; axis < 3; ++axis) {
            if (p[axis] < 0 || p[axis] >= resolution) {
                throw InvalidInputError("SparseVoxelLatent: position out of range");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// I3DT io
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'I', '3', 'D', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ofstream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t get_u64(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

size_t element_count(const std::vector<uint64_t>& dims) {
    size_t n = 1;
    for (auto d : dims) n *= static_cast<size_t>(d);
    return n;
}

void write_header(std::ofstream& out, uint8_t dtype, const std::vector<uint64_t>& dims) {
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    out.put(static_cast<char>(dtype));
    out.put(static_cast<char>(dims.size()));
    for (auto d : dims) put_u64(out, d);
}

void save_payload(const std::string& path, uint8_t dtype, const std::vector<uint64_t>& dims,
                  const void* values, size_t elem_size) {
    if (dims.size() > 255) throw InvalidInputError("I3DT: too many dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_header(out, dtype, dims);
    const size_t n = element_count(dims);
    // Payload is stored little-endian; all supported platforms here are LE,
    // asserted at build time below.
    out.write(reinterpret_cast<const char*>(values),
              static_cast<std::streamsize>(n * elem_size));
    if (!out) throw IoError("write failed: " + path);
}

static_assert(std::endian::native == std::endian::little,
              "I3DT io assumes a little-endian host");

}  // namespace

void save_tensor_f32(const std::string& path, const std::vector<uint64_t>& dims,
                     const float* values) {
    save_payload(path, 0, dims, values, sizeof(float));
}

void save_tensor_i64(const std::string& path, const std::vector<uint64_t>& dims,
                     const int64_t* values) {
    save_payload(path, 1, dims, values, sizeof(int64_t));
}

void save_tensor_u8(const std::string& path, const std::vector<uint64_t>& dims,
                    const uint8_t* values) {
    save_payload(path, 2, dims, values, sizeof(uint8_t));
}

TensorFile load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("not an I3DT file: " + path);
    }
    const uint32_t version = get_u32(in);
    if (version != kVersion) {
        throw IoError("unsupported I3DT version " + std::to_string(version) + ": " + path);
    }
    TensorFile t;
    t.dtype = static_cast<uint8_t>(in.get());
    const int ndim = in.get();
    t.dims.resize(static_cast<size_t>(ndim));
    for (auto& d : t.dims) d = get_u64(in);
    const size_t n = element_count(t.dims);
    switch (t.dtype) {
        case 0:
            t.f32.resize(n);
            in.read(reinterpret_cast<char*>(t.f32.data()),
                    static_cast<std::streamsize>(n * sizeof(float)));
            break;
        case 1:
            t.i64.resize(n);
            in.read(reinterpret_cast<char*>(t.i64.data()),
                    static_cast<std::streamsize>(n * sizeof(int64_t)));
            break;
        case 2:
            t.u8.resize(n);
            in.read(reinterpret_cast<char*>(t.u8.data()),
                    static_cast<std::streamsize>(n * sizeof(uint8_t)));
            break;
        default:
            throw IoError("unknown I3DT dtype " + std::to_string(t.dtype) + ": " + path);
    }
    if (!in) throw IoError("truncated I3DT file: " + path);
    return t;
}

void save_matrix(const std::string& path, const FeatureMatrix& m) {
    save_tensor_f32(path, {static_cast<uint64_t>(m.rows), static_cast<uint64_t>(m.cols)},
                    m.data.data());
}

FeatureMatrix load_matrix(const std::string& path) {
    TensorFile t = load_tensor(path);
    if (t.dtype != 0 || t.dims.size() != 2) {
        throw IoError("expected a rank-2 f32 tensor: " + path);
    }
    FeatureMatrix m(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    m.data = std::move(t.f32);
    return m;
}

}  // namespace interp3d
