#include "interp3d/io_ply.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace interp3d {

namespace {

int to_byte(float v) {
    const float clamped = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return static_cast<int>(std::lround(clamped * 255.0f));
}

}  // namespace

void write_ply(const std::string& path, const ColoredVoxelAsset& asset) {
    asset.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "ply\n"
        << "format ascii 1.0\n"
        << "element vertex " << asset.positions.size() << "\n"
        << "property float x\n"
        << "property float y\n"
        << "property float z\n"
        << "property uchar red\n"
        << "property uchar green\n"
        << "property uchar blue\n"
        << "property uchar alpha\n"
        << "end_header\n";
    char line[128];
    for (size_t i = 0; i < asset.positions.size(); ++i) {
        std::snprintf(line, sizeof(line), "%d %d %d %d %d %d %d\n", asset.positions[i][0],
                      asset.positions[i][1], asset.positions[i][2], to_byte(asset.rgb[i][0]),
                      to_byte(asset.rgb[i][1]), to_byte(asset.rgb[i][2]),
                      to_byte(asset.opacity[i]));
        out << line;
    }
    if (!out) throw IoError("write failed: " + path);
}

ColoredVoxelAsset read_ply(const std::string& path, int resolution) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::string line;
    size_t vertex_count = 0;
    bool header_done = false;
    std::getline(in, line);
    if (line != "ply") throw IoError("not a PLY file: " + path);
    while (std::getline(in, line)) {
        if (line.rfind("element vertex ", 0) == 0) {
            vertex_count = static_cast<size_t>(std::stoull(line.substr(15)));
        } else if (line == "end_header") {
            header_done = true;
            break;
        }
    }
    if (!header_done) throw IoError("PLY header missing end_header: " + path);

    ColoredVoxelAsset asset;
    asset.resolution = resolution;
    asset.positions.resize(vertex_count);
    asset.rgb.resize(vertex_count);
    asset.opacity.resize(vertex_count);
    for (size_t i = 0; i < vertex_count; ++i) {
        float x, y, z;
        int r, g, b, a;
        if (!std::getline(in, line)) throw IoError("truncated PLY: " + path);
        std::istringstream row(line);
        if (!(row >> x >> y >> z >> r >> g >> b >> a)) {
            throw IoError("malformed PLY vertex row: " + path);
        }
        asset.positions[i] = {static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)),
                              static_cast<int>(std::lround(z))};
        asset.rgb[i] = {static_cast<float>(r) / 255.0f, static_cast<float>(g) / 255.0f,
                        static_cast<float>(b) / 255.0f};
        asset.opacity[i] = static_cast<float>(a) / 255.0f;
    }
    asset.validate();
    return asset;
}

}  // namespace interp3d
