#pragma once

#include <string>

#include "interp3d/toyprior.hpp"

namespace interp3d {

/// ASCII PLY with per-vertex x,y,z (float) and red,green,blue,alpha (uchar).
/// Colors quantize to 8 bits; positions round-trip exactly.
void write_ply(const std::string& path, const ColoredVoxelAsset& asset);

/// Reads an asset written by write_ply. `resolution` restores the grid size
/// the PLY itself does not carry.
ColoredVoxelAsset read_ply(const std::string& path, int resolution);

}  // namespace interp3d
