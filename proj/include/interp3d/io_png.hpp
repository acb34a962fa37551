#pragma once

#include <string>
#include <vector>

#include "interp3d/metrics.hpp"

namespace interp3d {

/// Minimal PNG writer (8-bit RGB, stored-deflate zlib stream, no filtering).
void write_png(const std::string& path, int width, int height,
               const std::vector<float>& rgb);

/// Tiles rendered views into one image (row-major, white gutters) and writes it.
void write_view_grid_png(const std::string& path, const std::vector<RenderedView>& views,
                         int columns);

}  // namespace interp3d
