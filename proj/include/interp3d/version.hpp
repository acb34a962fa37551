#pragma once

namespace interp3d {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace interp3d
