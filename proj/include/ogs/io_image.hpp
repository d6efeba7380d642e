// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/image.hpp"

#include <string>

namespace ogs {

// 8-bit PNG; channels must be 1, 3, or 4
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

// float scanline EXR; channels must be 1 (Y), 3 (RGB), or 4 (RGBA)
void write_exr(const std::string& path, const Image& img);
Image read_exr(const std::string& path);

} // namespace ogs
