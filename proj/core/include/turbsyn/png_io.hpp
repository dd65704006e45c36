#pragma once

#include <filesystem>

#include "turbsyn/image.hpp"

namespace turbsyn {

// 8- or 16-bit grayscale/RGB PNG; values map to [0, 1] floats. Alpha is
// dropped on read. Writing is deterministic (fixed zlib settings, no
// ancillary chunks), so equal images produce byte-equal files.
Image read_png(const std::filesystem::path& file);
void write_png(const std::filesystem::path& file, const Image& img,
               int bit_depth = 8);

}  // namespace turbsyn
