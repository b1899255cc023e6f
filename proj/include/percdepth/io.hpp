#pragma once

#include <filesystem>

#include "percdepth/tensor.hpp"

// Image files. RGB is 8-bit PNG with values in [0, 255]; depth is PFM.
// All readers return a single-sample tensor (n == 1).
namespace percdepth::io {

namespace fs = std::filesystem;

// Gray, RGB and RGBA/gray-alpha PNGs are accepted; alpha is dropped and 16-bit
// samples are reduced to 8 bits. Result has 1 or 3 channels.
Tensor read_png(const fs::path& path);
// 1 or 3 channels; values are rounded and clamped to [0, 255].
void write_png(const fs::path& path, const Tensor& image);

// "Pf" (1 channel) or "PF" (3 channels); negative scale means little-endian.
// Rows are stored bottom-up.
Tensor read_pfm(const fs::path& path);
void write_pfm(const fs::path& path, const Tensor& image);

}  // namespace percdepth::io
