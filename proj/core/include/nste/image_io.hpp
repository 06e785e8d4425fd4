#pragma once

#include "nste/image.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace nste {

/// Reads an 8-bit PNG (gray, RGB or RGBA; alpha dropped) into [0, 1] by /255.
ImagePlane read_png(const std::filesystem::path& path);
/// Writes an 8-bit RGB PNG; values quantized with round(v * 255) after clamping.
void write_png(const std::filesystem::path& path, const ImagePlane& img);

/// round(clamp(v) * 255) / 255, the exact round trip through 8-bit storage.
ImagePlane quantize_8bit(const ImagePlane& img);
std::uint8_t to_byte(double v);

}  // namespace nste
