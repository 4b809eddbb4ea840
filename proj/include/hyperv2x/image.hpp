#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hyperv2x/tensor.hpp"

namespace hyperv2x::image {

/// Writes an 8-bit grayscale PNG. `pixels` is row-major, h*w bytes.
void write_gray_png(const std::filesystem::path& path, std::int64_t h, std::int64_t w,
                    const std::vector<std::uint8_t>& pixels);

/// Linearly rescales a real-valued map to [0,255] and writes it as a PNG.
/// Returns the (min, max) used for scaling so callers can record them in a
/// sidecar; a constant map scales to 0 with min == max.
std::pair<double, double> write_scaled_png(const std::filesystem::path& path, const Tensor& map2d);

/// Class-id grid rendered with a fixed 255/num_classes step so images from
/// different scenes are comparable.
void write_classmap_png(const std::filesystem::path& path, const GridI& grid, int num_classes);

}  // namespace hyperv2x::image
