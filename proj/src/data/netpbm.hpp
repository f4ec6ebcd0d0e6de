#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "data/image.hpp"

namespace lesion {

// Binary 8-bit netpbm: P5 (gray, 1 channel) and P6 (color, 3 channels),
// maxval 255. Pixels scale to v/255. Comments between header tokens are
// skipped; exactly one whitespace byte separates maxval from the payload.
Image parse_netpbm(std::span<const std::uint8_t> bytes);
Image read_netpbm(const std::filesystem::path& path);

// Quantizes round(clamp(v, 0, 1) * 255). P5 for 1 channel, P6 for 3.
std::vector<std::uint8_t> encode_netpbm(const Image& image);
void write_netpbm(const std::filesystem::path& path, const Image& image);

}  // namespace lesion
