#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "numerics/scalar.hpp"

namespace lesion {

// Interleaved row-major H x W x C pixels, nominally in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<Scalar> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, Scalar fill = 0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  Scalar& at(std::size_t y, std::size_t x, std::size_t ch = 0) { return pixels[(y * width + x) * channels + ch]; }
  Scalar at(std::size_t y, std::size_t x, std::size_t ch = 0) const { return pixels[(y * width + x) * channels + ch]; }

  std::string dims() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
  }

  friend bool operator==(const Image&, const Image&) = default;
};

}  // namespace lesion
