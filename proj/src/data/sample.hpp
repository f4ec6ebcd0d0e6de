#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "data/image.hpp"
#include "numerics/tensor.hpp"

namespace lesion {

struct Sample {
  Image image;
  std::size_t label = 0;
  std::optional<Image> mask;  // 1 channel, values in {0, 1}
  std::string id;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Soft occupancy: each cell is the mean of its P x P mask block.
Tensor mask_to_patch_grid(const Image& mask, std::size_t patch_size);

// f_j = count_j / n. With k == 0 the class count is max(label) + 1.
std::vector<double> class_frequencies(std::span<const std::size_t> labels, std::size_t k = 0);
std::vector<double> class_frequencies(std::span<const Sample> samples, std::size_t k = 0);

// Seeded shuffle, then the first round(n * eval_fraction) samples go to eval.
std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(std::vector<Sample> samples, double eval_fraction,
                                                                  std::uint64_t seed);

// Nearest-neighbour resampling: source pixel floor(y * src_h / dst_h).
Image resize_nearest(const Image& image, std::size_t height, std::size_t width);

}  // namespace lesion
