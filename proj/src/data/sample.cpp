#include "data/sample.hpp"

#include <algorithm>
#include <cmath>

#include "common/errors.hpp"
#include "numerics/random.hpp"

namespace lesion {

Tensor mask_to_patch_grid(const Image& mask, std::size_t patch_size) {
  if (mask.channels != 1) throw DimensionError("mask must have one channel, got " + mask.dims());
  if (patch_size == 0 || mask.height % patch_size || mask.width % patch_size)
    throw DimensionError("mask " + mask.dims() + " is not divisible by patch size " + std::to_string(patch_size));
  const std::size_t gr = mask.height / patch_size, gc = mask.width / patch_size;
  Tensor grid({gr, gc});
  const Scalar area = static_cast<Scalar>(patch_size * patch_size);
  for (std::size_t r = 0; r < gr; ++r) {
    for (std::size_t c = 0; c < gc; ++c) {
      Scalar acc = 0;
      for (std::size_t y = 0; y < patch_size; ++y)
        for (std::size_t x = 0; x < patch_size; ++x) acc += mask.at(r * patch_size + y, c * patch_size + x);
      grid.at(r, c) = acc / area;
    }
  }
  return grid;
}

std::vector<double> class_frequencies(std::span<const std::size_t> labels, std::size_t k) {
  if (labels.empty()) throw ConfigError("class_frequencies: empty label list");
  if (k == 0) k = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::size_t> counts(k, 0);
  for (auto label : labels) {
    if (label >= k) throw ConfigError("label " + std::to_string(label) + " out of range [0, " + std::to_string(k) + ")");
    ++counts[label];
  }
  std::vector<double> freqs(k);
  for (std::size_t j = 0; j < k; ++j) freqs[j] = static_cast<double>(counts[j]) / static_cast<double>(labels.size());
  return freqs;
}

std::vector<double> class_frequencies(std::span<const Sample> samples, std::size_t k) {
  std::vector<std::size_t> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.label);
  return class_frequencies(labels, k);
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(std::vector<Sample> samples, double eval_fraction,
                                                                  std::uint64_t seed) {
  if (!(eval_fraction >= 0 && eval_fraction < 1)) throw ConfigError("eval_fraction must be in [0, 1)");
  Rng rng(mix_seed(seed, 0x5B11));
  rng.shuffle(std::span<Sample>(samples));
  const auto n_eval = static_cast<std::size_t>(std::llround(static_cast<double>(samples.size()) * eval_fraction));
  std::vector<Sample> eval(std::make_move_iterator(samples.begin()),
                           std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_eval)));
  std::vector<Sample> train(std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_eval)),
                            std::make_move_iterator(samples.end()));
  return {std::move(train), std::move(eval)};
}

Image resize_nearest(const Image& image, std::size_t height, std::size_t width) {
  if (image.height == height && image.width == width) return image;
  Image out(height, width, image.channels);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = y * image.height / height;
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = x * image.width / width;
      for (std::size_t c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(sy, sx, c);
    }
  }
  return out;
}

}  // namespace lesion
