#include "data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "common/errors.hpp"
#include "numerics/random.hpp"

namespace lesion {

std::vector<std::size_t> class_quotas(std::size_t n, const std::vector<double>& proportions) {
  if (proportions.empty()) throw ConfigError("class proportions are empty");
  double total = 0;
  for (double p : proportions) {
    if (!(p >= 0)) throw ConfigError("class proportions must be nonnegative");
    total += p;
  }
  if (!(total > 0)) throw ConfigError("class proportions sum to zero");
  const std::size_t k = proportions.size();
  std::vector<std::size_t> counts(k);
  std::vector<double> remainder(k);
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const double exact = static_cast<double>(n) * proportions[j] / total;
    counts[j] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[j] = exact - static_cast<double>(counts[j]);
    assigned += counts[j];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % k]];
  return counts;
}

namespace {

struct Rgb {
  double r, g, b;
};

Sample make_sample(std::size_t index, std::size_t label, const SynthConfig& config) {
  Rng rng(mix_seed(config.seed, index));
  const std::size_t h = config.height, w = config.width;
  const double side = static_cast<double>(std::min(h, w));
  Sample sample;
  sample.label = label;
  sample.image = Image(h, w, 3);
  sample.mask = Image(h, w, 1);
  char id[32];
  std::snprintf(id, sizeof id, "synth_%05zu", index);
  sample.id = id;

  // Background: jittered skin tone plus smooth low-frequency shading.
  const Rgb base{rng.uniform(0.82, 0.88), rng.uniform(0.62, 0.68), rng.uniform(0.52, 0.58)};
  struct Wave {
    double fy, fx, phase, amp;
  };
  Wave waves[3];
  for (auto& wv : waves)
    wv = {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0, 2 * std::numbers::pi), rng.uniform(0.005, 0.015)};

  // Lesion geometry; the center sits on a pixel center so the support is never empty.
  const bool disk = label == 0;
  const double ra = disk ? rng.uniform(0.18, 0.28) * side : rng.uniform(0.18, 0.30) * side;
  const double rb = disk ? ra : rng.uniform(0.18, 0.30) * side;
  const double angle = disk ? 0.0 : rng.uniform(0, std::numbers::pi);
  const double reach = std::max(ra, rb);
  auto pick_center = [&](std::size_t extent) {
    const double lo = std::min(reach, static_cast<double>(extent) / 2);
    const double hi = std::max(lo, static_cast<double>(extent) - reach);
    return std::floor(rng.uniform(lo, hi)) + 0.5;
  };
  const double cy = std::clamp(pick_center(h), 0.5, static_cast<double>(h) - 0.5);
  const double cx = std::clamp(pick_center(w), 0.5, static_cast<double>(w) - 0.5);
  const double ca = std::cos(angle), sa = std::sin(angle);

  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double py = static_cast<double>(y) + 0.5, px = static_cast<double>(x) + 0.5;
      double shade = 0;
      for (const auto& wv : waves)
        shade += wv.amp * std::sin(2 * std::numbers::pi * (wv.fy * py / static_cast<double>(h) +
                                                          wv.fx * px / static_cast<double>(w)) + wv.phase);
      const double dy = py - cy, dx = px - cx;
      const double u = (dx * ca + dy * sa) / ra, v = (-dx * sa + dy * ca) / rb;
      const double radius = std::sqrt(u * u + v * v);
      const double jitter = rng.uniform(-0.02, 0.02);  // drawn for every pixel to keep streams aligned
      const double speckle = rng.uniform();

      Rgb color{base.r + shade, base.g + shade, base.b + shade};
      const bool inside = radius <= 1.0;
      if (inside) {
        switch (label % 3) {
          case 0:
            color = {0.22, 0.13, 0.09};
            break;
          case 1:
            color = radius > 0.62 ? Rgb{0.20, 0.11, 0.08} : Rgb{0.58, 0.30, 0.28};
            break;
          default:
            color = speckle < 0.4 ? Rgb{0.18, 0.10, 0.07} : Rgb{0.56, 0.42, 0.30};
            break;
        }
        color = {color.r + jitter, color.g + jitter, color.b + jitter};
      }
      sample.image.at(y, x, 0) = static_cast<Scalar>(std::clamp(color.r, 0.0, 1.0));
      sample.image.at(y, x, 1) = static_cast<Scalar>(std::clamp(color.g, 0.0, 1.0));
      sample.image.at(y, x, 2) = static_cast<Scalar>(std::clamp(color.b, 0.0, 1.0));
      sample.mask->at(y, x) = inside ? Scalar(1) : Scalar(0);
    }
  }
  return sample;
}

}  // namespace

std::vector<Sample> synth_generate(std::size_t n, const SynthConfig& config) {
  if (n == 0) throw ConfigError("synth_generate: n must be >= 1");
  if (config.height == 0 || config.width == 0) throw ConfigError("synth_generate: image dims must be positive");
  if (config.class_proportions.size() != config.num_classes)
    throw ConfigError("synth_generate: " + std::to_string(config.class_proportions.size()) + " proportions for " +
                      std::to_string(config.num_classes) + " classes");
  const auto quotas = class_quotas(n, config.class_proportions);
  std::vector<std::size_t> labels;
  for (std::size_t j = 0; j < quotas.size(); ++j) labels.insert(labels.end(), quotas[j], j);
  Rng rng(mix_seed(config.seed, 0xC1A55));
  rng.shuffle(std::span<std::size_t>(labels));

  std::vector<Sample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) samples.push_back(make_sample(i, labels[i], config));
  return samples;
}

}  // namespace lesion
