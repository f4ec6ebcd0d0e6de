#pragma once

#include <cstdint>
#include <vector>

#include "data/sample.hpp"

namespace lesion {

// Class signatures: 0 dark disk, 1 ringed ellipse, 2 speckled ellipse.
// Backgrounds are bright skin tones (red channel > 0.7), lesion pixels have
// red < 0.66, so `red < kLesionRedThreshold` recovers the mask exactly.
inline constexpr double kLesionRedThreshold = 0.68;

struct SynthConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t num_classes = 3;
  std::vector<double> class_proportions{0.6, 0.3, 0.1};
  std::uint64_t seed = 0;
};

// Per-class counts by largest remainder (ties to the lower class index).
std::vector<std::size_t> class_quotas(std::size_t n, const std::vector<double>& proportions);

// Deterministic per seed; sample i draws from an rng seeded by (seed, i).
std::vector<Sample> synth_generate(std::size_t n, const SynthConfig& config);

}  // namespace lesion
