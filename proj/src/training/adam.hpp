#pragma once

#include <cstdint>
#include <vector>

#include "model/params.hpp"

namespace lesion {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ModelParams& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Bias-corrected Adam. Throws NumericError naming the parameter when a
// gradient is NaN/Inf; nothing is modified in that case.
void adam_step(ModelParams& params, const std::vector<Tensor>& grads, AdamState& state, const AdamConfig& config,
               double learning_rate);

}  // namespace lesion
