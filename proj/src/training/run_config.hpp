#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "data/augment.hpp"
#include "losses/losses.hpp"
#include "model/config.hpp"

namespace lesion {

enum class LrSchedule { kConstant, kCosine };

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda_attn = 0.1;
  AttnMode attn_mode = AttnMode::kFocusing;
  double weight_epsilon = 1e-6;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;  // steps; 0 disables periodic evaluation
  double eval_fraction = 0.2;  // used by the CLI's seeded train/eval split
  AugmentPolicy augment{Transform::kHFlip, Transform::kVFlip};
  bool dynamic_weights = false;
  LrSchedule lr_schedule = LrSchedule::kConstant;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Model and training settings addressed by flat KEY=VALUE pairs. `seed`
// drives both weight init and the training streams; `model_seed` overrides
// the init seed alone.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  // Throws ConfigError listing valid keys for an unknown key.
  void set(std::string_view key, std::string_view value);
  void set_assignment(std::string_view key_equals_value);

  // Fully resolved `key=value` lines in a fixed order.
  std::string to_text() const;
  static RunConfig from_text(std::string_view text);

  static const std::vector<std::string>& keys();

  void validate() const {
    model.validate();
    train.validate();
  }
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace lesion
