#pragma once

#include <cstddef>
#include <cstdint>

namespace lesion {

struct ModelConfig {
  std::size_t image_height = 32;
  std::size_t image_width = 32;
  std::size_t channels = 3;
  std::size_t patch_size = 4;
  std::size_t embed_dim = 32;
  std::size_t num_heads = 4;
  std::size_t num_scales = 2;
  std::size_t num_layers = 2;
  double mlp_ratio = 2.0;
  std::size_t num_classes = 3;
  std::uint64_t seed = 0;
  // Every scale attends to the unpooled K/V (the textual form of the fusion
  // formula); ablation only.
  bool literal_multiscale = false;

  std::size_t grid_rows() const { return image_height / patch_size; }
  std::size_t grid_cols() const { return image_width / patch_size; }
  std::size_t num_patches() const { return grid_rows() * grid_cols(); }
  std::size_t patch_values() const { return patch_size * patch_size * channels; }
  std::size_t head_dim() const { return embed_dim / num_heads; }
  std::size_t mlp_hidden() const;

  // Pooling window for zero-based scale index s: 2^s.
  static std::size_t pool_window(std::size_t s) { return std::size_t{1} << s; }

  // Throws ConfigError naming the violated constraint.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Tiny configuration used for full-model gradient checks.
ModelConfig tiny_model_config();

}  // namespace lesion
