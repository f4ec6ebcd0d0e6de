#include "model/config.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "common/errors.hpp"

namespace lesion {

std::size_t ModelConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::floor(mlp_ratio * static_cast<double>(embed_dim)));
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid model config: " + msg); };
  if (image_height == 0 || image_width == 0 || channels == 0) fail("image dims must be positive");
  if (patch_size == 0) fail("patch_size must be positive");
  if (image_height % patch_size || image_width % patch_size)
    fail("image " + std::to_string(image_height) + "x" + std::to_string(image_width) +
         " is not divisible by patch_size " + std::to_string(patch_size));
  if (embed_dim == 0 || num_heads == 0) fail("embed_dim and num_heads must be positive");
  if (embed_dim % num_heads)
    fail("embed_dim " + std::to_string(embed_dim) + " is not divisible by num_heads " + std::to_string(num_heads));
  if (num_scales == 0) fail("num_scales must be >= 1");
  if (num_scales > 31) fail("num_scales too large");
  const std::size_t side = std::min(grid_rows(), grid_cols());
  if (pool_window(num_scales - 1) > side)
    fail("pooling window " + std::to_string(pool_window(num_scales - 1)) + " exceeds patch-grid side " +
         std::to_string(side));
  if (num_layers == 0) fail("num_layers must be >= 1");
  if (!(mlp_ratio > 0) || mlp_hidden() == 0) fail("mlp_ratio must give a positive hidden width");
  if (num_classes == 0) fail("num_classes must be >= 1");
}

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.image_height = 8;
  c.image_width = 8;
  c.channels = 3;
  c.patch_size = 4;
  c.embed_dim = 8;
  c.num_heads = 2;
  c.num_scales = 2;
  c.num_layers = 1;
  c.mlp_ratio = 2.0;
  c.num_classes = 3;
  c.seed = 7;
  return c;
}

}  // namespace lesion
