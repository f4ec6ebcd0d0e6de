#pragma once

#include <cstddef>

#include "model/vit.hpp"

namespace lesion {

struct GradCamResult {
  Tensor grid;       // grid_rows x grid_cols, values in [0, 1]
  Tensor upsampled;  // H x W, nearest-neighbour copy of the grid
  std::size_t argmax_row = 0;
  std::size_t argmax_col = 0;
};

// Token weights are mean_d(dlogit/dF ⊙ F) over the patch rows of F, the
// normalized features entering the final block's attention; negatives are
// clamped to zero and the map is min-max scaled (an all-zero map stays zero).
GradCamResult grad_cam(const LesionViT& model, const Image& image, std::size_t target_class);

// Rectify + min-max normalize raw token weights into [0, 1].
Tensor normalize_cam(const Tensor& raw);

// Nearest-neighbour upsampling of a patch-grid map to pixels.
Tensor upsample_nearest(const Tensor& grid, std::size_t patch_size);

}  // namespace lesion
