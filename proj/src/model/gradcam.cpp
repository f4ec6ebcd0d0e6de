#include "model/gradcam.hpp"

#include <algorithm>

#include "common/errors.hpp"
#include "numerics/ops.hpp"

namespace lesion {

Tensor normalize_cam(const Tensor& raw) {
  Tensor out = raw;
  for (auto& v : out.data()) v = std::max(v, Scalar(0));
  const auto [lo_it, hi_it] = std::minmax_element(out.data().begin(), out.data().end());
  const Scalar lo = *lo_it, hi = *hi_it;
  if (hi <= 0) return Tensor::zeros(raw.shape());
  if (hi == lo) return Tensor::ones(raw.shape());
  for (auto& v : out.data()) v = (v - lo) / (hi - lo);
  return out;
}

Tensor upsample_nearest(const Tensor& grid, std::size_t patch_size) {
  const std::size_t gr = grid.rows(), gc = grid.cols();
  Tensor out({gr * patch_size, gc * patch_size});
  for (std::size_t y = 0; y < gr * patch_size; ++y)
    for (std::size_t x = 0; x < gc * patch_size; ++x) out.at(y, x) = grid.at(y / patch_size, x / patch_size);
  return out;
}

GradCamResult grad_cam(const LesionViT& model, const Image& image, std::size_t target_class) {
  const ModelConfig& config = model.config();
  if (target_class >= config.num_classes)
    throw ConfigError("class " + std::to_string(target_class) + " out of range [0, " +
                      std::to_string(config.num_classes) + ")");
  if (!model.params().all_finite()) throw NumericError("model parameters contain NaN/Inf");
  model.check_image(image);

  Tape tape;
  const BoundParams bound = bind_params(tape, model.params(), config);
  const ForwardResult fwd = forward(tape, bound, config, image);
  Tensor selector({1, config.num_classes});
  selector[target_class] = 1;
  const Var score = ops::sum(ops::mul(fwd.logits, tape.constant(std::move(selector))));
  tape.backward(score);

  const Tensor& features = fwd.cam_features.value();
  const Tensor& grads = fwd.cam_features.grad();
  const std::size_t n = config.num_patches(), d = config.embed_dim;
  Tensor raw({config.grid_rows(), config.grid_cols()});
  for (std::size_t i = 0; i < n; ++i) {
    Scalar acc = 0;
    for (std::size_t j = 0; j < d; ++j) acc += grads.at(i + 1, j) * features.at(i + 1, j);
    raw[i] = acc / static_cast<Scalar>(d);
  }

  GradCamResult result;
  result.grid = normalize_cam(raw);
  result.upsampled = upsample_nearest(result.grid, config.patch_size);
  const auto it = std::max_element(result.grid.data().begin(), result.grid.data().end());
  const auto idx = static_cast<std::size_t>(it - result.grid.data().begin());
  result.argmax_row = idx / config.grid_cols();
  result.argmax_col = idx % config.grid_cols();
  return result;
}

}  // namespace lesion
