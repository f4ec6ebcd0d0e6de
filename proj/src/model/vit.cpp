#include "model/vit.hpp"

#include <cmath>

#include "common/errors.hpp"
#include "numerics/ops.hpp"

namespace lesion {

Tensor patchify(const Image& image, const ModelConfig& config) {
  if (image.height != config.image_height || image.width != config.image_width ||
      image.channels != config.channels)
    throw DimensionError("image is " + image.dims() + " but the model expects " +
                         std::to_string(config.image_height) + "x" + std::to_string(config.image_width) + "x" +
                         std::to_string(config.channels));
  if (config.patch_size == 0 || image.height % config.patch_size || image.width % config.patch_size)
    throw DimensionError("image " + image.dims() + " is not divisible into " + std::to_string(config.patch_size) +
                         "-pixel patches");
  const std::size_t p = config.patch_size, c = image.channels;
  const std::size_t gr = image.height / p, gc = image.width / p;
  Tensor out({gr * gc, p * p * c});
  std::size_t k = 0;
  for (std::size_t pr = 0; pr < gr; ++pr)
    for (std::size_t pc = 0; pc < gc; ++pc)
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x)
          for (std::size_t ch = 0; ch < c; ++ch) out[k++] = image.at(pr * p + y, pc * p + x, ch);
  return out;
}

Image unpatchify(const Tensor& patches, const ModelConfig& config) {
  const std::size_t p = config.patch_size, c = config.channels;
  const std::size_t gr = config.grid_rows(), gc = config.grid_cols();
  if (patches.rows() != gr * gc || patches.cols() != p * p * c)
    throw DimensionError("patch array " + shape_string(patches.shape()) + " does not match the config grid");
  Image image(config.image_height, config.image_width, c);
  std::size_t k = 0;
  for (std::size_t pr = 0; pr < gr; ++pr)
    for (std::size_t pc = 0; pc < gc; ++pc)
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x)
          for (std::size_t ch = 0; ch < c; ++ch) image.at(pr * p + y, pc * p + x, ch) = patches[k++];
  return image;
}

Tensor pooling_matrix(const ModelConfig& config, std::size_t scale) {
  const std::size_t gr = config.grid_rows(), gc = config.grid_cols();
  const std::size_t w = ModelConfig::pool_window(scale);
  if (w > std::min(gr, gc))
    throw ConfigError("pooling window " + std::to_string(w) + " exceeds patch-grid side " +
                      std::to_string(std::min(gr, gc)));
  const std::size_t pr_count = (gr + w - 1) / w, pc_count = (gc + w - 1) / w;
  const std::size_t n = gr * gc;
  Tensor pool({1 + pr_count * pc_count, 1 + n});
  pool.at(0, 0) = 1;
  for (std::size_t pr = 0; pr < pr_count; ++pr) {
    for (std::size_t pc = 0; pc < pc_count; ++pc) {
      const std::size_t r0 = pr * w, r1 = std::min(gr, r0 + w);
      const std::size_t c0 = pc * w, c1 = std::min(gc, c0 + w);
      const Scalar weight = Scalar(1) / static_cast<Scalar>((r1 - r0) * (c1 - c0));
      const std::size_t row = 1 + pr * pc_count + pc;
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) pool.at(row, 1 + r * gc + c) = weight;
    }
  }
  return pool;
}

Var embed(Var patches, const BoundParams& params, const ModelConfig& config) {
  if (patches.rows() != config.num_patches())
    throw DimensionError("embed: expected " + std::to_string(config.num_patches()) + " patches, got " +
                         std::to_string(patches.rows()));
  Var tokens = ops::matmul(patches, params.patch_weight);
  tokens = ops::add(tokens, ops::repeat_rows(params.patch_bias, tokens.rows()));
  const Var rows[] = {params.cls_token, tokens};
  return ops::add(ops::concat_rows(rows), params.pos_embed);
}

Var attention(Var q, Var k, Var v, Tensor* weights) {
  if (q.cols() != k.cols())
    throw DimensionError("attention: query width " + shape_string(q.shape()) + " differs from key width " +
                         shape_string(k.shape()));
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));
  const Var scores = ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt);
  const Var probs = ops::softmax_rows(scores);
  if (weights) *weights = probs.value();
  return ops::matmul(probs, v);
}

namespace {

// Head-mean of the class-token row over patch columns, renormalized to sum 1.
Var focus_from_rows(std::span<const Var> head_probs, std::size_t num_heads) {
  Var acc = ops::slice_cols(ops::slice_rows(head_probs[0], 0, 1), 1, head_probs[0].cols() - 1);
  for (std::size_t h = 1; h < head_probs.size(); ++h)
    acc = ops::add(acc, ops::slice_cols(ops::slice_rows(head_probs[h], 0, 1), 1, head_probs[h].cols() - 1));
  const Var mean = ops::scale(acc, Scalar(1) / static_cast<Scalar>(num_heads));
  return ops::mul_scalar(mean, ops::reciprocal(ops::sum(mean)));
}

Var scaled_scores_softmax(Var q, Var k) {
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));
  return ops::softmax_rows(ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt));
}

}  // namespace

Var multi_scale_attention(Var z, const LayerVars& layer, const ModelConfig& config,
                          std::vector<std::vector<Tensor>>* record, Var* focus_row) {
  config.validate();
  const std::size_t heads = config.num_heads, dk = config.head_dim(), scales = config.num_scales;
  if (z.rows() != config.num_patches() + 1 || z.cols() != config.embed_dim)
    throw DimensionError("multi_scale_attention: tokens " + shape_string(z.shape()) + " do not match config");
  if (layer.scale_logits.value().numel() != scales)
    throw DimensionError("scale logits " + shape_string(layer.scale_logits.shape()) + " do not match " +
                         std::to_string(scales) + " scales");
  Tape& tape = z.tape();

  const Var q = ops::matmul(z, layer.wq);
  const Var k = ops::matmul(z, layer.wk);
  const Var v = ops::matmul(z, layer.wv);
  const Var scale_weights = ops::softmax_rows(ops::reshape(layer.scale_logits, {1, scales}));

  std::vector<Var> pooled_k{k}, pooled_v{v};
  for (std::size_t s = 1; s < scales; ++s) {
    if (config.literal_multiscale) {
      pooled_k.push_back(k);
      pooled_v.push_back(v);
    } else {
      const Var pool = tape.constant(pooling_matrix(config, s));
      pooled_k.push_back(ops::matmul(pool, k));
      pooled_v.push_back(ops::matmul(pool, v));
    }
  }

  if (record) record->assign(heads, {});
  std::vector<Var> head_outputs, head_probs_s0;
  for (std::size_t h = 0; h < heads; ++h) {
    const Var qh = ops::slice_cols(q, h * dk, dk);
    Var fused;
    for (std::size_t s = 0; s < scales; ++s) {
      const Var probs = scaled_scores_softmax(qh, ops::slice_cols(pooled_k[s], h * dk, dk));
      if (record) (*record)[h].push_back(probs.value());
      if (s == 0) head_probs_s0.push_back(probs);
      const Var out = ops::matmul(probs, ops::slice_cols(pooled_v[s], h * dk, dk));
      const Var weighted = ops::mul_scalar(out, ops::slice_cols(scale_weights, s, 1));
      fused = s == 0 ? weighted : ops::add(fused, weighted);
    }
    head_outputs.push_back(fused);
  }
  if (focus_row) *focus_row = focus_from_rows(head_probs_s0, heads);
  return ops::matmul(ops::concat_cols(head_outputs), layer.wo);
}

Var vanilla_multi_head_attention(Var z, Var wq, Var wk, Var wv, Var wo, std::size_t num_heads) {
  const std::size_t d = wq.cols();
  if (num_heads == 0 || d % num_heads) throw ConfigError("head count must divide the model width");
  const std::size_t dk = d / num_heads;
  const Var q = ops::matmul(z, wq);
  const Var k = ops::matmul(z, wk);
  const Var v = ops::matmul(z, wv);
  std::vector<Var> heads;
  for (std::size_t h = 0; h < num_heads; ++h)
    heads.push_back(attention(ops::slice_cols(q, h * dk, dk), ops::slice_cols(k, h * dk, dk),
                              ops::slice_cols(v, h * dk, dk)));
  return ops::matmul(ops::concat_cols(heads), wo);
}

namespace {
constexpr Scalar kNormEps = static_cast<Scalar>(1e-5);
}

BlockOutput encoder_block(Var z, const LayerVars& layer, const ModelConfig& config,
                          std::vector<std::vector<Tensor>>* record) {
  BlockOutput result;
  result.attn_input = ops::layer_norm(z, layer.norm1_gain, layer.norm1_bias, kNormEps);
  const Var attended = multi_scale_attention(result.attn_input, layer, config, record, &result.focus_row);
  const Var mid = ops::add(z, attended);

  const Var normed = ops::layer_norm(mid, layer.norm2_gain, layer.norm2_bias, kNormEps);
  Var hidden = ops::matmul(normed, layer.fc1_weight);
  hidden = ops::gelu(ops::add(hidden, ops::repeat_rows(layer.fc1_bias, hidden.rows())));
  Var projected = ops::matmul(hidden, layer.fc2_weight);
  projected = ops::add(projected, ops::repeat_rows(layer.fc2_bias, projected.rows()));
  result.out = ops::add(mid, projected);
  return result;
}

ForwardResult forward(Tape& tape, const BoundParams& params, const ModelConfig& config, const Image& image,
                      bool keep_attention_maps) {
  ForwardResult result;
  Var z = embed(tape.constant(patchify(image, config)), params, config);
  Var last_focus;
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    std::vector<std::vector<Tensor>>* slot = nullptr;
    if (keep_attention_maps) slot = &result.record.maps.emplace_back();
    const BlockOutput block = encoder_block(z, params.layers[l], config, slot);
    z = block.out;
    last_focus = block.focus_row;
    result.cam_features = block.attn_input;
  }
  result.focus_map = ops::reshape(last_focus, {config.grid_rows(), config.grid_cols()});
  result.record.focus_map = result.focus_map.value();

  const Var normed = ops::layer_norm(z, params.norm_gain, params.norm_bias, kNormEps);
  const Var cls = ops::slice_rows(normed, 0, 1);
  result.logits = ops::add(ops::matmul(cls, params.head_weight), params.head_bias);
  result.probs = ops::softmax_rows(result.logits);
  return result;
}

LesionViT::LesionViT(const ModelConfig& config) : config_(config), params_(ModelParams::initialize(config)) {}

LesionViT::LesionViT(const ModelConfig& config, ModelParams params) : config_(config), params_(std::move(params)) {
  config_.validate();
  const ModelParams layout = ModelParams::zeros_like(config_);
  if (layout.size() != params_.size()) throw DimensionError("parameter count does not match the model config");
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i].name != params_[i].name || layout[i].value.shape() != params_[i].value.shape())
      throw DimensionError("parameter '" + params_[i].name + "' " + shape_string(params_[i].value.shape()) +
                           " does not match expected '" + layout[i].name + "' " +
                           shape_string(layout[i].value.shape()));
}

void LesionViT::check_image(const Image& image) const {
  if (image.height != config_.image_height || image.width != config_.image_width ||
      image.channels != config_.channels)
    throw DimensionError("image is " + image.dims() + " but the model expects " +
                         std::to_string(config_.image_height) + "x" + std::to_string(config_.image_width) + "x" +
                         std::to_string(config_.channels));
}

std::vector<Scalar> LesionViT::predict(const Image& image) const {
  check_image(image);
  Tape tape(false);
  const BoundParams bound = bind_params(tape, params_, config_);
  const ForwardResult result = forward(tape, bound, config_, image);
  const auto data = result.probs.value().data();
  return {data.begin(), data.end()};
}

AttentionRecord LesionViT::attention_record(const Image& image) const {
  check_image(image);
  Tape tape(false);
  const BoundParams bound = bind_params(tape, params_, config_);
  return forward(tape, bound, config_, image, true).record;
}

}  // namespace lesion
