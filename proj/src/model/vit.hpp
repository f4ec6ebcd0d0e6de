#pragma once

#include <optional>
#include <vector>

#include "data/image.hpp"
#include "model/config.hpp"
#include "model/params.hpp"

namespace lesion {

// Attention maps of one forward pass. maps[layer][head][scale] holds the
// row-stochastic weights; scale 0 is (N+1)x(N+1), pooled scales have fewer
// columns. focus_map is the renormalized head-mean class-token -> patch row
// of the final layer at scale 0, shaped like the patch grid.
struct AttentionRecord {
  std::vector<std::vector<std::vector<Tensor>>> maps;
  Tensor focus_map;
};

// Patch order is row-major over the grid; within a patch values are ordered
// (row, col, channel), i.e. each patch is its own little HWC image.
Tensor patchify(const Image& image, const ModelConfig& config);
Image unpatchify(const Tensor& patches, const ModelConfig& config);

// Averaging matrix mapping the N+1 tokens to the 1 + pooled-grid tokens for
// zero-based scale index `scale` (window 2^scale, class token kept as is).
// Windows at a ragged grid edge average only the cells they cover.
Tensor pooling_matrix(const ModelConfig& config, std::size_t scale);

// Class token prepended, projection bias and positional encodings added.
Var embed(Var patches, const BoundParams& params, const ModelConfig& config);

// softmax(Q K^T / sqrt(d_k)) V. The softmaxed weights are copied into
// *weights when given.
Var attention(Var q, Var k, Var v, Tensor* weights = nullptr);

// Per-layer attention entries appended to `record` when given
// (record->maps.back() must be the slot for this layer).
Var multi_scale_attention(Var z, const LayerVars& layer, const ModelConfig& config,
                          std::vector<std::vector<Tensor>>* record = nullptr, Var* focus_row = nullptr);

// Plain multi-head attention without any scale weighting.
Var vanilla_multi_head_attention(Var z, Var wq, Var wk, Var wv, Var wo, std::size_t num_heads);

struct BlockOutput {
  Var out;
  Var attn_input;  // LN1(Z): the token features the attention reads
  Var focus_row;   // 1 x N head-mean class-token attention over patches, scale 0
};

// Pre-norm block: Z' = Z + MSA(LN(Z)); Z'' = Z' + MLP(LN(Z')).
BlockOutput encoder_block(Var z, const LayerVars& layer, const ModelConfig& config,
                          std::vector<std::vector<Tensor>>* record = nullptr);

struct ForwardResult {
  Var logits;     // 1 x K
  Var probs;      // 1 x K
  Var focus_map;  // grid_rows x grid_cols, sums to 1
  Var cam_features;  // (N+1) x D input features of the final block's attention
  AttentionRecord record;
};

ForwardResult forward(Tape& tape, const BoundParams& params, const ModelConfig& config, const Image& image,
                      bool keep_attention_maps = false);

class LesionViT {
 public:
  LesionViT() = default;
  explicit LesionViT(const ModelConfig& config);
  LesionViT(const ModelConfig& config, ModelParams params);

  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }

  // Gradient-free forward; returns class probabilities.
  std::vector<Scalar> predict(const Image& image) const;
  // Gradient-free forward with the attention record kept.
  AttentionRecord attention_record(const Image& image) const;

  void check_image(const Image& image) const;

 private:
  ModelConfig config_;
  ModelParams params_;
};

}  // namespace lesion
