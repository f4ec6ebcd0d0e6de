#pragma once

#include <string>
#include <vector>

#include "model/config.hpp"
#include "numerics/tape.hpp"

namespace lesion {

struct NamedTensor {
  std::string name;
  Tensor value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// All learnable arrays, in a fixed order that is also the checkpoint order.
// Weight matrices are stored input-major (fan_in x fan_out), so a layer is x * W.
class ModelParams {
 public:
  ModelParams() = default;

  // Seeded init: weights uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)); biases,
  // scale logits and norm biases zero; norm gains one; class token and
  // positional encodings uniform(-0.02, 0.02).
  static ModelParams initialize(const ModelConfig& config);

  // Zero-filled arrays with the right names and shapes.
  static ModelParams zeros_like(const ModelConfig& config);

  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const;
  NamedTensor& operator[](std::size_t i) { return entries_[i]; }
  const NamedTensor& operator[](std::size_t i) const { return entries_[i]; }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::size_t index_of(const std::string& name) const;
  Tensor& get(const std::string& name) { return entries_[index_of(name)].value; }
  const Tensor& get(const std::string& name) const { return entries_[index_of(name)].value; }

  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::vector<NamedTensor> entries_;
};

// Parameters bound as tape variables for one forward pass.
struct LayerVars {
  Var norm1_gain, norm1_bias;
  Var wq, wk, wv, wo;
  Var scale_logits;  // 1 x S
  Var norm2_gain, norm2_bias;
  Var fc1_weight, fc1_bias, fc2_weight, fc2_bias;
};

struct BoundParams {
  std::vector<Var> all;  // same order as ModelParams
  Var patch_weight, patch_bias, pos_embed, cls_token;
  std::vector<LayerVars> layers;
  Var norm_gain, norm_bias;
  Var head_weight, head_bias;
};

// Binds every parameter onto the tape: as variables when the tape records
// gradients, as constants otherwise.
BoundParams bind_params(Tape& tape, const ModelParams& params, const ModelConfig& config);
// Same layout over already-bound variables (ModelParams order).
BoundParams bind_params(std::vector<Var> vars, const ModelConfig& config);

}  // namespace lesion
