#include "losses/losses.hpp"

#include <cmath>

#include "common/errors.hpp"
#include "numerics/ops.hpp"

namespace lesion {

ClassWeights class_weights(std::span<const double> frequencies, double epsilon) {
  if (!(epsilon > 0)) throw ConfigError("class-weight epsilon must be positive");
  if (frequencies.empty()) throw ConfigError("class frequencies are empty");
  double total = 0;
  for (std::size_t j = 0; j < frequencies.size(); ++j) {
    if (!(frequencies[j] >= 0))
      throw ConfigError("class frequency " + std::to_string(j) + " is negative: " + std::to_string(frequencies[j]));
    total += frequencies[j];
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("class frequencies sum to " + std::to_string(total));
  ClassWeights cw;
  cw.epsilon = epsilon;
  cw.frequencies.assign(frequencies.begin(), frequencies.end());
  for (double f : frequencies) cw.weights.push_back(1.0 / std::sqrt(f + epsilon));
  return cw;
}

Var weighted_cross_entropy(Var probs, std::span<const std::size_t> labels, const ClassWeights& weights) {
  const std::size_t batch = probs.rows(), k = probs.cols();
  if (labels.size() != batch)
    throw DimensionError("weighted_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(batch) + " rows");
  if (weights.weights.size() != k)
    throw DimensionError("weighted_cross_entropy: " + std::to_string(weights.weights.size()) +
                         " class weights for " + std::to_string(k) + " classes");
  Tensor coeff({batch, k});
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] >= k)
      throw ConfigError("label " + std::to_string(labels[i]) + " out of range [0, " + std::to_string(k) + ")");
    coeff.at(i, labels[i]) = static_cast<Scalar>(weights.weights[labels[i]]);
  }
  Tape& tape = probs.tape();
  const Var logp = ops::log_clamped(probs, static_cast<Scalar>(1e-12));
  const Var weighted = ops::sum(ops::mul(logp, tape.constant(std::move(coeff))));
  return ops::scale(weighted, Scalar(-1) / static_cast<Scalar>(batch));
}

AttnMode parse_attn_mode(std::string_view text) {
  if (text == "focusing") return AttnMode::kFocusing;
  if (text == "literal") return AttnMode::kLiteral;
  throw ConfigError("attn_mode must be 'focusing' or 'literal', got '" + std::string(text) + "'");
}

std::string_view to_string(AttnMode mode) { return mode == AttnMode::kFocusing ? "focusing" : "literal"; }

Var attention_regularization(Tape& tape, std::span<const Var> focus_maps,
                             std::span<const std::optional<Tensor>> masks, AttnMode mode) {
  if (focus_maps.size() != masks.size())
    throw DimensionError("attention_regularization: " + std::to_string(focus_maps.size()) + " maps for " +
                         std::to_string(masks.size()) + " masks");
  std::vector<Var> norms;
  for (std::size_t i = 0; i < focus_maps.size(); ++i) {
    if (!masks[i]) continue;
    const Tensor& m = *masks[i];
    if (m.shape() != focus_maps[i].shape())
      throw DimensionError("attention_regularization: map " + shape_string(focus_maps[i].shape()) +
                           " vs mask " + shape_string(m.shape()));
    Tensor selector = m;
    if (mode == AttnMode::kFocusing)
      for (auto& v : selector.data()) v = Scalar(1) - v;
    const Var masked = ops::mul(focus_maps[i], tape.constant(std::move(selector)));
    norms.push_back(ops::sqrt(ops::sum(ops::mul(masked, masked))));
  }
  if (norms.empty()) return tape.constant(Tensor::scalar(0));
  Var acc = norms[0];
  for (std::size_t i = 1; i < norms.size(); ++i) acc = ops::add(acc, norms[i]);
  return ops::scale(acc, Scalar(1) / static_cast<Scalar>(norms.size()));
}

LossBreakdown total_loss(double l_ce, double l_attn, double lambda_attn) {
  if (!(lambda_attn >= 0)) throw ConfigError("lambda_attn must be >= 0");
  return {l_ce, l_attn, lambda_attn, l_ce + lambda_attn * l_attn};
}

}  // namespace lesion
