#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "numerics/tape.hpp"

namespace lesion {

struct ClassWeights {
  std::vector<double> weights;
  std::vector<double> frequencies;
  double epsilon = 0;
};

// w_j = 1 / sqrt(f_j + eps).
ClassWeights class_weights(std::span<const double> frequencies, double epsilon);

// -(1/B) sum_i sum_j w_j y_ij log max(p_ij, 1e-12) with one-hot y.
Var weighted_cross_entropy(Var probs, std::span<const std::size_t> labels, const ClassWeights& weights);

enum class AttnMode {
  kFocusing,  // || A ⊙ (1 - M) ||_F : penalizes attention outside the lesion
  kLiteral,   // || A ⊙ M ||_F
};

AttnMode parse_attn_mode(std::string_view text);
std::string_view to_string(AttnMode mode);

// Batch mean of per-sample Frobenius norms. Samples without a mask contribute
// nothing and are left out of the mean; with no masks at all the result is 0.
Var attention_regularization(Tape& tape, std::span<const Var> focus_maps,
                             std::span<const std::optional<Tensor>> masks, AttnMode mode);

struct LossBreakdown {
  double l_ce = 0;
  double l_attn = 0;
  double lambda_attn = 0;
  double total = 0;
};

LossBreakdown total_loss(double l_ce, double l_attn, double lambda_attn);

}  // namespace lesion
