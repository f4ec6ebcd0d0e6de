#include "training/adam.hpp"

#include <cmath>

#include "common/errors.hpp"

namespace lesion {

AdamState AdamState::zeros_like(const ModelParams& params) {
  AdamState state;
  for (const auto& p : params) {
    state.first_moment.push_back(Tensor::zeros(p.value.shape()));
    state.second_moment.push_back(Tensor::zeros(p.value.shape()));
  }
  return state;
}

void adam_step(ModelParams& params, const std::vector<Tensor>& grads, AdamState& state, const AdamConfig& config,
               double learning_rate) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size())
    throw DimensionError("adam_step: parameter, gradient and moment counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape())
      throw DimensionError("adam_step: gradient " + shape_string(grads[i].shape()) + " for parameter '" +
                           params[i].name + "' " + shape_string(params[i].value.shape()));
    if (!grads[i].all_finite()) throw NumericError("non-finite gradient for parameter '" + params[i].name + "'");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(config.beta1, t);
  const double correct2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i].value;
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      const double gj = g[j];
      const double mj = config.beta1 * m[j] + (1.0 - config.beta1) * gj;
      const double vj = config.beta2 * v[j] + (1.0 - config.beta2) * gj * gj;
      m[j] = static_cast<Scalar>(mj);
      v[j] = static_cast<Scalar>(vj);
      const double m_hat = mj / correct1;
      const double v_hat = vj / correct2;
      p[j] = static_cast<Scalar>(p[j] - learning_rate * m_hat / (std::sqrt(v_hat) + config.eps));
    }
  }
  if (!params.all_finite()) throw NumericError("parameters became non-finite after an optimizer step");
}

}  // namespace lesion
