#include "numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "common/errors.hpp"

namespace lesion {
namespace {

Scalar evaluate(const MultiScalarFn& f, const std::vector<Tensor>& inputs) {
  Tape tape(false);
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(tape.constant(t));
  const Var out = f(tape, vars);
  if (out.value().numel() != 1) throw DimensionError("gradient check needs a scalar-valued function");
  return out.value()[0];
}

}  // namespace

GradCheckReport finite_difference_check(const MultiScalarFn& f, std::vector<Tensor> inputs, Scalar h) {
  if (!(h > 0)) throw ConfigError("finite-difference step must be positive");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.variable(t));
    const Var out = f(tape, vars);
    tape.backward(out);
    for (const Var& v : vars) analytic.push_back(v.grad());
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
      const Scalar original = inputs[k][i];
      inputs[k][i] = original + h;
      const Scalar plus = evaluate(f, inputs);
      inputs[k][i] = original - h;
      const Scalar minus = evaluate(f, inputs);
      inputs[k][i] = original;

      const double numeric = (static_cast<double>(plus) - static_cast<double>(minus)) / (2.0 * h);
      const double exact = analytic[k][i];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      const double rel = std::abs(exact - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_input = k;
        report.worst_index = i;
        report.analytic = exact;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

double finite_difference_check(const ScalarFn& f, const Tensor& x, Scalar h) {
  const MultiScalarFn wrapped = [&f](Tape& tape, std::span<const Var> vars) { return f(tape, vars[0]); };
  return finite_difference_check(wrapped, {x}, h).max_rel_error;
}

}  // namespace lesion
