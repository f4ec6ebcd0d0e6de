#pragma once

#include <functional>
#include <span>
#include <vector>

#include "numerics/tape.hpp"

namespace lesion {

struct GradCheckReport {
  double max_rel_error = 0;
  std::size_t worst_input = 0;  // which tensor
  std::size_t worst_index = 0;  // flat index within it
  double analytic = 0;
  double numeric = 0;
  std::size_t coordinates = 0;
};

// Builds a scalar on the tape from variables bound to `inputs`.
using MultiScalarFn = std::function<Var(Tape&, std::span<const Var>)>;
using ScalarFn = std::function<Var(Tape&, Var)>;

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h against reverse-mode
// gradients, every coordinate of every input. Relative error per coordinate
// uses max(|analytic|, |numeric|, 1e-8) as denominator.
GradCheckReport finite_difference_check(const MultiScalarFn& f, std::vector<Tensor> inputs, Scalar h);
double finite_difference_check(const ScalarFn& f, const Tensor& x, Scalar h);

}  // namespace lesion
