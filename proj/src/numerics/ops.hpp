#pragma once

#include <span>

#include "numerics/tape.hpp"

// Differentiable tensor ops. All operands must live on the same tape.
// No implicit broadcasting: bias rows are expanded with repeat_rows().
namespace lesion::ops {

Var matmul(Var a, Var b);
Var transpose(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // Hadamard
Var scale(Var x, Scalar c);
Var mul_scalar(Var x, Var s);  // s is a single element

Var sum(Var x);  // -> 1x1
Var repeat_rows(Var row, std::size_t n);
Var reshape(Var x, Shape shape);

Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);

Var softmax_rows(Var x);
Var layer_norm(Var x, Var gain, Var bias, Scalar eps);
Var gelu(Var x);
Var log_clamped(Var x, Scalar floor);
Var sqrt(Var x);  // derivative taken as 0 where x == 0
Var reciprocal(Var x);

}  // namespace lesion::ops
