#include "numerics/ops.hpp"

#include <cmath>
#include <numbers>

#include "common/errors.hpp"

namespace lesion::ops {
namespace {

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands live on different tapes");
  return a.tape();
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

// out[m x n] += a[m x k] * b[k x n]
void gemm_nn(const Scalar* a, const Scalar* b, Scalar* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    Scalar* row = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Scalar av = a[i * k + p];
      const Scalar* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

// out[m x k] += a[m x n] * b[k x n]^T
void gemm_nt(const Scalar* a, const Scalar* b, Scalar* out, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      Scalar acc = 0;
      const Scalar* arow = a + i * n;
      const Scalar* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      out[i * k + p] += acc;
    }
  }
}

// out[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const Scalar* a, const Scalar* b, Scalar* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const Scalar* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Scalar av = a[i * k + p];
      Scalar* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  Tensor out({m, n});
  gemm_nn(a.value().data().data(), b.value().data().data(), out.data().data(), m, k, n);
  const auto ia = a.id(), ib = b.id();
  return tape.record("matmul", std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia))
      gemm_nt(g.data().data(), t.value(ib).data().data(), t.grad_slot(ia).data().data(), m, n, k);
    if (t.requires_grad(ib))
      gemm_tn(t.value(ia).data().data(), g.data().data(), t.grad_slot(ib).data().data(), m, k, n);
  });
}

Var transpose(Var x) {
  const std::size_t r = x.rows(), c = x.cols();
  const Tensor& v = x.value();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = v.at(i, j);
  const auto ix = x.id();
  return x.tape().record("transpose", std::move(out), {ix}, [ix, r, c](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_slot(ix);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx.at(i, j) += g.at(j, i);
  });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape("add", a, b);
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  const auto ia = a.id(), ib = b.id();
  return tape.record("add", std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
    for (auto id : {ia, ib}) {
      if (!t.requires_grad(id)) continue;
      Tensor& gi = t.grad_slot(id);
      for (std::size_t i = 0; i < g.numel(); ++i) gi[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  const auto ia = a.id(), ib = b.id();
  return tape.record("sub", std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_slot(ia);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  const auto ia = a.id(), ib = b.id();
  return tape.record("mul", std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_slot(ia);
      const Tensor& bv = t.value(ib);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_slot(ib);
      const Tensor& av = t.value(ia);
      for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var x, Scalar c) {
  Tensor out = x.value();
  for (auto& v : out.data()) v *= c;
  const auto ix = x.id();
  return x.tape().record("scale", std::move(out), {ix}, [ix, c](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_slot(ix);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * c;
  });
}

Var mul_scalar(Var x, Var s) {
  Tape& tape = same_tape(x, s);
  if (s.value().numel() != 1)
    throw DimensionError("mul_scalar: expected a single-element factor, got " + shape_string(s.shape()));
  const Scalar c = s.value()[0];
  Tensor out = x.value();
  for (auto& v : out.data()) v *= c;
  const auto ix = x.id(), is = s.id();
  return tape.record("mul_scalar", std::move(out), {ix, is}, [ix, is](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(ix);
    if (t.requires_grad(ix)) {
      const Scalar c = t.value(is)[0];
      Tensor& gx = t.grad_slot(ix);
      for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * c;
    }
    if (t.requires_grad(is)) {
      Scalar acc = 0;
      for (std::size_t i = 0; i < g.numel(); ++i) acc += g[i] * xv[i];
      t.grad_slot(is)[0] += acc;
    }
  });
}

Var sum(Var x) {
  Scalar acc = 0;
  for (auto v : x.value().data()) acc += v;
  const auto ix = x.id();
  return x.tape().record("sum", Tensor::scalar(acc), {ix}, [ix](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_slot(ix);
    for (auto& v : gx.data()) v += g[0];
  });
}

Var repeat_rows(Var row, std::size_t n) {
  const Tensor& v = row.value();
  if (v.rows() != 1) throw DimensionError("repeat_rows: expected a single row, got " + shape_string(v.shape()));
  const std::size_t d = v.cols();
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = v[j];
  const auto ir = row.id();
  return row.tape().record("repeat_rows", std::move(out), {ir}, [ir, n, d](Tape& t, const Tensor& g) {
    Tensor& gr = t.grad_slot(ir);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) gr[j] += g[i * d + j];
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const auto ix = x.id();
  return x.tape().record("reshape", std::move(out), {ix}, [ix](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_slot(ix);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const Tensor& v = x.value();
  const std::size_t r = v.rows(), c = v.cols();
  if (count == 0 || begin + count > r)
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(v.shape()));
  std::vector<Scalar> data(v.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                           v.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * c));
  const auto ix = x.id();
  return x.tape().record("slice_rows", Tensor({count, c}, std::move(data)), {ix},
                         [ix, begin, c](Tape& t, const Tensor& g) {
                           Tensor& gx = t.grad_slot(ix);
                           for (std::size_t i = 0; i < g.numel(); ++i) gx[begin * c + i] += g[i];
                         });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& v = x.value();
  const std::size_t r = v.rows(), c = v.cols();
  if (count == 0 || begin + count > c)
    throw DimensionError("slice_cols: cols [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(v.shape()));
  Tensor out({r, count});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out.at(i, j) = v.at(i, begin + j);
  const auto ix = x.id();
  return x.tape().record("slice_cols", std::move(out), {ix}, [ix, begin, r, c, count](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_slot(ix);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) gx[i * c + begin + j] += g[i * count + j];
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no operands");
  Tape& tape = parts[0].tape();
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    if (p.cols() != c)
      throw DimensionError("concat_rows: column mismatch " + shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    total += p.rows();
    ids.push_back(p.id());
  }
  std::vector<Scalar> data;
  data.reserve(total * c);
  for (const Var& p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  return tape.record("concat_rows", Tensor({total, c}, std::move(data)), ids, [ids](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (auto id : ids) {
      const std::size_t n = t.value(id).numel();
      if (t.requires_grad(id)) {
        Tensor& gi = t.grad_slot(id);
        for (std::size_t i = 0; i < n; ++i) gi[i] += g[offset + i];
      }
      offset += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  Tape& tape = parts[0].tape();
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    if (p.rows() != r)
      throw DimensionError("concat_cols: row mismatch " + shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    total += p.cols();
    ids.push_back(p.id());
  }
  Tensor out({r, total});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    const std::size_t c = v.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out.at(i, offset + j) = v.at(i, j);
    offset += c;
  }
  return tape.record("concat_cols", std::move(out), ids, [ids, r, total](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (auto id : ids) {
      const std::size_t c = t.value(id).cols();
      if (t.requires_grad(id)) {
        Tensor& gi = t.grad_slot(id);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gi[i * c + j] += g[i * total + offset + j];
      }
      offset += c;
    }
  });
}

Var softmax_rows(Var x) {
  const Tensor& v = x.value();
  const std::size_t r = v.rows(), c = v.cols();
  Tensor out({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    Scalar mx = v.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, v.at(i, j));
    Scalar denom = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const Scalar e = std::exp(v.at(i, j) - mx);
      out.at(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= denom;
  }
  if (v.rank() == 1) out = out.reshaped(v.shape());
  const auto ix = x.id();
  const std::size_t out_id = x.tape().size();
  return x.tape().record("softmax_rows", std::move(out), {ix}, [ix, out_id, r, c](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(out_id);
    Tensor& gx = t.grad_slot(ix);
    for (std::size_t i = 0; i < r; ++i) {
      Scalar dot = 0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, Scalar eps) {
  if (!(eps > 0)) throw ConfigError("layer_norm: eps must be positive");
  Tape& tape = same_tape(x, gain);
  same_tape(x, bias);
  const Tensor& v = x.value();
  const std::size_t n = v.rows(), d = v.cols();
  if (gain.value().numel() != d || bias.value().numel() != d)
    throw DimensionError("layer_norm: gain/bias " + shape_string(gain.shape()) + "/" + shape_string(bias.shape()) +
                         " do not match width of " + shape_string(v.shape()));
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor out({n, d});
  Tensor normalized({n, d});
  std::vector<Scalar> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    Scalar mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += v.at(i, j);
    mean /= static_cast<Scalar>(d);
    Scalar var = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const Scalar dv = v.at(i, j) - mean;
      var += dv * dv;
    }
    var /= static_cast<Scalar>(d);
    inv_std[i] = Scalar(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const Scalar xh = (v.at(i, j) - mean) * inv_std[i];
      normalized.at(i, j) = xh;
      out.at(i, j) = xh * gv[j] + bv[j];
    }
  }
  const auto ix = x.id(), ig = gain.id(), ib = bias.id();
  return tape.record(
      "layer_norm", std::move(out), {ix, ig, ib},
      [ix, ig, ib, n, d, normalized = std::move(normalized), inv_std = std::move(inv_std)](Tape& t,
                                                                                           const Tensor& g) {
        const Tensor& gv = t.value(ig);
        if (t.requires_grad(ig)) {
          Tensor& gg = t.grad_slot(ig);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gg[j] += g[i * d + j] * normalized[i * d + j];
        }
        if (t.requires_grad(ib)) {
          Tensor& gb = t.grad_slot(ib);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
        }
        if (t.requires_grad(ix)) {
          Tensor& gx = t.grad_slot(ix);
          const Scalar inv_d = Scalar(1) / static_cast<Scalar>(d);
          for (std::size_t i = 0; i < n; ++i) {
            Scalar mean_dxh = 0, mean_dxh_xh = 0;
            for (std::size_t j = 0; j < d; ++j) {
              const Scalar dxh = g[i * d + j] * gv[j];
              mean_dxh += dxh;
              mean_dxh_xh += dxh * normalized[i * d + j];
            }
            mean_dxh *= inv_d;
            mean_dxh_xh *= inv_d;
            for (std::size_t j = 0; j < d; ++j) {
              const Scalar dxh = g[i * d + j] * gv[j];
              gx[i * d + j] += inv_std[i] * (dxh - mean_dxh - normalized[i * d + j] * mean_dxh_xh);
            }
          }
        }
      });
}

namespace {
constexpr Scalar kGeluC = static_cast<Scalar>(0.7978845608028654);  // sqrt(2/pi)
constexpr Scalar kGeluA = static_cast<Scalar>(0.044715);
}  // namespace

Var gelu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = Scalar(0.5) * v * (Scalar(1) + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  const auto ix = x.id();
  return x.tape().record("gelu", std::move(out), {ix}, [ix](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(ix);
    Tensor& gx = t.grad_slot(ix);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const Scalar v = xv[i];
      const Scalar th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const Scalar dinner = kGeluC * (Scalar(1) + Scalar(3) * kGeluA * v * v);
      gx[i] += g[i] * (Scalar(0.5) * (Scalar(1) + th) + Scalar(0.5) * v * (Scalar(1) - th * th) * dinner);
    }
  });
}

Var log_clamped(Var x, Scalar floor) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = std::log(std::max(v, floor));
  const auto ix = x.id();
  return x.tape().record("log_clamped", std::move(out), {ix}, [ix, floor](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(ix);
    Tensor& gx = t.grad_slot(ix);
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (xv[i] > floor) gx[i] += g[i] / xv[i];
  });
}

Var sqrt(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) {
    if (v < 0) throw NumericError("sqrt of negative value");
    v = std::sqrt(v);
  }
  const auto ix = x.id();
  const std::size_t out_id = x.tape().size();
  return x.tape().record("sqrt", std::move(out), {ix}, [ix, out_id](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(out_id);
    Tensor& gx = t.grad_slot(ix);
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (y[i] > 0) gx[i] += g[i] / (Scalar(2) * y[i]);
  });
}

Var reciprocal(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = Scalar(1) / v;
  const auto ix = x.id();
  const std::size_t out_id = x.tape().size();
  return x.tape().record("reciprocal", std::move(out), {ix}, [ix, out_id](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(out_id);
    Tensor& gx = t.grad_slot(ix);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] -= g[i] * y[i] * y[i];
  });
}

}  // namespace lesion::ops
