#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "stockbot/autodiff/tape.hpp"

namespace stockbot::ad {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

/// c[m×n] (+)= op(a) · op(b), where op(a) is m×k and op(b) is k×n.
inline void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                 bool trans_a, bool trans_b, bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m);
  const auto K = static_cast<Eigen::Index>(k);
  const auto N = static_cast<Eigen::Index>(n);
  MutMap C(c, M, N);
  if (!accumulate) C.setZero();
  if (!trans_a && !trans_b) {
    C.noalias() += ConstMap(a, M, K) * ConstMap(b, K, N);
  } else if (!trans_a && trans_b) {
    C.noalias() += ConstMap(a, M, K) * ConstMap(b, N, K).transpose();
  } else if (trans_a && !trans_b) {
    C.noalias() += ConstMap(a, K, M).transpose() * ConstMap(b, K, N);
  } else {
    C.noalias() += ConstMap(a, K, M).transpose() * ConstMap(b, N, K).transpose();
  }
}

[[noreturn]] inline void dim_error(const std::string& what, const Shape& a, const Shape& b) {
  throw Error(ErrorKind::dimension, "autodiff-core", what + ": " + shape_str(a) + " vs " + shape_str(b));
}

inline bool is_scalar(const Tensor& t) { return t.rank() == 0; }

template <class F, class DA, class DB>
Var binary(OpKind kind, Var a, Var b, F f, DA da, DB db) {
  Tape& tape = *a.tape;
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const bool same = x.shape() == y.shape();
  if (!same && !is_scalar(x) && !is_scalar(y)) dim_error("unsupported broadcast", x.shape(), y.shape());
  const Shape out_shape = same || is_scalar(y) ? x.shape() : y.shape();
  const std::size_t n = numel(out_shape);
  const std::size_t sx = x.size() == n ? 1 : 0;
  const std::size_t sy = y.size() == n ? 1 : 0;
  Tensor out(out_shape);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(x[i * sx], y[i * sy]);
  const auto ia = a.id, ib = b.id;
  return tape.record(kind, std::move(out), {a, b}, [=](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(ia);
    const Tensor& yv = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor& gx = t.grad_buffer(ia);
      for (std::size_t i = 0; i < n; ++i) gx[i * sx] += g[i] * da(xv[i * sx], yv[i * sy]);
    }
    if (t.requires_grad(ib)) {
      Tensor& gy = t.grad_buffer(ib);
      for (std::size_t i = 0; i < n; ++i) gy[i * sy] += g[i] * db(xv[i * sx], yv[i * sy]);
    }
  });
}

/// `df(x, y)` receives the input and the output value.
template <class F, class DF>
Var unary(OpKind kind, Var a, F f, DF df) {
  Tape& tape = *a.tape;
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  const auto ia = a.id, io = tape.size();
  return tape.record(kind, std::move(out), {a}, [=](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(ia);
    const Tensor& yv = t.value(io);
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i], yv[i]);
  });
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

inline double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

inline double gelu_grad(double x) {
  const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

/// a[..., k] · b[k, n] -> [..., n]. Leading axes of `a` are flattened into rows.
inline Var matmul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  if (w.rank() != 2 || x.rank() < 1 || x.shape().back() != w.dim(0)) {
    detail::dim_error("matmul inner dimensions disagree", x.shape(), w.shape());
  }
  const std::size_t k = w.dim(0), n = w.dim(1), rows = x.size() / k;
  Shape out_shape = x.shape();
  out_shape.back() = n;
  Tensor out(out_shape);
  detail::gemm(x.raw(), w.raw(), out.raw(), rows, k, n, false, false, false);
  const auto ia = a.id, ib = b.id;
  return a.tape->record(OpKind::matmul, std::move(out), {a, b}, [=](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) {
      detail::gemm(g.raw(), t.value(ib).raw(), t.grad_buffer(ia).raw(), rows, n, k, false, true, true);
    }
    if (t.requires_grad(ib)) {
      detail::gemm(t.value(ia).raw(), g.raw(), t.grad_buffer(ib).raw(), k, rows, n, true, false, true);
    }
  });
}

/// Batched product a[B, m, k] · b[B, k, n]; with `transpose_b`, b is [B, n, k].
inline Var bmm(Var a, Var b, bool transpose_b = false) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rank() != 3 || y.rank() != 3 || x.dim(0) != y.dim(0)) detail::dim_error("bmm batch mismatch", x.shape(), y.shape());
  const std::size_t B = x.dim(0), m = x.dim(1), k = x.dim(2);
  const std::size_t n = transpose_b ? y.dim(1) : y.dim(2);
  if ((transpose_b ? y.dim(2) : y.dim(1)) != k) detail::dim_error("bmm inner dimensions disagree", x.shape(), y.shape());
  Tensor out(Shape{B, m, n});
  for (std::size_t i = 0; i < B; ++i) {
    detail::gemm(x.raw() + i * m * k, y.raw() + i * k * n, out.raw() + i * m * n, m, k, n, false, transpose_b, false);
  }
  const auto ia = a.id, ib = b.id;
  return a.tape->record(OpKind::bmm, std::move(out), {a, b}, [=](Tape& t, const Tensor& g) {
    const double* xv = t.value(ia).raw();
    const double* yv = t.value(ib).raw();
    if (t.requires_grad(ia)) {
      double* gx = t.grad_buffer(ia).raw();
      for (std::size_t i = 0; i < B; ++i) {
        // dA = G · op(B)ᵀ
        detail::gemm(g.raw() + i * m * n, yv + i * k * n, gx + i * m * k, m, n, k, false, !transpose_b, true);
      }
    }
    if (t.requires_grad(ib)) {
      double* gy = t.grad_buffer(ib).raw();
      for (std::size_t i = 0; i < B; ++i) {
        if (transpose_b) {
          // B is n×k: dB = Gᵀ · A
          detail::gemm(g.raw() + i * m * n, xv + i * m * k, gy + i * k * n, n, m, k, true, false, true);
        } else {
          detail::gemm(xv + i * m * k, g.raw() + i * m * n, gy + i * k * n, k, m, n, true, false, true);
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise

inline Var add(Var a, Var b) {
  return detail::binary(
      OpKind::add, a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

inline Var sub(Var a, Var b) {
  return detail::binary(
      OpKind::sub, a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

inline Var mul(Var a, Var b) {
  return detail::binary(
      OpKind::mul, a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

inline Var scale(Var a, double c) {
  return detail::unary(
      OpKind::scale, a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Var sigmoid(Var a) {
  return detail::unary(
      OpKind::sigmoid, a, [](double x) { return detail::sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh(Var a) {
  return detail::unary(
      OpKind::tanh, a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var relu(Var a) {
  double margin = std::numeric_limits<double>::infinity();
  for (double x : a.value().data()) margin = std::min(margin, std::abs(x));
  a.tape->note_kink(margin);
  return detail::unary(
      OpKind::relu, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

/// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
inline Var gelu(Var a) {
  return detail::unary(
      OpKind::gelu, a, [](double x) { return detail::gelu(x); }, [](double x, double) { return detail::gelu_grad(x); });
}

inline Var exp(Var a) {
  return detail::unary(
      OpKind::exp, a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Var neg(Var a) {
  return detail::unary(
      OpKind::neg, a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

/// x[..., n] + b[n], the one row-broadcast the library supports.
inline Var add_bias(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& bias = b.value();
  if (bias.rank() != 1 || x.rank() < 1 || x.shape().back() != bias.dim(0)) {
    detail::dim_error("bias length does not match last axis", x.shape(), bias.shape());
  }
  const std::size_t n = bias.dim(0), rows = x.size() / n;
  Tensor out = x;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bias[j];
  }
  const auto ia = a.id, ib = b.id;
  return a.tape->record(OpKind::add_bias, std::move(out), {a, b}, [=](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) {
      Tensor& gx = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Normalisation and reductions

/// Softmax along `axis`, max-subtracted.
inline Var softmax(Var a, std::size_t axis) {
  const Tensor& x = a.value();
  const auto [outer, n, inner] = split_axis(x.shape(), axis);
  Tensor out(x.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = x[base];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[base + j * inner]);
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(x[base + j * inner] - mx);
        out[base + j * inner] = e;
        sum += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= sum;
    }
  }
  const auto ia = a.id, io = a.tape->size();
  return a.tape->record(OpKind::softmax, std::move(out), {a}, [=, outer = outer, n = n, inner = inner](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(io);
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t i = base + j * inner;
          gx[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

enum class Reduce { sum, mean };

/// Sum or mean over `axis`; the axis is removed from the result shape.
inline Var reduce(Reduce kind, Var a, std::size_t axis) {
  const Tensor& x = a.value();
  const auto [outer, n, inner] = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  const double w = kind == Reduce::mean ? 1.0 / static_cast<double>(n) : 1.0;
  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += x[(o * n + j) * inner + in];
      out[o * inner + in] = s * w;
    }
  }
  const auto ia = a.id;
  const auto op = kind == Reduce::mean ? OpKind::reduce_mean : OpKind::reduce_sum;
  return a.tape->record(op, std::move(out), {a}, [=, outer = outer, n = n, inner = inner](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const double gv = g[o * inner + in] * w;
        for (std::size_t j = 0; j < n; ++j) gx[(o * n + j) * inner + in] += gv;
      }
    }
  });
}

inline Var mean(Var a, std::size_t axis) { return reduce(Reduce::mean, a, axis); }
inline Var sum(Var a, std::size_t axis) { return reduce(Reduce::sum, a, axis); }

Var reshape(Var a, Shape shape);

inline Var sum_all(Var a) { return sum(reshape(a, Shape{a.value().size()}), 0); }
inline Var mean_all(Var a) { return mean(reshape(a, Shape{a.value().size()}), 0); }

inline constexpr double kLayerNormEps = 1e-5;

/// Normalises each row over the last axis (population variance) then applies gain and bias.
inline Var layernorm(Var a, Var gain, Var bias, double eps = kLayerNormEps) {
  const Tensor& x = a.value();
  const std::size_t d = x.shape().back();
  if (gain.value().shape() != Shape{d} || bias.value().shape() != Shape{d}) {
    detail::dim_error("layernorm affine shape", x.shape(), gain.value().shape());
  }
  const std::size_t rows = x.size() / d;
  Tensor out(x.shape());
  std::vector<double> xhat(x.size()), rstd(rows);
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x.raw() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (row[j] - mu) * rstd[r];
      out[r * d + j] = xhat[r * d + j] * gv[j] + bv[j];
    }
  }
  const auto ix = a.id, ig = gain.id, ibias = bias.id;
  return a.tape->record(OpKind::layernorm, std::move(out), {a, gain, bias},
                        [=, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t, const Tensor& g) {
                          const Tensor& gainv = t.value(ig);
                          if (t.requires_grad(ig)) {
                            Tensor& gg = t.grad_buffer(ig);
                            for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * xhat[i];
                          }
                          if (t.requires_grad(ibias)) {
                            Tensor& gb = t.grad_buffer(ibias);
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
                          }
                          if (!t.requires_grad(ix)) return;
                          Tensor& gx = t.grad_buffer(ix);
                          const double inv_d = 1.0 / static_cast<double>(d);
                          for (std::size_t r = 0; r < rows; ++r) {
                            double m1 = 0.0, m2 = 0.0;
                            for (std::size_t j = 0; j < d; ++j) {
                              const double dxh = g[r * d + j] * gainv[j];
                              m1 += dxh;
                              m2 += dxh * xhat[r * d + j];
                            }
                            m1 *= inv_d;
                            m2 *= inv_d;
                            for (std::size_t j = 0; j < d; ++j) {
                              const double dxh = g[r * d + j] * gainv[j];
                              gx[r * d + j] += rstd[r] * (dxh - m1 - xhat[r * d + j] * m2);
                            }
                          }
                        });
}

// ---------------------------------------------------------------------------
// Shape manipulation

inline Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const auto ia = a.id;
  return a.tape->record(OpKind::reshape, std::move(out), {a}, [=](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

/// Elements [begin, end) along `axis`.
inline Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  const auto [outer, n, inner] = split_axis(x.shape(), axis);
  if (begin >= end || end > n) {
    throw Error(ErrorKind::dimension, "autodiff-core",
                "slice [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " + shape_str(x.shape()));
  }
  const std::size_t len = end - begin;
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(x.raw() + (o * n + begin) * inner, len * inner, out.raw() + o * len * inner);
  }
  const auto ia = a.id;
  return a.tape->record(OpKind::slice, std::move(out), {a}, [=, outer = outer, n = n, inner = inner](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t o = 0; o < outer; ++o) {
      double* dst = gx.raw() + (o * n + begin) * inner;
      const double* src = g.raw() + o * len * inner;
      for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
  });
}

/// Index `i` along `axis`, dropping that axis.
inline Var select(Var a, std::size_t axis, std::size_t i) {
  Shape s = a.shape();
  s.erase(s.begin() + static_cast<std::ptrdiff_t>(axis));
  return reshape(slice(a, axis, i, i + 1), s);
}

inline Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw Error(ErrorKind::dimension, "autodiff-core", "concat of nothing");
  const Shape& ref = parts.front().shape();
  Shape out_shape = ref;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != ref.size()) detail::dim_error("concat rank mismatch", ref, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != ref[i]) detail::dim_error("concat shape mismatch", ref, s);
    }
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const auto [outer, total, inner] = split_axis(out_shape, axis);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& src = parts[p].value();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.raw() + o * extents[p] * inner, extents[p] * inner, out.raw() + (o * total + offset) * inner);
    }
    offset += extents[p];
  }
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id);
  return parts.front().tape->record(
      OpKind::concat, std::move(out), parts,
      [=, outer = outer, total = total, inner = inner](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < ids.size(); ++p) {
          if (t.requires_grad(ids[p])) {
            Tensor& gp = t.grad_buffer(ids[p]);
            for (std::size_t o = 0; o < outer; ++o) {
              const double* src = g.raw() + (o * total + off) * inner;
              double* dst = gp.raw() + o * extents[p] * inner;
              for (std::size_t i = 0; i < extents[p] * inner; ++i) dst[i] += src[i];
            }
          }
          off += extents[p];
        }
      });
}

/// Stacks equally shaped parts along a new axis.
inline Var stack(const std::vector<Var>& parts, std::size_t axis) {
  std::vector<Var> expanded;
  expanded.reserve(parts.size());
  for (const auto& p : parts) {
    Shape s = p.shape();
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(axis), 1);
    expanded.push_back(reshape(p, s));
  }
  return concat(expanded, axis);
}

/// Inserts a new axis of extent `count` at `axis`, replicating the input.
inline Var expand(Var a, std::size_t axis, std::size_t count) {
  const Tensor& x = a.value();
  if (axis > x.rank() || count == 0) {
    throw Error(ErrorKind::dimension, "autodiff-core", "invalid expand of " + shape_str(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis; i < x.rank(); ++i) inner *= x.dim(i);
  Shape out_shape = x.shape();
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), count);
  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t c = 0; c < count; ++c) std::copy_n(x.raw() + o * inner, inner, out.raw() + (o * count + c) * inner);
  }
  const auto ia = a.id;
  return a.tape->record(OpKind::expand, std::move(out), {a}, [=](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t c = 0; c < count; ++c) {
        const double* src = g.raw() + (o * count + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) gx[o * inner + i] += src[i];
      }
    }
  });
}

/// Causal delay along `axis`: out[t] = x[t - k] for t >= k, zero before.
inline Var shift(Var a, std::size_t axis, std::size_t k) {
  const Tensor& x = a.value();
  const auto [outer, n, inner] = split_axis(x.shape(), axis);
  Tensor out(x.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = k; j < n; ++j) std::copy_n(x.raw() + (o * n + j - k) * inner, inner, out.raw() + (o * n + j) * inner);
  }
  const auto ia = a.id;
  return a.tape->record(OpKind::shift, std::move(out), {a}, [=, outer = outer, n = n, inner = inner](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = k; j < n; ++j) {
        const double* src = g.raw() + (o * n + j) * inner;
        double* dst = gx.raw() + (o * n + j - k) * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    }
  });
}

}  // namespace stockbot::ad
