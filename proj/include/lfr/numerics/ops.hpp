// Copyright 2026 The latent-refine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Differentiable operations on Tape variables, plus the pure tensor forms of
// softmax, log-softmax, log-sum-exp and SiLU.
//
// Layout convention for sequence data: (frames, channels), row-major.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "lfr/error.hpp"
#include "lfr/numerics/autograd.hpp"
#include "lfr/numerics/tensor.hpp"

namespace lfr {

namespace detail {

template <std::floating_point T>
Tape<T>& tape_of(Var<T> a, Var<T> b) {
  if (a.tape != b.tape) throw std::logic_error("ops: operands recorded on different tapes");
  return *a.tape;
}

struct AxisSplit {
  std::size_t outer, n, inner;
};

inline AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " invalid for shape " + shape_str(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <std::floating_point T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_str(t.shape()));
  }
}

// c[m x n] += a[m x k] * b[k x n]
template <std::floating_point T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m x n] += a^T * b with a[k x m], b[k x n]
template <std::floating_point T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = a[p * m + i];
      T* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m x n] += a * b^T with a[m x k], b[n x k]. b is transposed into a
// buffer first so the inner loop runs over contiguous memory.
template <std::floating_point T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  std::vector<T> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm_nn(a, bt.data(), c, m, k, n);
}

template <std::floating_point T>
T sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pure tensor functions
// ---------------------------------------------------------------------------

/// ln(exp(a) + exp(b)); -inf acts as log-zero.
template <std::floating_point T>
T log_add(T a, T b) {
  constexpr T ninf = -std::numeric_limits<T>::infinity();
  if (a == ninf) return b;
  if (b == ninf) return a;
  const T m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// ln sum exp along `axis`. Entries may be -inf; an all -inf slice gives -inf.
template <std::floating_point T>
Tensor<T> log_sum_exp(const Tensor<T>& x, std::size_t axis) {
  const auto s = detail::split_axis(x.shape(), axis, "log_sum_exp");
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + std::ptrdiff_t(axis));
  if (out_shape.empty()) out_shape = {1};
  Tensor<T> out(out_shape);
  constexpr T ninf = -std::numeric_limits<T>::infinity();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.inner; ++j) {
      T m = ninf;
      for (std::size_t i = 0; i < s.n; ++i) {
        const T v = x[(o * s.n + i) * s.inner + j];
        if (std::isnan(v) || v == std::numeric_limits<T>::infinity()) {
          throw NonFiniteError("log_sum_exp: NaN or +inf input");
        }
        m = std::max(m, v);
      }
      T r = ninf;
      if (m != ninf) {
        T acc = 0;
        for (std::size_t i = 0; i < s.n; ++i) acc += std::exp(x[(o * s.n + i) * s.inner + j] - m);
        r = m + std::log(acc);
      }
      out[o * s.inner + j] = r;
    }
  }
  return out;
}

template <std::floating_point T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (!x.all_finite()) throw NonFiniteError("softmax: non-finite input");
  const auto s = detail::split_axis(x.shape(), axis, "softmax");
  Tensor<T> out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.inner; ++j) {
      T m = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < s.n; ++i) m = std::max(m, x[(o * s.n + i) * s.inner + j]);
      T z = 0;
      for (std::size_t i = 0; i < s.n; ++i) {
        const std::size_t idx = (o * s.n + i) * s.inner + j;
        out[idx] = std::exp(x[idx] - m);
        z += out[idx];
      }
      for (std::size_t i = 0; i < s.n; ++i) out[(o * s.n + i) * s.inner + j] /= z;
    }
  }
  return out;
}

template <std::floating_point T>
Tensor<T> log_softmax(const Tensor<T>& x, std::size_t axis) {
  if (!x.all_finite()) throw NonFiniteError("log_softmax: non-finite input");
  const auto s = detail::split_axis(x.shape(), axis, "log_softmax");
  Tensor<T> out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.inner; ++j) {
      T m = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < s.n; ++i) m = std::max(m, x[(o * s.n + i) * s.inner + j]);
      T z = 0;
      for (std::size_t i = 0; i < s.n; ++i) z += std::exp(x[(o * s.n + i) * s.inner + j] - m);
      const T lz = m + std::log(z);
      for (std::size_t i = 0; i < s.n; ++i) {
        const std::size_t idx = (o * s.n + i) * s.inner + j;
        out[idx] = x[idx] - lz;
      }
    }
  }
  return out;
}

template <std::floating_point T>
Tensor<T> silu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * detail::sigmoid(x[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <std::floating_point T>
Var<T> add(Var<T> a, Var<T> b) {
  auto& tp = detail::tape_of(a, b);
  const auto& av = a.value();
  av.require_same_shape(b.value(), "add");
  Tensor<T> out = av;
  out += b.value();
  return tp.push("add", std::move(out), tp.needs(a.id) || tp.needs(b.id),
                 [a = a.id, b = b.id](Tape<T>& t, std::size_t self) {
                   const auto& g = t.grad_of(self);
                   if (t.needs(a)) t.grad_ref(a) += g;
                   if (t.needs(b)) t.grad_ref(b) += g;
                 });
}

template <std::floating_point T>
Var<T> sub(Var<T> a, Var<T> b) {
  auto& tp = detail::tape_of(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  av.require_same_shape(bv, "sub");
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return tp.push("sub", std::move(out), tp.needs(a.id) || tp.needs(b.id),
                 [a = a.id, b = b.id](Tape<T>& t, std::size_t self) {
                   const auto& g = t.grad_of(self);
                   if (t.needs(a)) t.grad_ref(a) += g;
                   if (t.needs(b)) {
                     auto& gb = t.grad_ref(b);
                     for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                   }
                 });
}

template <std::floating_point T>
Var<T> mul(Var<T> a, Var<T> b) {
  auto& tp = detail::tape_of(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  av.require_same_shape(bv, "mul");
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return tp.push("mul", std::move(out), tp.needs(a.id) || tp.needs(b.id),
                 [a = a.id, b = b.id](Tape<T>& t, std::size_t self) {
                   const auto& g = t.grad_of(self);
                   const auto& av = t.value_of(a);
                   const auto& bv = t.value_of(b);
                   if (t.needs(a)) {
                     auto& ga = t.grad_ref(a);
                     for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                   }
                   if (t.needs(b)) {
                     auto& gb = t.grad_ref(b);
                     for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                   }
                 });
}

template <std::floating_point T>
Var<T> scale(Var<T> a, T s) {
  auto& tp = *a.tape;
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v *= s;
  return tp.push("scale", std::move(out), tp.needs(a.id),
                 [a = a.id, s](Tape<T>& t, std::size_t self) {
                   const auto& g = t.grad_of(self);
                   auto& ga = t.grad_ref(a);
                   for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
                 });
}

template <std::floating_point T>
Var<T> square(Var<T> a) {
  auto& tp = *a.tape;
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = v * v;
  return tp.push("square", std::move(out), tp.needs(a.id), [a = a.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& x = t.value_of(a);
    auto& ga = t.grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += T(2) * x[i] * g[i];
  });
}

template <std::floating_point T>
Var<T> relu(Var<T> a) {
  auto& tp = *a.tape;
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = v > 0 ? v : T(0);
  return tp.push("relu", std::move(out), tp.needs(a.id), [a = a.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& x = t.value_of(a);
    auto& ga = t.grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0) ga[i] += g[i];
    }
  });
}

template <std::floating_point T>
Var<T> silu(Var<T> a) {
  auto& tp = *a.tape;
  return tp.push("silu", silu(a.value()), tp.needs(a.id), [a = a.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& x = t.value_of(a);
    auto& ga = t.grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T s = detail::sigmoid(x[i]);
      ga[i] += g[i] * (s + x[i] * s * (T(1) - s));
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <std::floating_point T>
Var<T> sum(Var<T> a) {
  auto& tp = *a.tape;
  T s = 0;
  for (T v : a.value().data()) s += v;
  return tp.push("sum", Tensor<T>::scalar(s), tp.needs(a.id), [a = a.id](Tape<T>& t, std::size_t self) {
    const T g = t.grad_of(self)[0];
    auto& ga = t.grad_ref(a);
    for (auto& v : ga.data()) v += g;
  });
}

template <std::floating_point T>
Var<T> mean(Var<T> a) {
  return scale(sum(a), T(1) / T(a.value().size()));
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

template <std::floating_point T>
Var<T> matmul(Var<T> a, Var<T> b) {
  auto& tp = detail::tape_of(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  detail::require_matrix(av, "matmul");
  detail::require_matrix(bv, "matmul");
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k) {
    throw ShapeError("matmul: inner dims differ " + shape_str(av.shape()) + " x " +
                     shape_str(bv.shape()));
  }
  Tensor<T> out({m, n});
  detail::gemm_nn(av.ptr(), bv.ptr(), out.ptr(), m, k, n);
  return tp.push("matmul", std::move(out), tp.needs(a.id) || tp.needs(b.id),
                 [a = a.id, b = b.id, m, k, n](Tape<T>& t, std::size_t self) {
                   const auto& g = t.grad_of(self);
                   if (t.needs(a)) detail::gemm_nt(g.ptr(), t.value_of(b).ptr(), t.grad_ref(a).ptr(), m, n, k);
                   if (t.needs(b)) detail::gemm_tn(t.value_of(a).ptr(), g.ptr(), t.grad_ref(b).ptr(), k, m, n);
                 });
}

template <std::floating_point T>
Var<T> transpose(Var<T> a) {
  auto& tp = *a.tape;
  const auto& av = a.value();
  detail::require_matrix(av, "transpose");
  const std::size_t r = av.dim(0), c = av.dim(1);
  Tensor<T> out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return tp.push("transpose", std::move(out), tp.needs(a.id), [a = a.id, r, c](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_ref(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

/// x (rows x C) plus a length-C vector (shape {C} or {1, C}) on every row.
template <std::floating_point T>
Var<T> add_row(Var<T> x, Var<T> b) {
  auto& tp = detail::tape_of(x, b);
  const auto& xv = x.value();
  const auto& bv = b.value();
  const std::size_t c = xv.cols();
  if (bv.size() != c) {
    throw ShapeError("add_row: bias " + shape_str(bv.shape()) + " vs input " + shape_str(xv.shape()));
  }
  Tensor<T> out = xv;
  const std::size_t rows = xv.size() / c;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] += bv[j];
  return tp.push("add_row", std::move(out), tp.needs(x.id) || tp.needs(b.id),
                 [x = x.id, b = b.id, rows, c](Tape<T>& t, std::size_t self) {
                   const auto& g = t.grad_of(self);
                   if (t.needs(x)) t.grad_ref(x) += g;
                   if (t.needs(b)) {
                     auto& gb = t.grad_ref(b);
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t j = 0; j < c; ++j) gb[j] += g[r * c + j];
                   }
                 });
}

/// x W + b with W (in x out), b (out).
template <std::floating_point T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  return add_row(matmul(x, w), b);
}

// ---------------------------------------------------------------------------
// Softmax family
// ---------------------------------------------------------------------------

template <std::floating_point T>
Var<T> softmax(Var<T> x, std::size_t axis) {
  auto& tp = *x.tape;
  auto out = softmax(x.value(), axis);
  const auto s = detail::split_axis(x.shape(), axis, "softmax");
  return tp.push("softmax", std::move(out), tp.needs(x.id), [x = x.id, s](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& y = t.value_of(self);
    auto& gx = t.grad_ref(x);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t j = 0; j < s.inner; ++j) {
        T dot = 0;
        for (std::size_t i = 0; i < s.n; ++i) {
          const std::size_t idx = (o * s.n + i) * s.inner + j;
          dot += g[idx] * y[idx];
        }
        for (std::size_t i = 0; i < s.n; ++i) {
          const std::size_t idx = (o * s.n + i) * s.inner + j;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

template <std::floating_point T>
Var<T> log_softmax(Var<T> x, std::size_t axis) {
  auto& tp = *x.tape;
  auto out = log_softmax(x.value(), axis);
  const auto s = detail::split_axis(x.shape(), axis, "log_softmax");
  return tp.push("log_softmax", std::move(out), tp.needs(x.id), [x = x.id, s](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& y = t.value_of(self);
    auto& gx = t.grad_ref(x);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t j = 0; j < s.inner; ++j) {
        T gsum = 0;
        for (std::size_t i = 0; i < s.n; ++i) gsum += g[(o * s.n + i) * s.inner + j];
        for (std::size_t i = 0; i < s.n; ++i) {
          const std::size_t idx = (o * s.n + i) * s.inner + j;
          gx[idx] += g[idx] - std::exp(y[idx]) * gsum;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

namespace detail {

// Normalizes index sets {members(g)} independently; gain/bias indexed by column.
// Shared by layer_norm (one set per row) and group_norm (one set per group).
template <std::floating_point T, class Members>
Var<T> normalize_sets(const char* op, Var<T> x, Var<T> gain, Var<T> bias, T eps,
                      std::size_t sets, Members members) {
  auto& tp = *x.tape;
  const auto& xv = x.value();
  const std::size_t c = xv.cols();
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  if (gv.size() != c || bv.size() != c) {
    throw ShapeError(std::string(op) + ": affine size does not match " + std::to_string(c) + " channels");
  }
  Tensor<T> xhat(xv.shape());
  Tensor<T> out(xv.shape());
  std::vector<T> inv_std(sets);
  std::vector<std::size_t> idx;
  for (std::size_t s = 0; s < sets; ++s) {
    members(s, idx);
    T mu = 0;
    for (auto i : idx) mu += xv[i];
    mu /= T(idx.size());
    T var = 0;
    for (auto i : idx) var += (xv[i] - mu) * (xv[i] - mu);
    var /= T(idx.size());
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[s] = is;
    for (auto i : idx) {
      xhat[i] = (xv[i] - mu) * is;
      out[i] = xhat[i] * gv[i % c] + bv[i % c];
    }
  }
  const bool req = tp.needs(x.id) || tp.needs(gain.id) || tp.needs(bias.id);
  return tp.push(op, std::move(out), req,
                 [x = x.id, gain = gain.id, bias = bias.id, c, sets, members,
                  xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t, std::size_t self) {
                   const auto& g = t.grad_of(self);
                   const auto& gv = t.value_of(gain);
                   if (t.needs(gain) || t.needs(bias)) {
                     Tensor<T> dg(gv.shape()), db(gv.shape());
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       dg[i % c] += g[i] * xhat[i];
                       db[i % c] += g[i];
                     }
                     if (t.needs(gain)) t.grad_ref(gain) += dg;
                     if (t.needs(bias)) t.grad_ref(bias) += db;
                   }
                   if (!t.needs(x)) return;
                   auto& gx = t.grad_ref(x);
                   std::vector<std::size_t> idx;
                   for (std::size_t s = 0; s < sets; ++s) {
                     members(s, idx);
                     T m1 = 0, m2 = 0;
                     for (auto i : idx) {
                       const T d = g[i] * gv[i % c];
                       m1 += d;
                       m2 += d * xhat[i];
                     }
                     m1 /= T(idx.size());
                     m2 /= T(idx.size());
                     for (auto i : idx) {
                       const T d = g[i] * gv[i % c];
                       gx[i] += inv_std[s] * (d - m1 - xhat[i] * m2);
                     }
                   }
                 });
}

}  // namespace detail

/// Normalizes each row over its last dimension, then applies gain and bias.
template <std::floating_point T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5)) {
  const std::size_t c = x.value().cols();
  const std::size_t rows = x.value().size() / c;
  return detail::normalize_sets<T>("layer_norm", x, gain, bias, eps, rows,
                                   [c](std::size_t r, std::vector<std::size_t>& idx) {
                                     idx.resize(c);
                                     for (std::size_t j = 0; j < c; ++j) idx[j] = r * c + j;
                                   });
}

/// Group normalization of a (frames x channels) sequence: statistics are
/// taken over all frames of each contiguous block of channels/groups channels.
template <std::floating_point T>
Var<T> group_norm(Var<T> x, std::size_t groups, Var<T> gain, Var<T> bias, T eps = T(1e-5)) {
  const auto& xv = x.value();
  detail::require_matrix(xv, "group_norm");
  const std::size_t frames = xv.dim(0), c = xv.dim(1);
  if (groups == 0 || c % groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(c) + " channels not divisible into " +
                     std::to_string(groups) + " groups");
  }
  const std::size_t per = c / groups;
  return detail::normalize_sets<T>("group_norm", x, gain, bias, eps, groups,
                                   [frames, c, per](std::size_t g, std::vector<std::size_t>& idx) {
                                     idx.clear();
                                     for (std::size_t f = 0; f < frames; ++f)
                                       for (std::size_t j = 0; j < per; ++j) idx.push_back(f * c + g * per + j);
                                   });
}

// ---------------------------------------------------------------------------
// Sequence ops
// ---------------------------------------------------------------------------

inline std::size_t conv1d_out_len(std::size_t len, std::size_t kernel, std::size_t stride,
                                  std::size_t padding) {
  if (stride == 0 || kernel == 0 || kernel > len + 2 * padding) {
    throw ShapeError("conv1d: invalid geometry (len " + std::to_string(len) + ", kernel " +
                     std::to_string(kernel) + ", stride " + std::to_string(stride) + ", padding " +
                     std::to_string(padding) + ")");
  }
  return (len + 2 * padding - kernel) / stride + 1;
}

/// 1-D convolution over frames. x (len x Cin), w (kernel x Cin x Cout),
/// b (Cout); zero padding on both ends.
template <std::floating_point T>
Var<T> conv1d(Var<T> x, Var<T> w, Var<T> b, std::size_t stride, std::size_t padding) {
  auto& tp = detail::tape_of(x, w);
  const auto& xv = x.value();
  const auto& wv = w.value();
  detail::require_matrix(xv, "conv1d");
  if (wv.rank() != 3 || wv.dim(1) != xv.dim(1)) {
    throw ShapeError("conv1d: kernel " + shape_str(wv.shape()) + " incompatible with input " +
                     shape_str(xv.shape()));
  }
  const std::size_t len = xv.dim(0), cin = xv.dim(1), k = wv.dim(0), cout = wv.dim(2);
  if (b.value().size() != cout) throw ShapeError("conv1d: bias size mismatch");
  const std::size_t lout = conv1d_out_len(len, k, stride, padding);
  // im2col: row r holds the k input frames under output r (zeros where the
  // window overhangs), so the kernel viewed as (k*Cin x Cout) is one GEMM.
  const std::size_t span = k * cin;
  auto cols = std::make_shared<std::vector<T>>(lout * span, T(0));
  for (std::size_t r = 0; r < lout; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = std::ptrdiff_t(r * stride + j) - std::ptrdiff_t(padding);
      if (src < 0 || src >= std::ptrdiff_t(len)) continue;
      std::copy_n(xv.ptr() + std::size_t(src) * cin, cin, cols->data() + r * span + j * cin);
    }
  }
  Tensor<T> out({lout, cout});
  const auto& bv = b.value();
  for (std::size_t r = 0; r < lout; ++r)
    for (std::size_t o = 0; o < cout; ++o) out[r * cout + o] = bv[o];
  detail::gemm_nn(cols->data(), wv.ptr(), out.ptr(), lout, span, cout);
  const bool req = tp.needs(x.id) || tp.needs(w.id) || tp.needs(b.id);
  if (!tp.recording()) cols.reset();
  return tp.push("conv1d", std::move(out), req,
                 [x = x.id, w = w.id, b = b.id, cols, len, cin, k, cout, lout, stride, padding,
                  span](Tape<T>& t, std::size_t self) {
                   const auto& g = t.grad_of(self);
                   if (t.needs(b)) {
                     auto& gb = t.grad_ref(b);
                     for (std::size_t r = 0; r < lout; ++r)
                       for (std::size_t o = 0; o < cout; ++o) gb[o] += g[r * cout + o];
                   }
                   if (t.needs(w)) detail::gemm_tn(cols->data(), g.ptr(), t.grad_ref(w).ptr(), span, lout, cout);
                   if (t.needs(x)) {
                     std::vector<T> gcols(lout * span, T(0));
                     detail::gemm_nt(g.ptr(), t.value_of(w).ptr(), gcols.data(), lout, cout, span);
                     auto& gx = t.grad_ref(x);
                     for (std::size_t r = 0; r < lout; ++r) {
                       for (std::size_t j = 0; j < k; ++j) {
                         const std::ptrdiff_t src = std::ptrdiff_t(r * stride + j) - std::ptrdiff_t(padding);
                         if (src < 0 || src >= std::ptrdiff_t(len)) continue;
                         T* dst = gx.ptr() + std::size_t(src) * cin;
                         const T* s = gcols.data() + r * span + j * cin;
                         for (std::size_t c = 0; c < cin; ++c) dst[c] += s[c];
                       }
                     }
                   }
                 });
}

/// Repeats every frame `factor` times.
template <std::floating_point T>
Var<T> upsample_nearest(Var<T> x, std::size_t factor) {
  auto& tp = *x.tape;
  const auto& xv = x.value();
  detail::require_matrix(xv, "upsample_nearest");
  const std::size_t len = xv.dim(0), c = xv.dim(1);
  Tensor<T> out({len * factor, c});
  for (std::size_t r = 0; r < len * factor; ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = xv[(r / factor) * c + j];
  return tp.push("upsample_nearest", std::move(out), tp.needs(x.id), [x = x.id, len, c, factor](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& gx = t.grad_ref(x);
    for (std::size_t r = 0; r < len * factor; ++r)
      for (std::size_t j = 0; j < c; ++j) gx[(r / factor) * c + j] += g[r * c + j];
  });
}

/// Channel concatenation of two sequences with equal frame counts.
template <std::floating_point T>
Var<T> concat_cols(Var<T> a, Var<T> b) {
  auto& tp = detail::tape_of(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  detail::require_matrix(av, "concat_cols");
  detail::require_matrix(bv, "concat_cols");
  if (av.dim(0) != bv.dim(0)) {
    throw ShapeError("concat_cols: frame counts differ " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  }
  const std::size_t rows = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
  Tensor<T> out({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < ca; ++j) out[r * (ca + cb) + j] = av[r * ca + j];
    for (std::size_t j = 0; j < cb; ++j) out[r * (ca + cb) + ca + j] = bv[r * cb + j];
  }
  return tp.push("concat_cols", std::move(out), tp.needs(a.id) || tp.needs(b.id),
                 [a = a.id, b = b.id, rows, ca, cb](Tape<T>& t, std::size_t self) {
                   const auto& g = t.grad_of(self);
                   if (t.needs(a)) {
                     auto& ga = t.grad_ref(a);
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t j = 0; j < ca; ++j) ga[r * ca + j] += g[r * (ca + cb) + j];
                   }
                   if (t.needs(b)) {
                     auto& gb = t.grad_ref(b);
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t j = 0; j < cb; ++j) gb[r * cb + j] += g[r * (ca + cb) + ca + j];
                   }
                 });
}

template <std::floating_point T>
Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t count) {
  auto& tp = *x.tape;
  const auto& xv = x.value();
  detail::require_matrix(xv, "slice_cols");
  const std::size_t rows = xv.dim(0), c = xv.dim(1);
  if (count == 0 || start + count > c) throw ShapeError("slice_cols: range out of bounds");
  Tensor<T> out({rows, count});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < count; ++j) out[r * count + j] = xv[r * c + start + j];
  return tp.push("slice_cols", std::move(out), tp.needs(x.id), [x = x.id, rows, c, start, count](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& gx = t.grad_ref(x);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < count; ++j) gx[r * c + start + j] += g[r * count + j];
  });
}

/// Source frame for position `i` of a sequence of length `len` extended by
/// mirror reflection (edge frame not repeated). Length 1 replicates.
inline std::size_t reflect_index(std::size_t i, std::size_t len) {
  if (len == 1) return 0;
  const std::size_t period = 2 * (len - 1);
  const std::size_t r = i % period;
  return r < len ? r : period - r;
}

/// Extends a sequence at the end to `new_len` frames by reflection.
template <std::floating_point T>
Var<T> reflect_pad_rows(Var<T> x, std::size_t new_len) {
  auto& tp = *x.tape;
  const auto& xv = x.value();
  detail::require_matrix(xv, "reflect_pad_rows");
  const std::size_t len = xv.dim(0), c = xv.dim(1);
  if (new_len < len) throw ShapeError("reflect_pad_rows: target shorter than input");
  Tensor<T> out({new_len, c});
  for (std::size_t r = 0; r < new_len; ++r) {
    const std::size_t s = reflect_index(r, len);
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = xv[s * c + j];
  }
  return tp.push("reflect_pad_rows", std::move(out), tp.needs(x.id), [x = x.id, len, c, new_len](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& gx = t.grad_ref(x);
    for (std::size_t r = 0; r < new_len; ++r) {
      const std::size_t s = reflect_index(r, len);
      for (std::size_t j = 0; j < c; ++j) gx[s * c + j] += g[r * c + j];
    }
  });
}

/// Keeps the first `len` frames.
template <std::floating_point T>
Var<T> crop_rows(Var<T> x, std::size_t len) {
  auto& tp = *x.tape;
  const auto& xv = x.value();
  detail::require_matrix(xv, "crop_rows");
  const std::size_t c = xv.dim(1);
  if (len == 0 || len > xv.dim(0)) throw ShapeError("crop_rows: invalid length");
  Tensor<T> out({len, c}, std::vector<T>(xv.ptr(), xv.ptr() + len * c));
  return tp.push("crop_rows", std::move(out), tp.needs(x.id), [x = x.id, len, c](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& gx = t.grad_ref(x);
    for (std::size_t i = 0; i < len * c; ++i) gx[i] += g[i];
  });
}

/// softmax(q k^T / sqrt(d_k)) v for q (Tq x d_k), k (Tk x d_k), v (Tk x d_v).
template <std::floating_point T>
Var<T> scaled_dot_attention(Var<T> q, Var<T> k, Var<T> v) {
  const auto& qv = q.value();
  const auto& kv = k.value();
  const auto& vv = v.value();
  detail::require_matrix(qv, "scaled_dot_attention");
  detail::require_matrix(kv, "scaled_dot_attention");
  detail::require_matrix(vv, "scaled_dot_attention");
  if (qv.dim(1) != kv.dim(1) || kv.dim(0) != vv.dim(0)) {
    throw ShapeError("scaled_dot_attention: q " + shape_str(qv.shape()) + ", k " + shape_str(kv.shape()) +
                     ", v " + shape_str(vv.shape()));
  }
  const T inv = T(1) / std::sqrt(T(qv.dim(1)));
  auto scores = scale(matmul(q, transpose(k)), inv);
  return matmul(softmax(scores, 1), v);
}

}  // namespace lfr
