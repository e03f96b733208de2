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

// CTC forward-backward in log space. The blank is always the last class of
// the posterior matrix (index V for V symbols).

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "lfr/error.hpp"
#include "lfr/numerics/autograd.hpp"
#include "lfr/numerics/ops.hpp"

namespace lfr {

using Labels = std::vector<int>;

/// Fewest frames that can emit `target`: one per label plus a separating
/// blank between each pair of equal neighbours.
inline std::size_t ctc_min_frames(const Labels& target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) n += target[i] == target[i - 1];
  return n;
}

namespace detail {

struct CtcLattice {
  std::vector<int> ext;          // blank-extended target, length 2|Y|+1
  std::vector<double> alpha;     // frames x ext, log space, emission included
  std::vector<double> beta;      // frames x ext, log space, emission included
  double log_prob = 0;
};

template <std::floating_point T>
std::vector<int> ctc_validate(const Tensor<T>& logpost, const Labels& target) {
  if (logpost.rank() != 2) {
    throw ShapeError("ctc: log posteriors must be (frames x classes), got " + shape_str(logpost.shape()));
  }
  if (logpost.dim(0) == 0) throw ShapeError("ctc: zero-length input");
  if (!logpost.all_finite()) throw NonFiniteError("ctc: non-finite log posterior");
  const int blank = int(logpost.dim(1)) - 1;
  for (int y : target) {
    if (y < 0 || y >= blank) {
      throw DomainError("ctc: label " + std::to_string(y) + " outside [0, " + std::to_string(blank) + ")");
    }
  }
  const std::size_t need = ctc_min_frames(target);
  if (logpost.dim(0) < need) {
    throw AlignmentError("ctc: target needs at least " + std::to_string(need) + " frames, got " +
                         std::to_string(logpost.dim(0)));
  }
  std::vector<int> ext(2 * target.size() + 1, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

template <std::floating_point T>
CtcLattice ctc_lattice(const Tensor<T>& logpost, const Labels& target, bool with_beta) {
  CtcLattice lat;
  lat.ext = ctc_validate(logpost, target);
  const auto& ext = lat.ext;
  const std::size_t frames = logpost.dim(0), classes = logpost.dim(1), S = ext.size();
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  auto lp = [&](std::size_t t, int k) { return double(logpost[t * classes + std::size_t(k)]); };
  auto skip_ok = [&](std::size_t s) { return s >= 2 && ext[s] != ext.back() && ext[s] != ext[s - 2]; };

  lat.alpha.assign(frames * S, ninf);
  auto A = [&](std::size_t t, std::size_t s) -> double& { return lat.alpha[t * S + s]; };
  A(0, 0) = lp(0, ext[0]);
  if (S > 1) A(0, 1) = lp(0, ext[1]);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double a = A(t - 1, s);
      if (s >= 1) a = log_add(a, A(t - 1, s - 1));
      if (skip_ok(s)) a = log_add(a, A(t - 1, s - 2));
      A(t, s) = a == ninf ? ninf : a + lp(t, ext[s]);
    }
  }
  lat.log_prob = S > 1 ? log_add(A(frames - 1, S - 1), A(frames - 1, S - 2)) : A(frames - 1, 0);

  if (with_beta) {
    lat.beta.assign(frames * S, ninf);
    auto B = [&](std::size_t t, std::size_t s) -> double& { return lat.beta[t * S + s]; };
    B(frames - 1, S - 1) = lp(frames - 1, ext[S - 1]);
    if (S > 1) B(frames - 1, S - 2) = lp(frames - 1, ext[S - 2]);
    for (std::size_t t = frames - 1; t-- > 0;) {
      for (std::size_t s = 0; s < S; ++s) {
        double b = B(t + 1, s);
        if (s + 1 < S) b = log_add(b, B(t + 1, s + 1));
        if (s + 2 < S && skip_ok(s + 2)) b = log_add(b, B(t + 1, s + 2));
        B(t, s) = b == ninf ? ninf : b + lp(t, ext[s]);
      }
    }
  }
  return lat;
}

}  // namespace detail

/// ln P_CTC(target | frames): sum over every alignment path that collapses
/// to `target`. Computed in double regardless of T.
template <std::floating_point T>
double ctc_log_prob(const Tensor<T>& logpost, const Labels& target) {
  return detail::ctc_lattice(logpost, target, false).log_prob;
}

/// Gradient of -ln P_CTC with respect to each log posterior entry, treating
/// entries as independent inputs.
template <std::floating_point T>
Tensor<T> ctc_grad(const Tensor<T>& logpost, const Labels& target) {
  const auto lat = detail::ctc_lattice(logpost, target, true);
  const std::size_t frames = logpost.dim(0), classes = logpost.dim(1), S = lat.ext.size();
  std::vector<double> acc(frames * classes, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      const double ab = lat.alpha[t * S + s] + lat.beta[t * S + s];
      if (ab == -std::numeric_limits<double>::infinity()) continue;
      const std::size_t k = std::size_t(lat.ext[s]);
      acc[t * classes + k] += std::exp(ab - double(logpost[t * classes + k]) - lat.log_prob);
    }
  }
  Tensor<T> g(logpost.shape());
  for (std::size_t i = 0; i < acc.size(); ++i) g[i] = T(-acc[i]);
  return g;
}

/// -ln P_CTC as a differentiable scalar.
template <std::floating_point T>
Var<T> ctc_loss(Var<T> logpost, const Labels& target) {
  auto& tp = *logpost.tape;
  const double lp = ctc_log_prob(logpost.value(), target);
  if (!std::isfinite(lp)) throw NonFiniteError("ctc_loss: log probability is not finite");
  return tp.push("ctc_loss", Tensor<T>::scalar(T(-lp)), tp.needs(logpost.id),
                 [x = logpost.id, target](Tape<T>& t, std::size_t self) {
                   const T g = t.grad_of(self)[0];
                   auto grad = ctc_grad(t.value_of(x), target);
                   auto& gx = t.grad_ref(x);
                   for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * grad[i];
                 });
}

}  // namespace lfr
