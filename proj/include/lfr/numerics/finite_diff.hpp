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

// Central-difference gradient oracle. Deliberately independent of the tape:
// it only evaluates the scalar function at perturbed points.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "lfr/numerics/autograd.hpp"
#include "lfr/numerics/tensor.hpp"

namespace lfr {

template <std::floating_point T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T h) {
  Tensor<T> grad(x.shape());
  Tensor<T> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const T fp = f(probe);
    probe[i] = x[i] - h;
    const T fm = f(probe);
    probe[i] = x[i];
    grad[i] = (fp - fm) / (T(2) * h);
  }
  return grad;
}

/// Finite-difference gradient with respect to a parameter held in place;
/// `f` re-evaluates the loss reading the parameter's current value.
template <std::floating_point T>
Tensor<T> finite_diff_param(const std::function<T()>& f, Parameter<T>& p, T h) {
  const Tensor<T> saved = p.value;
  auto g = finite_diff_grad<T>(
      [&](const Tensor<T>& v) {
        p.value = v;
        return f();
      },
      saved, h);
  p.value = saved;
  return g;
}

/// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
template <std::floating_point T>
double relative_error(const Tensor<T>& a, const Tensor<T>& b) {
  a.require_same_shape(b, "relative_error");
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (double(a[i]) - double(b[i])) * (double(a[i]) - double(b[i]));
    na += double(a[i]) * double(a[i]);
    nb += double(b[i]) * double(b[i]);
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0 ? 0.0 : std::sqrt(diff) / denom;
}

}  // namespace lfr
