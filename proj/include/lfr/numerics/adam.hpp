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

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lfr/error.hpp"
#include "lfr/numerics/autograd.hpp"

namespace lfr {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments are created lazily on the first step
/// and keep the shape of their parameter.
template <std::floating_point T>
class AdamState {
 public:
  explicit AdamState(AdamHyper hyper = {}) : hyper_(hyper) {}

  AdamHyper& hyper() { return hyper_; }
  const AdamHyper& hyper() const { return hyper_; }
  std::uint64_t steps() const { return step_; }
  const Tensor<T>& first_moment(std::size_t i) const { return m_.at(i); }
  const Tensor<T>& second_moment(std::size_t i) const { return v_.at(i); }

  /// One update of every parameter in `params` from its `grad` field.
  void step(ParamStore<T>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.value.shape());
        v_.emplace_back(p.value.shape());
      }
    }
    if (m_.size() != params.size()) {
      throw ShapeError("adam_step: parameter count changed between steps");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = params[i];
      if (p.grad.shape() != p.value.shape() || m_[i].shape() != p.value.shape()) {
        throw ShapeError("adam_step: shape mismatch for " + p.name);
      }
      if (!p.grad.all_finite()) {
        throw NonFiniteError("adam_step: non-finite gradient for " + p.name);
      }
    }
    ++step_;
    const double b1 = hyper_.beta1, b2 = hyper_.beta2;
    const double c1 = 1.0 - std::pow(b1, double(step_));
    const double c2 = 1.0 - std::pow(b2, double(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        const double g = p.grad[j];
        m[j] = T(b1 * m[j] + (1.0 - b1) * g);
        v[j] = T(b2 * v[j] + (1.0 - b2) * g * g);
        const double mhat = m[j] / c1;
        const double vhat = v[j] / c2;
        p.value[j] = T(p.value[j] - hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.epsilon));
      }
    }
  }

 private:
  AdamHyper hyper_;
  std::uint64_t step_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

template <std::floating_point T>
void adam_step(AdamState<T>& state, ParamStore<T>& params) {
  state.step(params);
}

}  // namespace lfr
