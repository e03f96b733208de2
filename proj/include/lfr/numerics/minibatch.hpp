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


// Minibatch gradient assembly over independent per-example tapes.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "lfr/numerics/autograd.hpp"
#include "lfr/numerics/parallel.hpp"

namespace lfr {

/// Evaluates `loss(i, tape)` for each of `n` examples on its own recording
/// tape, then writes the mean gradient into `params[...].grad`. Per-example
/// gradients are reduced in index order, so the result does not depend on
/// thread scheduling. Returns the mean loss.
template <std::floating_point T, class LossFn>
double batch_gradients(ParamStore<T>& params, std::size_t n, LossFn&& loss) {
  std::vector<ParamStore<T>> grads(n);
  std::vector<double> losses(n);
  parallel_for(n, [&](std::size_t i) {
    Tape<T> tape;
    Var<T> l = loss(i, tape);
    tape.backward(l);
    losses[i] = double(l.value().item());
    ParamStore<T> g = params;
    g.zero_grad();
    tape.accumulate_param_grads(g);
    grads[i] = std::move(g);
  });
  params.zero_grad();
  double total = 0;
  const T inv = T(1) / T(n);
  for (std::size_t i = 0; i < n; ++i) {
    total += losses[i];
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& dst = params[k].grad;
      const auto& src = grads[i][k].grad;
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += inv * src[j];
    }
  }
  return total / double(n);
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
template <std::floating_point T>
double clip_grad_norm(ParamStore<T>& params, double max_norm) {
  double sq = 0;
  for (const auto& p : params) {
    for (std::size_t j = 0; j < p.grad.size(); ++j) sq += double(p.grad[j]) * double(p.grad[j]);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T s = T(max_norm / norm);
    for (auto& p : params) {
      for (std::size_t j = 0; j < p.grad.size(); ++j) p.grad[j] *= s;
    }
  }
  return norm;
}

/// Order-sensitive FNV-1a hash over parameter names, shapes and value bits.
template <std::floating_point T>
std::uint64_t param_checksum(const ParamStore<T>& params) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* data, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& p : params) {
    mix(p.name.data(), p.name.size());
    for (auto d : p.value.shape()) mix(&d, sizeof d);
    mix(p.value.ptr(), p.value.size() * sizeof(T));
  }
  return h;
}

}  // namespace lfr
