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

// Conditional flow matching between a degraded latent x0 and its clean
// counterpart x1 along the straight (optimal-transport) path
//
//   x_t = t x1 + (1 - (1 - sigma_min) t) x0,     u = x1 - (1 - sigma_min) x0,
//
// and fixed-step Euler integration of a learned field from t = 0 to t = 1.

#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lfr/asr/encoder.hpp"
#include "lfr/error.hpp"
#include "lfr/kv.hpp"
#include "lfr/numerics/autograd.hpp"
#include "lfr/numerics/ops.hpp"
#include "lfr/numerics/rng.hpp"

namespace lfr {

struct FlowConfig {
  double sigma_min = 0.0;
  std::size_t steps = 3;

  void validate() const {
    if (!(sigma_min >= 0.0 && sigma_min < 1.0)) throw ConfigError("flow.sigma_min must lie in [0, 1)");
    if (steps < 1) throw ConfigError("flow.steps must be >= 1");
  }

  kv::Bindings bindings(const std::string& p = "flow.") {
    return {kv::bind(p + "sigma_min", sigma_min), kv::bind(p + "steps", steps)};
  }
};

/// Anything that maps (x_t, condition, t) to a velocity of x_t's shape.
template <class M, class T>
concept VectorFieldModel = std::floating_point<T> && requires(const M& m, Var<T> x, Var<T> c, T t) {
  { m.velocity(x, c, t) } -> std::same_as<Var<T>>;
};

template <std::floating_point T>
struct LatentPair {
  Tensor<T> source;  // z^n, or the enhanced latent
  Tensor<T> target;  // z^c
};

template <std::floating_point T>
struct PathSample {
  Tensor<T> x0, x1;
  T t;
  Tensor<T> xt, u;
};

template <std::floating_point T>
Tensor<T> ot_interpolate(const Tensor<T>& x0, const Tensor<T>& x1, T t, double sigma_min) {
  x0.require_same_shape(x1, "ot_interpolate");
  check_time(t, "ot_interpolate");
  const T a = T(1) - T(1 - sigma_min) * t;
  Tensor<T> out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t * x1[i] + a * x0[i];
  return out;
}

template <std::floating_point T>
Tensor<T> target_field(const Tensor<T>& x0, const Tensor<T>& x1, double sigma_min) {
  x0.require_same_shape(x1, "target_field");
  const T k = T(1 - sigma_min);
  Tensor<T> out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x1[i] - k * x0[i];
  return out;
}

template <std::floating_point T>
PathSample<T> make_path_sample(const Tensor<T>& x0, const Tensor<T>& x1, T t, double sigma_min) {
  return {x0, x1, t, ot_interpolate(x0, x1, t, sigma_min), target_field(x0, x1, sigma_min)};
}

/// Mean over the batch of the per-pair mean squared error between the model
/// velocity at (x_t, z^n, t_i) and the target field, with given times.
template <std::floating_point T, class Model>
  requires VectorFieldModel<Model, T>
Var<T> cfm_loss_at(const Model& model, Tape<T>& tape, std::span<const LatentPair<T>> batch,
                   std::span<const T> times, double sigma_min) {
  if (batch.empty()) throw DomainError("cfm_loss: empty batch");
  if (times.size() != batch.size()) throw ShapeError("cfm_loss: one time per pair required");
  Var<T> total{};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& p = batch[i];
    p.source.require_same_shape(p.target, "cfm_loss");
    const auto s = make_path_sample(p.source, p.target, times[i], sigma_min);
    auto v = model.velocity(tape.constant(s.xt), tape.constant(p.source), times[i]);
    if (v.value().shape() != s.u.shape()) throw ShapeError("cfm_loss: model output shape mismatch");
    auto term = mean(square(sub(v, tape.constant(s.u))));
    total = i == 0 ? term : add(total, term);
  }
  return scale(total, T(1) / T(batch.size()));
}

/// CFM loss with one t ~ U[0, 1] drawn per pair, in batch order.
template <std::floating_point T, class Model>
  requires VectorFieldModel<Model, T>
Var<T> cfm_loss(const Model& model, Tape<T>& tape, std::span<const LatentPair<T>> batch, Rng& rng,
                const FlowConfig& cfg) {
  cfg.validate();
  std::vector<T> times(batch.size());
  for (auto& t : times) t = T(rng.uniform());
  return cfm_loss_at<T>(model, tape, batch, std::span<const T>(times), cfg.sigma_min);
}

/// Explicit Euler from t = 0 to 1 in cfg.steps equal steps; returns x(1).
template <std::floating_point T, class Model>
  requires VectorFieldModel<Model, T>
Tensor<T> euler_integrate(const Model& model, const Tensor<T>& x0, const Tensor<T>& condition,
                          const FlowConfig& cfg) {
  cfg.validate();
  x0.require_same_shape(condition, "euler_integrate");
  const T dt = T(1) / T(cfg.steps);
  Tensor<T> x = x0;
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const T t = T(k) * dt;
    Tape<T> tape(false);
    Tensor<T> v;
    try {
      v = model.velocity(tape.constant(x), tape.constant(condition), t).value();
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("euler_integrate: step " + std::to_string(k) + ": " + e.what());
    }
    x.require_same_shape(v, "euler_integrate");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt * v[i];
    if (!x.all_finite()) throw NonFiniteError("euler_integrate: non-finite state after step " + std::to_string(k));
  }
  return x;
}

/// Plug-and-play refinement: integrate from the degraded latent, conditioned
/// on the same latent. The input is not modified.
template <std::floating_point T, class Model>
  requires VectorFieldModel<Model, T>
LatentSequence<T> refine(const LatentSequence<T>& z, const Model& model, const FlowConfig& cfg) {
  return {euler_integrate(model, z.frames, z.frames, cfg), Provenance::refined};
}

}  // namespace lfr
