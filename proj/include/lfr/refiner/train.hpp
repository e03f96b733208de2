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


// Conditional flow-matching training of the U-Net vector field.

#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "lfr/flow/flow.hpp"
#include "lfr/kv.hpp"
#include "lfr/numerics/adam.hpp"
#include "lfr/numerics/minibatch.hpp"
#include "lfr/numerics/parallel.hpp"
#include "lfr/numerics/rng.hpp"
#include "lfr/refiner/unet.hpp"

namespace lfr {

struct RefinerTrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double clip_norm = 1.0;  // 0 disables
  std::uint64_t seed = 2;

  void validate() const {
    if (epochs < 1) throw ConfigError("refiner_train.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("refiner_train.batch_size must be >= 1");
    if (!(lr > 0)) throw ConfigError("refiner_train.lr must be > 0");
    if (!(clip_norm >= 0)) throw ConfigError("refiner_train.clip_norm must be >= 0");
  }

  kv::Bindings bindings(const std::string& p = "refiner_train.") {
    return {kv::bind(p + "epochs", epochs), kv::bind(p + "batch_size", batch_size), kv::bind(p + "lr", lr),
            kv::bind(p + "clip_norm", clip_norm), kv::bind(p + "seed", seed)};
  }
};

/// Training pairs. `train[v][i]` is utterance i under source variant v; each
/// epoch draws one variant per utterance. All variants must have the same
/// utterance count.
template <std::floating_point T>
struct RefinerData {
  std::vector<std::vector<LatentPair<T>>> train;
  std::vector<LatentPair<T>> dev;
};

struct RefinerEpochLog {
  std::size_t epoch = 0;
  double train_loss = 0;
  double dev_loss = 0;
};

template <std::floating_point T>
struct RefinerTrainResult {
  UNetRefiner<T> model;  // best-dev parameters
  std::size_t best_epoch = 0;
  double best_dev_loss = 0;
  double initial_dev_loss = 0;
  std::vector<RefinerEpochLog> history;
};

/// Fixed per-pair times for dev evaluation, reproducible from the seed.
template <std::floating_point T>
std::vector<T> fixed_times(std::size_t n, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 0xde7);
  std::vector<T> t(n);
  for (auto& v : t) v = T(rng.uniform());
  return t;
}

/// Mean cfm loss over `pairs` at the given times, without recording.
template <std::floating_point T>
double cfm_loss_fixed(const UNetRefiner<T>& model, const std::vector<LatentPair<T>>& pairs,
                      const std::vector<T>& times, double sigma_min) {
  if (pairs.empty()) throw DomainError("cfm_loss_fixed: no pairs");
  std::vector<double> per(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    Tape<T> tape(false);
    per[i] = double(cfm_loss_at<T>(model, tape, std::span<const LatentPair<T>>(&pairs[i], 1),
                                   std::span<const T>(&times[i], 1), sigma_min)
                        .value()
                        .item());
  });
  double s = 0;
  for (double v : per) s += v;
  return s / double(per.size());
}

/// Trains a fresh refiner (initialised from cfg.seed) with Adam on the cfm
/// objective. Returns the parameters with the lowest dev loss at fixed t
/// draws; epoch 0 (the zero-initialised model) competes too.
template <std::floating_point T>
RefinerTrainResult<T> train_refiner(const RefinerData<T>& data, const RefinerConfig& rcfg, const FlowConfig& flow,
                                    const RefinerTrainConfig& cfg,
                                    const std::function<void(const RefinerEpochLog&)>& on_epoch = {}) {
  cfg.validate();
  rcfg.validate();
  flow.validate();
  if (data.train.empty() || data.train.front().empty() || data.dev.empty()) {
    throw DomainError("train_refiner: empty train or dev pairs");
  }
  const std::size_t n = data.train.front().size();
  for (const auto& v : data.train) {
    if (v.size() != n) throw ShapeError("train_refiner: variants differ in utterance count");
  }
  for (const auto& v : data.train) {
    for (const auto& p : v) {
      if (p.source.dim(1) != rcfg.latent_dim) {
        throw ShapeError("train_refiner: latent dim " + std::to_string(p.source.dim(1)) +
                         " does not match refiner.latent_dim " + std::to_string(rcfg.latent_dim));
      }
    }
  }

  UNetRefiner<T> model = init_params<T>(rcfg, cfg.seed);
  AdamState<T> opt(AdamHyper{cfg.lr});
  const auto dev_times = fixed_times<T>(data.dev.size(), cfg.seed);
  const double init_dev = cfm_loss_fixed(model, data.dev, dev_times, flow.sigma_min);

  RefinerTrainResult<T> best{model, 0, init_dev, init_dev, {}};
  std::vector<std::size_t> order(n);
  std::vector<const LatentPair<T>*> chosen(n);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng = Rng::stream(cfg.seed, 0xf10, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = std::size_t(rng.uniform_int(0, std::int64_t(data.train.size()) - 1));
      chosen[i] = &data.train[v][order[i]];
    }
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size) {
      const std::size_t m = std::min(cfg.batch_size, n - b0);
      std::vector<T> times(m);
      for (auto& t : times) t = T(rng.uniform());
      try {
        loss_sum += batch_gradients(model.params(), m, [&](std::size_t i, Tape<T>& tape) {
          return cfm_loss_at<T>(model, tape, std::span<const LatentPair<T>>(chosen[b0 + i], 1),
                                std::span<const T>(&times[i], 1), flow.sigma_min);
        });
        clip_grad_norm(model.params(), cfg.clip_norm);
        opt.step(model.params());
      } catch (const NonFiniteError& e) {
        throw NonFiniteError("train_refiner diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batches) + ": " + e.what());
      }
      ++batches;
    }
    RefinerEpochLog log{epoch, loss_sum / double(batches),
                        cfm_loss_fixed(model, data.dev, dev_times, flow.sigma_min)};
    best.history.push_back(log);
    if (on_epoch) on_epoch(log);
    if (log.dev_loss < best.best_dev_loss) {
      best.model = model;
      best.best_epoch = epoch;
      best.best_dev_loss = log.dev_loss;
    }
  }
  return best;
}

}  // namespace lfr
