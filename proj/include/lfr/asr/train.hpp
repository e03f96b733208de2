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


// CTC training of the encoder and head on clean features.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "lfr/asr/ctc.hpp"
#include "lfr/asr/decode.hpp"
#include "lfr/asr/encoder.hpp"
#include "lfr/corpus/synth.hpp"
#include "lfr/kv.hpp"
#include "lfr/numerics/adam.hpp"
#include "lfr/numerics/minibatch.hpp"
#include "lfr/numerics/parallel.hpp"
#include "lfr/numerics/rng.hpp"

namespace lfr {

struct AsrTrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double lr_decay = 0.5;    // multiplier applied when dev WER plateaus
  std::size_t patience = 2; // epochs without dev improvement before decay
  double clip_norm = 5.0;   // 0 disables
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1) throw ConfigError("asr.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("asr.batch_size must be >= 1");
    if (!(lr > 0)) throw ConfigError("asr.lr must be > 0");
    if (!(lr_decay > 0 && lr_decay <= 1)) throw ConfigError("asr.lr_decay must lie in (0, 1]");
    if (patience < 1) throw ConfigError("asr.patience must be >= 1");
    if (!(clip_norm >= 0)) throw ConfigError("asr.clip_norm must be >= 0");
  }

  kv::Bindings bindings(const std::string& p = "asr.") {
    return {kv::bind(p + "epochs", epochs),   kv::bind(p + "batch_size", batch_size),
            kv::bind(p + "lr", lr),           kv::bind(p + "lr_decay", lr_decay),
            kv::bind(p + "patience", patience), kv::bind(p + "clip_norm", clip_norm),
            kv::bind(p + "seed", seed)};
  }
};

struct AsrEpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;  // mean per-utterance CTC loss
  double dev_loss = 0;
  double dev_wer = 0;
  double lr = 0;
};

template <std::floating_point T>
struct AsrTrainResult {
  CtcAsr<T> model;  // best-dev parameters
  std::size_t best_epoch = 0;
  double best_dev_wer = 0;
  double best_dev_loss = 0;
  std::vector<AsrEpochLog> history;
};

struct SplitScore {
  ErrorCount errors;
  double mean_loss = 0;
};

/// Greedy-decoding error count and mean CTC loss of `model` on the clean
/// features of `split`.
template <std::floating_point T>
SplitScore score_clean(const CtcAsr<T>& model, const CorpusSplit& split) {
  const std::size_t n = split.records.size();
  std::vector<ErrorCount> errs(n);
  std::vector<double> losses(n);
  parallel_for(n, [&](std::size_t i) {
    const auto& u = split.records[i];
    const auto lp = model.classify(model.encode(u.clean.template cast<T>(), Provenance::clean).frames);
    errs[i] = count_errors(u.labels, greedy_decode(lp));
    losses[i] = -ctc_log_prob(lp, u.labels);
  });
  SplitScore s;
  for (std::size_t i = 0; i < n; ++i) {
    s.errors += errs[i];
    s.mean_loss += losses[i];
  }
  if (n) s.mean_loss /= double(n);
  return s;
}

/// Trains a fresh model (initialised from cfg.seed) with Adam on clean
/// features. The dev split selects the returned parameters: lowest greedy
/// WER, ties broken by lower dev loss, then by the earlier epoch.
template <std::floating_point T>
AsrTrainResult<T> train_asr(const CorpusSplit& train, const CorpusSplit& dev, const EncoderConfig& enc,
                            const AsrTrainConfig& cfg,
                            const std::function<void(const AsrEpochLog&)>& on_epoch = {}) {
  cfg.validate();
  enc.validate();
  if (train.records.empty() || dev.records.empty()) throw DomainError("train_asr: empty train or dev split");
  CtcAsr<T> model(enc, cfg.seed);
  AdamState<T> opt(AdamHyper{cfg.lr});

  std::vector<Tensor<T>> feats;
  feats.reserve(train.records.size());
  for (const auto& u : train.records) feats.push_back(u.clean.template cast<T>());

  AsrTrainResult<T> best{model, 0, std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity(), {}};
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train.records.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::stream(cfg.seed, 0xa5a5, epoch);
    rng.shuffle(order);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - b0);
      double loss = 0;
      try {
        loss = batch_gradients(model.params(), n, [&](std::size_t i, Tape<T>& tape) {
          const std::size_t k = order[b0 + i];
          return ctc_loss(model.classify(model.encode(tape, feats[k])), train.records[k].labels);
        });
        clip_grad_norm(model.params(), cfg.clip_norm);
        opt.step(model.params());
      } catch (const NonFiniteError& e) {
        throw NonFiniteError("train_asr diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batches) + " (lr " + kv::format_double(opt.hyper().lr) +
                             "): " + e.what());
      }
      loss_sum += loss;
      ++batches;
    }

    const auto score = score_clean(model, dev);
    AsrEpochLog log{epoch, loss_sum / double(batches), score.mean_loss, score.errors.rate(), opt.hyper().lr};
    best.history.push_back(log);
    if (on_epoch) on_epoch(log);

    const bool better = log.dev_wer < best.best_dev_wer ||
                        (log.dev_wer == best.best_dev_wer && log.dev_loss < best.best_dev_loss);
    if (better) {
      best.model = model;
      best.best_epoch = epoch;
      best.best_dev_wer = log.dev_wer;
      best.best_dev_loss = log.dev_loss;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      opt.hyper().lr *= cfg.lr_decay;
      since_best = 0;
    }
  }
  return best;
}

}  // namespace lfr
