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


// Frozen-ASR evaluation over the SNR grid under the table conditions:
// unprocessed, unprocessed+refiner, and per SE profile se, se+refiner.

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lfr/asr/decode.hpp"
#include "lfr/asr/encoder.hpp"
#include "lfr/corpus/synth.hpp"
#include "lfr/flow/flow.hpp"
#include "lfr/flow/latent_pairs.hpp"
#include "lfr/harness/report.hpp"
#include "lfr/numerics/parallel.hpp"
#include "lfr/refiner/unet.hpp"

namespace lfr {

struct EvalCondition {
  std::string label;
  std::optional<SurrogateSE> se;
  bool refine = false;
};

/// Canonical condition list. With one SE profile the SE rows are labelled
/// "se"; with several, each carries its profile.
inline std::vector<EvalCondition> table_conditions(const std::vector<SurrogateSE>& profiles, bool with_refiner) {
  std::vector<EvalCondition> out{{"unprocessed", std::nullopt, false}};
  if (with_refiner) out.push_back({"unprocessed+refiner", std::nullopt, true});
  for (const auto& se : profiles) {
    const std::string base = profiles.size() == 1 ? "se" : se.label();
    out.push_back({base, se, false});
    if (with_refiner) out.push_back({base + "+refiner", se, true});
  }
  return out;
}

/// Index of the grid value closest to `snr`; the stored SNR is measured on
/// 32-bit features, so it matches its grid point only to float precision.
inline std::size_t grid_index(const std::vector<double>& grid, double snr) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (std::abs(grid[k] - snr) < std::abs(grid[best] - snr)) best = k;
  }
  if (std::abs(grid[best] - snr) > 1e-3) {
    throw FormatError("test record SNR " + kv::format_double(snr) + " dB is not on the SNR grid");
  }
  return best;
}

/// Decodes every record of `test` under every condition. Refiner conditions
/// require `refiner`; the ASR and refiner are only read.
inline EvalReport evaluate(const CorpusSplit& test, const std::vector<double>& grid, const CtcAsr<float>& asr,
                           const UNetRefiner<float>* refiner, const std::vector<EvalCondition>& conditions,
                           const FlowConfig& flow) {
  flow.validate();
  if (test.records.empty()) throw DomainError("evaluate: empty test split");
  for (const auto& c : conditions) {
    if (c.refine && !refiner) throw DomainError("evaluate: condition '" + c.label + "' needs a refiner");
  }
  if (refiner && refiner->config().latent_dim != asr.config().dim) {
    throw ShapeError("evaluate: refiner latent_dim " + std::to_string(refiner->config().latent_dim) +
                     " does not match ASR dim " + std::to_string(asr.config().dim));
  }
  const std::size_t nc = conditions.size(), n = test.records.size();
  std::vector<ErrorCount> errs(n * nc);
  std::vector<std::size_t> slot(n);
  parallel_for(n, [&](std::size_t i) {
    const auto& u = test.records[i];
    slot[i] = grid_index(grid, u.snr_db);
    // Inputs shared by conditions differing only in the refiner are encoded once.
    std::optional<LatentSequence<float>> z;
    const SurrogateSE* z_se = nullptr;
    bool z_valid = false;
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& cond = conditions[c];
      const SurrogateSE* se = cond.se ? &*cond.se : nullptr;
      if (!z_valid || se != z_se) {
        const auto feats = se ? surrogate_enhance(u, *se) : u.noisy;
        z = asr.encode(feats, se ? Provenance::enhanced : Provenance::noisy);
        z_se = se;
        z_valid = true;
      }
      const auto& latents = cond.refine ? refine(*z, *refiner, flow).frames : z->frames;
      errs[i * nc + c] = count_errors(u.labels, greedy_decode(asr.classify(latents)));
    }
  });

  EvalReport report;
  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<ErrorCount> per(grid.size());
    std::vector<std::size_t> count(grid.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      per[slot[i]] += errs[i * nc + c];
      ++count[slot[i]];
    }
    std::vector<ReportRow> rows;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (count[k] == 0) continue;
      rows.push_back({conditions[c].label, grid[k], count[k], per[k].rate()});
    }
    report.add_condition(conditions[c].label, rows);
  }
  return report;
}

/// Corpus-level greedy WER on clean features of a split.
inline double clean_wer(const CorpusSplit& split, const CtcAsr<float>& asr) {
  std::vector<ErrorCount> errs(split.records.size());
  parallel_for(errs.size(), [&](std::size_t i) {
    const auto& u = split.records[i];
    errs[i] = count_errors(u.labels, greedy_decode(asr.classify(asr.encode(u.clean, Provenance::clean).frames)));
  });
  ErrorCount total;
  for (const auto& e : errs) total += e;
  return total.rate();
}

struct LatentDistances {
  double before = 0;  // mean per-coordinate ||z_in - z_c||^2
  double after = 0;   // mean per-coordinate ||refine(z_in) - z_c||^2
};

inline LatentDistances heldout_distances(const CorpusSplit& split, const CtcAsr<float>& asr,
                                         const UNetRefiner<float>& refiner, const LatentVariant& variant,
                                         const FlowConfig& flow) {
  auto pairs = extract_latent_pairs(split, asr, variant);
  LatentDistances d;
  d.before = mean_pair_distance(pairs);
  parallel_for(pairs.size(), [&](std::size_t i) {
    pairs[i].source = euler_integrate(refiner, pairs[i].source, pairs[i].source, flow);
  });
  d.after = mean_pair_distance(pairs);
  return d;
}

}  // namespace lfr
