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


// Frame-synchronous (degraded, clean) latent pairs from a frozen encoder.

#pragma once

#include <string>
#include <vector>

#include "lfr/asr/encoder.hpp"
#include "lfr/corpus/synth.hpp"
#include "lfr/flow/flow.hpp"
#include "lfr/numerics/parallel.hpp"

namespace lfr {

enum class PairSource { clean, noisy, enhanced };

struct LatentVariant {
  PairSource source = PairSource::noisy;
  SurrogateSE se{};  // used when source == enhanced

  static LatentVariant clean() { return {PairSource::clean, {}}; }
  static LatentVariant noisy() { return {PairSource::noisy, {}}; }
  static LatentVariant enhanced(const SurrogateSE& se) { return {PairSource::enhanced, se}; }

  std::string label() const {
    switch (source) {
      case PairSource::clean: return "clean";
      case PairSource::noisy: return "noisy";
      case PairSource::enhanced: return se.label();
    }
    return "?";
  }
};

/// Input features of `u` for the given variant.
inline Tensor<float> variant_features(const Utterance& u, const LatentVariant& v) {
  switch (v.source) {
    case PairSource::clean: return u.clean;
    case PairSource::noisy: return u.noisy;
    case PairSource::enhanced: return surrogate_enhance(u, v.se);
  }
  throw DomainError("variant_features: unknown source");
}

/// One pair per record: source = encode(variant features), target =
/// encode(clean features). Order follows the split.
template <std::floating_point T>
std::vector<LatentPair<T>> extract_latent_pairs(const CorpusSplit& split, const CtcAsr<T>& asr,
                                                const LatentVariant& variant) {
  std::vector<LatentPair<T>> pairs(split.records.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto& u = split.records[i];
    pairs[i].target = asr.encode(u.clean.template cast<T>(), Provenance::clean).frames;
    pairs[i].source = variant.source == PairSource::clean
                          ? pairs[i].target
                          : asr.encode(variant_features(u, variant).template cast<T>(),
                                       variant.source == PairSource::noisy ? Provenance::noisy : Provenance::enhanced)
                                .frames;
  });
  return pairs;
}

/// Mean over pairs of the per-pair mean squared coordinate distance.
template <std::floating_point T>
double mean_pair_distance(const std::vector<LatentPair<T>>& pairs) {
  if (pairs.empty()) throw DomainError("mean_pair_distance: no pairs");
  double s = 0;
  for (const auto& p : pairs) s += squared_distance(p.source, p.target) / double(p.source.size());
  return s / double(pairs.size());
}

}  // namespace lfr
