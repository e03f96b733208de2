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

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "lfr/asr/ctc.hpp"
#include "lfr/error.hpp"
#include "lfr/numerics/tensor.hpp"

namespace lfr {

/// Best-path decoding: per-frame argmax (ties go to the lowest class), then
/// collapse adjacent repeats and drop blanks.
template <std::floating_point T>
Labels greedy_decode(const Tensor<T>& logpost) {
  if (logpost.rank() != 2) throw ShapeError("greedy_decode: expected (frames x classes)");
  const std::size_t frames = logpost.dim(0), classes = logpost.dim(1);
  const int blank = int(classes) - 1;
  Labels out;
  int prev = -1;
  for (std::size_t t = 0; t < frames; ++t) {
    int best = 0;
    for (std::size_t k = 1; k < classes; ++k) {
      if (logpost[t * classes + k] > logpost[t * classes + std::size_t(best)]) best = int(k);
    }
    if (best != prev && best != blank) out.push_back(best);
    prev = best;
  }
  return out;
}

/// Levenshtein distance with unit substitution/insertion/deletion costs.
template <class Sym>
std::size_t edit_distance(std::span<const Sym> ref, std::span<const Sym> hyp) {
  std::vector<std::size_t> row(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (ref[i - 1] == hyp[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[hyp.size()];
}

struct ErrorCount {
  std::size_t edits = 0;
  std::size_t ref_len = 0;

  double rate() const { return ref_len == 0 ? 0.0 : double(edits) / double(ref_len); }
  ErrorCount& operator+=(const ErrorCount& o) {
    edits += o.edits;
    ref_len += o.ref_len;
    return *this;
  }
};

inline ErrorCount count_errors(const Labels& reference, const Labels& hypothesis) {
  if (reference.empty()) throw DomainError("wer: empty reference");
  return {edit_distance<int>(reference, hypothesis), reference.size()};
}

/// Edit distance over |reference|. Symbols play the role of words here.
inline double wer(const Labels& reference, const Labels& hypothesis) {
  return count_errors(reference, hypothesis).rate();
}

}  // namespace lfr
