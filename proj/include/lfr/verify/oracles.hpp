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


// Independent reference implementations used only for verification.

#pragma once

#include <cmath>
#include <vector>

#include "lfr/asr/ctc.hpp"
#include "lfr/numerics/tensor.hpp"

namespace lfr::oracle {

/// B mapping: drop adjacent repeats, then blanks.
inline Labels collapse(const std::vector<int>& path, int blank) {
  Labels out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != blank) out.push_back(s);
    prev = s;
  }
  return out;
}

/// ln P(target | logpost) by summing the probability of every one of the
/// C^T frame paths whose collapse equals the target. Returns -inf when no
/// path matches. Exponential; small T only.
inline double ctc_brute_force(const Tensor<double>& logpost, const Labels& target) {
  const std::size_t T = logpost.dim(0), C = logpost.dim(1);
  const int blank = int(C) - 1;
  std::vector<int> path(T, 0);
  double total = 0;
  for (;;) {
    if (collapse(path, blank) == target) {
      double lp = 0;
      for (std::size_t t = 0; t < T; ++t) lp += logpost[t * C + std::size_t(path[t])];
      total += std::exp(lp);
    }
    std::size_t t = 0;
    while (t < T && ++path[t] == int(C)) path[t++] = 0;
    if (t == T) break;
  }
  return std::log(total);
}

/// Row-wise (x - mean) / sqrt(var + eps), population variance.
inline Tensor<double> layer_norm_rows(const Tensor<double>& x, double eps) {
  const std::size_t R = x.dim(0), C = x.dim(1);
  Tensor<double> out(x.shape());
  for (std::size_t r = 0; r < R; ++r) {
    double m = 0;
    for (std::size_t c = 0; c < C; ++c) m += x[r * C + c];
    m /= double(C);
    double v = 0;
    for (std::size_t c = 0; c < C; ++c) v += (x[r * C + c] - m) * (x[r * C + c] - m);
    v /= double(C);
    for (std::size_t c = 0; c < C; ++c) out[r * C + c] = (x[r * C + c] - m) / std::sqrt(v + eps);
  }
  return out;
}

/// Direct sliding-window convolution, zero padding.
inline Tensor<double> conv1d_direct(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                                    std::size_t stride, std::size_t pad) {
  const std::size_t L = x.dim(0), cin = x.dim(1), K = w.dim(0), cout = w.dim(2);
  const std::size_t lout = (L + 2 * pad - K) / stride + 1;
  Tensor<double> out({lout, cout});
  for (std::size_t t = 0; t < lout; ++t)
    for (std::size_t o = 0; o < cout; ++o) {
      double s = b[o];
      for (std::size_t j = 0; j < K; ++j) {
        const long src = long(t * stride + j) - long(pad);
        if (src < 0 || src >= long(L)) continue;
        for (std::size_t c = 0; c < cin; ++c) s += x[std::size_t(src) * cin + c] * w[(j * cin + c) * cout + o];
      }
      out[t * cout + o] = s;
    }
  return out;
}

}  // namespace lfr::oracle
