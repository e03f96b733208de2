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

#include "lfr/numerics/rng.hpp"
#include "lfr/numerics/tensor.hpp"

namespace lfr {

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <std::floating_point T>
Tensor<T> fan_in_uniform(Rng& rng, Shape shape, std::size_t fan_in) {
  Tensor<T> t(std::move(shape));
  const double bound = 1.0 / std::sqrt(double(fan_in));
  for (auto& v : t.data()) v = T(rng.uniform(-bound, bound));
  return t;
}

template <std::floating_point T>
Tensor<T> filled(Shape shape, T v) {
  return Tensor<T>(std::move(shape), v);
}

}  // namespace lfr
