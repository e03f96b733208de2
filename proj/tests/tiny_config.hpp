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


// A few-second experiment for tests that run whole pipeline stages.

#pragma once

#include <string>

#include "lfr/harness/experiment.hpp"

namespace lfr::testing {

inline const char* kTinyConfig = R"(# tiny pipeline
corpus.vocab_size = 4
corpus.feature_dim = 8
corpus.max_len = 3
corpus.train_count = 16
corpus.dev_count = 4
corpus.test_count = 4
encoder.dim = 8
encoder.heads = 2
encoder.ffn_dim = 16
encoder.layers = 1
asr.epochs = 3
asr.batch_size = 8
asr.lr = 0.003
refiner.base_channels = 4
refiner.time_dim = 4
refiner.groups = 2
refiner_train.epochs = 2
refiner_train.batch_size = 8
)";

inline ExperimentConfig tiny_config() { return ExperimentConfig::from_text(kTinyConfig); }

}  // namespace lfr::testing
