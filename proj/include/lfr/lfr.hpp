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


// Umbrella header.

#pragma once

#include "lfr/asr/ctc.hpp"
#include "lfr/asr/decode.hpp"
#include "lfr/asr/encoder.hpp"
#include "lfr/asr/train.hpp"
#include "lfr/corpus/lfds.hpp"
#include "lfr/corpus/synth.hpp"
#include "lfr/flow/flow.hpp"
#include "lfr/flow/latent_pairs.hpp"
#include "lfr/harness/checkpoint.hpp"
#include "lfr/harness/evaluate.hpp"
#include "lfr/harness/experiment.hpp"
#include "lfr/harness/pipeline.hpp"
#include "lfr/harness/report.hpp"
#include "lfr/harness/selftest.hpp"
#include "lfr/numerics/adam.hpp"
#include "lfr/numerics/finite_diff.hpp"
#include "lfr/numerics/ops.hpp"
#include "lfr/refiner/train.hpp"
#include "lfr/refiner/unet.hpp"
