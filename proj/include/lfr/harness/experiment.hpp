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


// Full experiment description: every sub-config under its dotted prefix.
//
//   corpus.*         synthetic corpus spec and master seed
//   encoder.*        ASR encoder (feature_dim, vocab_size follow the corpus)
//   asr.*            ASR training
//   refiner.*        U-Net (latent_dim follows encoder.dim)
//   refiner_train.*  refiner training
//   flow.*           path and sampler
//   se.*             surrogate enhancement profiles, "alpha:gamma" each
//   paths.*          data and output directories

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lfr/asr/encoder.hpp"
#include "lfr/binary_io.hpp"
#include "lfr/asr/train.hpp"
#include "lfr/corpus/synth.hpp"
#include "lfr/flow/flow.hpp"
#include "lfr/kv.hpp"
#include "lfr/refiner/train.hpp"
#include "lfr/refiner/unet.hpp"

namespace lfr {

struct ExperimentConfig {
  CorpusSpec corpus;
  EncoderConfig encoder;
  AsrTrainConfig asr;
  RefinerConfig refiner;
  RefinerTrainConfig refiner_train;
  FlowConfig flow;
  std::vector<std::string> se_profiles{"0.7:0.1"};
  std::uint64_t se_seed = 77;
  std::string data_dir = "data";
  std::string out_dir = "run";

  kv::Bindings bindings() {
    kv::Bindings b;
    auto add = [&](kv::Bindings more) { b.insert(b.end(), more.begin(), more.end()); };
    add(corpus.bindings("corpus."));
    add(encoder.bindings("encoder.", false));
    add(asr.bindings("asr."));
    add(refiner.bindings("refiner.", false));
    add(refiner_train.bindings("refiner_train."));
    add(flow.bindings("flow."));
    b.push_back(kv::bind("se.profiles", se_profiles));
    b.push_back(kv::bind("se.seed", se_seed));
    b.push_back(kv::bind("paths.data_dir", data_dir));
    b.push_back(kv::bind("paths.out_dir", out_dir));
    return b;
  }

  /// Copies the corpus-determined sizes into the model configs.
  void derive() {
    encoder.feature_dim = corpus.feature_dim;
    encoder.vocab_size = corpus.vocab_size;
    refiner.latent_dim = encoder.dim;
  }

  std::vector<SurrogateSE> se_list() const {
    std::vector<SurrogateSE> out;
    for (const auto& p : se_profiles) {
      SurrogateSE se;
      try {
        se = parse_se_profile(p);
      } catch (const DomainError& e) {
        throw ConfigError(std::string("se.profiles: ") + e.what());
      }
      se.seed = se_seed;
      out.push_back(se);
    }
    return out;
  }

  void validate() const {
    corpus.validate();
    encoder.validate();
    asr.validate();
    refiner.validate();
    refiner_train.validate();
    flow.validate();
    if (encoder.feature_dim != corpus.feature_dim || encoder.vocab_size != corpus.vocab_size) {
      throw ConfigError("encoder io dims do not follow the corpus");
    }
    if (refiner.latent_dim != encoder.dim) throw ConfigError("refiner.latent_dim must equal encoder.dim");
    se_list();
    if (data_dir.empty() || out_dir.empty()) throw ConfigError("paths.data_dir and paths.out_dir must be non-empty");
  }

  std::string echo() const {
    auto copy = *this;
    return kv::to_text(kv::dump(copy.bindings()));
  }

  static ExperimentConfig from_text(std::string_view text) {
    ExperimentConfig c;
    kv::apply(c.bindings(), kv::parse(text));
    c.derive();
    c.validate();
    return c;
  }

  static ExperimentConfig defaults() {
    ExperimentConfig c;
    c.derive();
    c.validate();
    return c;
  }
};

/// Loads a config file; a missing file is an IoError, a bad entry a ConfigError.
inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const IoError&) {
    throw IoError("config file '" + path.string() + "' not found or unreadable");
  }
  try {
    return ExperimentConfig::from_text(text);
  } catch (const ConfigError& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
}

}  // namespace lfr
