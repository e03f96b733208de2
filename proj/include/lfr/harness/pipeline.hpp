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


// The four pipeline stages on disk: gen-data, train-asr, train-refiner, eval.

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "lfr/asr/train.hpp"
#include "lfr/corpus/lfds.hpp"
#include "lfr/flow/latent_pairs.hpp"
#include "lfr/harness/checkpoint.hpp"
#include "lfr/harness/evaluate.hpp"
#include "lfr/harness/experiment.hpp"
#include "lfr/harness/report.hpp"
#include "lfr/numerics/minibatch.hpp"
#include "lfr/refiner/train.hpp"

namespace lfr {

using Logger = std::function<void(const std::string&)>;

namespace fs = std::filesystem;

struct RunPaths {
  fs::path data_dir;
  fs::path asr_ckpt;
  fs::path refiner_ckpt;
  fs::path report_csv;
  fs::path report_txt;

  static RunPaths under(const fs::path& data_dir, const fs::path& out_dir) {
    return {data_dir, out_dir / "asr.ckpt", out_dir / "refiner.ckpt", out_dir / "report.csv", out_dir / "report.txt"};
  }
};

inline void log_block(const Logger& log, const std::string& title, const std::string& text) {
  if (!log) return;
  log(title);
  for (const auto& line : kv::split(text, '\n')) log("  " + line);
}

/// Reads a corpus directory and checks it was generated with `cfg.corpus`.
inline Corpus load_corpus_for(const ExperimentConfig& cfg, const fs::path& dir) {
  for (const char* s : {"train", "dev", "test"}) {
    if (!fs::exists(split_path(dir, s))) {
      throw IoError("dataset split '" + split_path(dir, s).string() + "' not found (run gen-data first)");
    }
  }
  Corpus c = read_corpus(dir);
  if (c.test.spec_echo != cfg.corpus.echo()) {
    throw ConfigError("dataset in '" + dir.string() + "' was generated with a different corpus config");
  }
  return c;
}

inline Corpus stage_gen_data(const ExperimentConfig& cfg, const fs::path& out_dir, const Logger& log = {}) {
  if (log) log("gen-data: corpus seed " + std::to_string(cfg.corpus.seed));
  Corpus c = build_corpus(cfg.corpus);
  write_corpus(c, out_dir);
  if (log) {
    log("gen-data: wrote " + std::to_string(c.train.records.size()) + "/" + std::to_string(c.dev.records.size()) +
        "/" + std::to_string(c.test.records.size()) + " records to " + out_dir.string());
  }
  return c;
}

inline CtcAsr<float> stage_train_asr(const ExperimentConfig& cfg, const Corpus& corpus, const fs::path& ckpt,
                                     const Logger& log = {}) {
  if (log) log("train-asr: seed " + std::to_string(cfg.asr.seed));
  auto res = train_asr<float>(corpus.train, corpus.dev, cfg.encoder, cfg.asr, [&](const AsrEpochLog& e) {
    if (!log) return;
    log("train-asr: epoch " + std::to_string(e.epoch) + " loss " + kv::format_double(e.train_loss) +
        " dev_loss " + kv::format_double(e.dev_loss) + " dev_wer " + kv::format_double(e.dev_wer) + " lr " +
        kv::format_double(e.lr));
  });
  save_checkpoint(make_checkpoint(res.model, {std::uint32_t(res.best_epoch), res.best_dev_wer, cfg.asr.seed}), ckpt);
  if (log) {
    log("train-asr: best epoch " + std::to_string(res.best_epoch) + " dev_wer " +
        kv::format_double(res.best_dev_wer) + " -> " + ckpt.string());
  }
  return res.model;
}

/// Training pairs: variant 0 is the noisy input, then one variant per SE
/// profile. Dev pairs concatenate all variants.
inline RefinerData<float> refiner_pairs(const ExperimentConfig& cfg, const Corpus& corpus,
                                        const CtcAsr<float>& asr) {
  std::vector<LatentVariant> variants{LatentVariant::noisy()};
  for (const auto& se : cfg.se_list()) variants.push_back(LatentVariant::enhanced(se));
  RefinerData<float> data;
  for (const auto& v : variants) {
    data.train.push_back(extract_latent_pairs(corpus.train, asr, v));
    auto dev = extract_latent_pairs(corpus.dev, asr, v);
    data.dev.insert(data.dev.end(), dev.begin(), dev.end());
  }
  return data;
}

inline UNetRefiner<float> stage_train_refiner(const ExperimentConfig& cfg, const Corpus& corpus,
                                              const fs::path& asr_ckpt, const fs::path& out_ckpt,
                                              const Logger& log = {}) {
  const auto asr_bytes = io::read_file(asr_ckpt);
  const auto asr = asr_from_checkpoint(decode_checkpoint(asr_bytes, asr_ckpt.string(), ModelKind::asr),
                                       asr_ckpt.string());
  if (asr.config().dim != cfg.refiner.latent_dim) {
    throw ConfigError("ASR checkpoint dim " + std::to_string(asr.config().dim) +
                      " does not match refiner.latent_dim " + std::to_string(cfg.refiner.latent_dim));
  }
  const auto before = param_checksum(asr.params());
  if (log) log("train-refiner: seed " + std::to_string(cfg.refiner_train.seed));
  const auto data = refiner_pairs(cfg, corpus, asr);
  auto res = train_refiner<float>(data, cfg.refiner, cfg.flow, cfg.refiner_train, [&](const RefinerEpochLog& e) {
    if (!log) return;
    log("train-refiner: epoch " + std::to_string(e.epoch) + " loss " + kv::format_double(e.train_loss) +
        " dev_cfm " + kv::format_double(e.dev_loss));
  });
  if (param_checksum(asr.params()) != before || io::read_file(asr_ckpt) != asr_bytes) {
    throw std::logic_error("train-refiner: frozen ASR parameters changed");
  }
  save_checkpoint(
      make_checkpoint(res.model, {std::uint32_t(res.best_epoch), res.best_dev_loss, cfg.refiner_train.seed}),
      out_ckpt);
  if (log) {
    log("train-refiner: dev_cfm " + kv::format_double(res.initial_dev_loss) + " at init, best " +
        kv::format_double(res.best_dev_loss) + " at epoch " + std::to_string(res.best_epoch) + " -> " +
        out_ckpt.string());
  }
  return res.model;
}

inline EvalReport stage_eval(const ExperimentConfig& cfg, const Corpus& corpus, const fs::path& asr_ckpt,
                             const std::optional<fs::path>& refiner_ckpt, const Logger& log = {}) {
  const auto asr_bytes = io::read_file(asr_ckpt);
  const auto asr = asr_from_checkpoint(decode_checkpoint(asr_bytes, asr_ckpt.string(), ModelKind::asr),
                                       asr_ckpt.string());
  const auto spec = spec_from_echo(corpus.test.spec_echo);
  if (asr.config().feature_dim != spec.feature_dim || asr.config().vocab_size != spec.vocab_size) {
    throw ConfigError("ASR checkpoint (feature_dim " + std::to_string(asr.config().feature_dim) + ", vocab " +
                      std::to_string(asr.config().vocab_size) + ") does not match the dataset");
  }
  std::optional<UNetRefiner<float>> refiner;
  if (refiner_ckpt) refiner = load_refiner(*refiner_ckpt);
  if (log) log("eval: clean test WER " + kv::format_double(clean_wer(corpus.test, asr)));
  const auto report = evaluate(corpus.test, spec.snr_grid, asr, refiner ? &*refiner : nullptr,
                               table_conditions(cfg.se_list(), refiner.has_value()), cfg.flow);
  if (refiner && log) {
    const auto d = heldout_distances(corpus.test, asr, *refiner, LatentVariant::noisy(), cfg.flow);
    log("eval: held-out latent distance " + kv::format_double(d.before) + " -> " + kv::format_double(d.after));
  }
  if (io::read_file(asr_ckpt) != asr_bytes) throw std::logic_error("eval: ASR checkpoint changed on disk");
  log_block(log, "eval: report (WER %)", report_table(report));
  return report;
}

/// Runs all four stages into `paths`, writing both report formats.
inline EvalReport run_pipeline(const ExperimentConfig& cfg, const RunPaths& paths, const Logger& log = {}) {
  log_block(log, "resolved config:", cfg.echo());
  stage_gen_data(cfg, paths.data_dir, log);
  const Corpus corpus = load_corpus_for(cfg, paths.data_dir);
  stage_train_asr(cfg, corpus, paths.asr_ckpt, log);
  stage_train_refiner(cfg, corpus, paths.asr_ckpt, paths.refiner_ckpt, log);
  const auto report = stage_eval(cfg, corpus, paths.asr_ckpt, paths.refiner_ckpt, log);
  write_report(report, paths.report_csv, "csv");
  write_report(report, paths.report_txt, "text");
  return report;
}

}  // namespace lfr
