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


// lfr: command-line front end for the latent refinement experiment.
//
//   lfr gen-data      --config c.cfg --out data/
//   lfr train-asr     --config c.cfg --data data/ --out run/asr.ckpt
//   lfr train-refiner --config c.cfg --data data/ --asr-ckpt run/asr.ckpt --out run/refiner.ckpt
//   lfr eval          --config c.cfg --data data/ --asr-ckpt run/asr.ckpt [--refiner-ckpt run/refiner.ckpt]
//   lfr selftest
//
// Exit codes: 0 ok, 1 internal, 2 usage, 3 config, 4 io, 5 format,
// 6 non-finite, 7 invalid argument, 8 selftest failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "lfr/lfr.hpp"

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kConfig = 3, kIo = 4, kFormat = 5, kNonFinite = 6, kArgument = 7,
            kSelftest = 8 };

void log_line(const std::string& s) { std::cerr << "[lfr] " << s << "\n"; }

lfr::ExperimentConfig resolve(const std::string& path, const std::vector<std::string>& overrides) {
  lfr::ExperimentConfig cfg;
  if (!path.empty()) {
    try {
      lfr::kv::apply(cfg.bindings(), lfr::kv::parse(lfr::io::read_text(path)));
    } catch (const lfr::ConfigError& e) {
      throw lfr::ConfigError("config '" + path + "': " + e.what());
    }
  }
  lfr::kv::Entries set;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw lfr::ConfigError("--set expects key=value, got '" + o + "'");
    set.emplace_back(std::string(lfr::kv::trim(o.substr(0, eq))), std::string(lfr::kv::trim(o.substr(eq + 1))));
  }
  lfr::kv::apply(cfg.bindings(), set);
  cfg.derive();
  cfg.validate();
  return cfg;
}

int report_error(const char* kind, const std::exception& e, int code) {
  std::cerr << "lfr: " << kind << " error: " << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent flow-matching refinement for CTC recognition on a synthetic corpus"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "experiment config file (key = value)")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "override one config entry, key=value (repeatable)");

  std::string out, data, asr_ckpt, refiner_ckpt, csv_out, table_out;

  auto* gen = app.add_subcommand("gen-data", "generate the train/dev/test corpus");
  gen->add_option("--out", out, "output directory (default paths.data_dir)");

  auto* tasr = app.add_subcommand("train-asr", "train the CTC recognizer on clean features");
  tasr->add_option("--data", data, "dataset directory (default paths.data_dir)");
  tasr->add_option("--out", out, "checkpoint path (default <paths.out_dir>/asr.ckpt)");

  auto* tref = app.add_subcommand("train-refiner", "train the flow-matching refiner on frozen-ASR latents");
  tref->add_option("--data", data, "dataset directory (default paths.data_dir)");
  tref->add_option("--asr-ckpt", asr_ckpt, "ASR checkpoint")->required();
  tref->add_option("--out", out, "checkpoint path (default <paths.out_dir>/refiner.ckpt)");

  auto* ev = app.add_subcommand("eval", "evaluate WER per condition and SNR");
  ev->add_option("--data", data, "dataset directory (default paths.data_dir)");
  ev->add_option("--asr-ckpt", asr_ckpt, "ASR checkpoint")->required();
  ev->add_option("--refiner-ckpt", refiner_ckpt, "refiner checkpoint (adds the +refiner conditions)");
  ev->add_option("--csv", csv_out, "CSV report path (default <paths.out_dir>/report.csv)");
  ev->add_option("--table", table_out, "text table path (default <paths.out_dir>/report.txt)");

  auto* self = app.add_subcommand("selftest", "run the oracle and gradient suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (self->parsed()) {
      const bool ok = lfr::run_selftest(log_line);
      log_line(ok ? "selftest passed" : "selftest FAILED");
      return ok ? kOk : kSelftest;
    }

    const auto cfg = resolve(config_path, overrides);
    lfr::log_block(log_line, "resolved config:", cfg.echo());
    namespace fs = std::filesystem;
    const fs::path data_dir = data.empty() ? fs::path(cfg.data_dir) : fs::path(data);
    const fs::path out_dir(cfg.out_dir);

    if (gen->parsed()) {
      lfr::stage_gen_data(cfg, out.empty() ? fs::path(cfg.data_dir) : fs::path(out), log_line);
    } else if (tasr->parsed()) {
      const auto corpus = lfr::load_corpus_for(cfg, data_dir);
      lfr::stage_train_asr(cfg, corpus, out.empty() ? out_dir / "asr.ckpt" : fs::path(out), log_line);
    } else if (tref->parsed()) {
      const auto corpus = lfr::load_corpus_for(cfg, data_dir);
      lfr::stage_train_refiner(cfg, corpus, asr_ckpt, out.empty() ? out_dir / "refiner.ckpt" : fs::path(out),
                               log_line);
    } else if (ev->parsed()) {
      const auto corpus = lfr::load_corpus_for(cfg, data_dir);
      std::optional<fs::path> ref;
      if (!refiner_ckpt.empty()) ref = refiner_ckpt;
      const auto report = lfr::stage_eval(cfg, corpus, asr_ckpt, ref, log_line);
      const fs::path csv = csv_out.empty() ? out_dir / "report.csv" : fs::path(csv_out);
      const fs::path txt = table_out.empty() ? out_dir / "report.txt" : fs::path(table_out);
      lfr::write_report(report, csv, "csv");
      lfr::write_report(report, txt, "text");
      log_line("eval: wrote " + csv.string() + " and " + txt.string());
    }
    return kOk;
  } catch (const lfr::ConfigError& e) {
    return report_error("config", e, kConfig);
  } catch (const lfr::IoError& e) {
    return report_error("io", e, kIo);
  } catch (const lfr::FormatError& e) {
    return report_error("format", e, kFormat);
  } catch (const lfr::NonFiniteError& e) {
    return report_error("non-finite", e, kNonFinite);
  } catch (const std::invalid_argument& e) {
    return report_error("argument", e, kArgument);
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("io", e, kIo);
  } catch (const std::exception& e) {
    return report_error("internal", e, kInternal);
  }
}
