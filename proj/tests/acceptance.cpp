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


// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: acceptance <work-dir>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lfr/lfr.hpp"

namespace fs = std::filesystem;
using namespace lfr;

namespace {

struct Verdict {
  std::string id;
  bool pass = false;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

void progress(const std::string& s) { std::cerr << "[acceptance] " << s << std::endl; }

std::string suite_detail(const verify::SuiteResult& r) {
  return r.name + " " + std::to_string(r.cases) + " cases, worst " + fmt(r.worst, 3) + (r.detail.empty() ? "" : " (" + r.detail + ")");
}

Verdict ac1() {
  Clock c;
  const auto r = verify::ctc_oracle_suite();
  const double s = c.seconds();
  return {"AC1", r.pass && r.cases >= 200 && s < 10.0, suite_detail(r) + ", " + fmt(s, 3) + " s"};
}

Verdict ac2() {
  Clock c;
  bool pass = true;
  std::string detail;
  for (const auto& r : {verify::ctc_grad_suite(), verify::cfm_grad_suite(), verify::unet_grad_suite()}) {
    pass = pass && r.pass && r.cases >= 20;
    detail += suite_detail(r) + "; ";
  }
  const double s = c.seconds();
  return {"AC2", pass && s < 120.0, detail + fmt(s, 3) + " s"};
}

Verdict ac3() {
  const auto r = verify::flow_exactness_suite();
  return {"AC3", r.pass, suite_detail(r)};
}

struct Run {
  RunPaths paths;
  EvalReport report;
  double seconds = 0;
};

Run run_default(const ExperimentConfig& cfg, const fs::path& dir, const std::string& tag) {
  fs::remove_all(dir);
  Run r{RunPaths::under(dir / "data", dir / "run"), {}, 0};
  Clock c;
  r.report = run_pipeline(cfg, r.paths, [&](const std::string& line) { progress(tag + " " + line); });
  r.seconds = c.seconds();
  return r;
}

Verdict ac4(const ExperimentConfig& cfg, const Run& run) {
  const Corpus corpus = load_corpus_for(cfg, run.paths.data_dir);
  const auto asr = load_asr(run.paths.asr_ckpt);
  const UNetRefiner<float> fresh(cfg.refiner, cfg.refiner_train.seed);
  const auto r = evaluate(corpus.test, cfg.corpus.snr_grid, asr, &fresh, table_conditions(cfg.se_list(), true),
                          cfg.flow);
  bool pass = true;
  std::size_t compared = 0;
  for (double snr : cfg.corpus.snr_grid) {
    for (const auto& [base, refined] : {std::pair{"unprocessed", "unprocessed+refiner"}, std::pair{"se", "se+refiner"}}) {
      const auto* a = r.find(base, snr);
      const auto* b = r.find(refined, snr);
      pass = pass && a && b && a->wer == b->wer;
      ++compared;
    }
  }
  return {"AC4", pass, std::to_string(compared) + " (condition, SNR) cells compared with a fresh refiner"};
}

Verdict ac5(const ExperimentConfig& cfg, const Run& run) {
  const auto& rep = run.report;
  const auto& grid = cfg.corpus.snr_grid;
  std::string detail;
  bool a = true;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double w = rep.find("unprocessed", grid[k])->wer;
    detail += (k ? " > " : "(a) unprocessed ") + fmt(w);
    if (k && !(w < rep.find("unprocessed", grid[k - 1])->wer)) a = false;
  }
  const double un = rep.average("unprocessed"), unr = rep.average("unprocessed+refiner");
  const double se = rep.average("se"), ser = rep.average("se+refiner");
  const bool b = unr < un, c = ser < se;

  const Corpus corpus = load_corpus_for(cfg, run.paths.data_dir);
  const auto asr = load_asr(run.paths.asr_ckpt);
  const auto refiner = load_refiner(run.paths.refiner_ckpt);
  const auto dist = heldout_distances(corpus.test, asr, refiner, LatentVariant::noisy(), cfg.flow);
  const bool d = dist.after < dist.before;
  const bool fast = run.seconds < 15 * 60;

  detail += (a ? " ok" : " NOT monotone");
  detail += "; (b) avg " + fmt(un) + " -> " + fmt(unr) + (b ? " ok" : " FAIL");
  detail += "; (c) se avg " + fmt(se) + " -> " + fmt(ser) + (c ? " ok" : " FAIL");
  detail += "; (d) held-out " + fmt(dist.before) + " -> " + fmt(dist.after) + (d ? " ok" : " FAIL");
  detail += "; clean test WER " + fmt(clean_wer(corpus.test, asr));
  detail += "; " + fmt(run.seconds, 4) + " s" + (fast ? "" : " (over 15 min)");
  return {"AC5", a && b && c && d && fast, detail};
}

bool same_file(const fs::path& a, const fs::path& b) { return io::read_file(a) == io::read_file(b); }

std::vector<fs::path> artifacts(const RunPaths& p) {
  return {p.data_dir / "train.lfds", p.data_dir / "dev.lfds", p.data_dir / "test.lfds",
          p.asr_ckpt, p.refiner_ckpt, p.report_csv, p.report_txt};
}

Verdict ac6(const Run& first, const Run& second) {
  const auto a = artifacts(first.paths), b = artifacts(second.paths);
  std::string differ;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_file(a[i], b[i])) differ += " " + a[i].filename().string();
  }
  return {"AC6", differ.empty(),
          differ.empty() ? std::to_string(a.size()) + " artifacts byte-identical across two default runs"
                         : "differing:" + differ};
}

Verdict ac7(const ExperimentConfig& cfg, const Run& run, const fs::path& work) {
  std::string detail;
  bool pass = true;
  const fs::path dir = work / "ac7";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // Checkpoints: load then save again.
  save_checkpoint(make_checkpoint(load_asr(run.paths.asr_ckpt), load_checkpoint(run.paths.asr_ckpt).meta),
                  dir / "asr.ckpt");
  save_checkpoint(make_checkpoint(load_refiner(run.paths.refiner_ckpt), load_checkpoint(run.paths.refiner_ckpt).meta),
                  dir / "refiner.ckpt");
  const bool ck = same_file(run.paths.asr_ckpt, dir / "asr.ckpt") && same_file(run.paths.refiner_ckpt, dir / "refiner.ckpt");
  detail += std::string("checkpoint resave ") + (ck ? "identical" : "DIFFERS");

  // Datasets: regenerate from the config.
  stage_gen_data(cfg, dir / "data");
  bool ds = true;
  for (const char* s : {"train.lfds", "dev.lfds", "test.lfds"}) ds = ds && same_file(run.paths.data_dir / s, dir / "data" / s);
  detail += std::string("; dataset regeneration ") + (ds ? "identical" : "DIFFERS");

  // Report: parse the CSV back.
  const bool csv = read_report_csv(run.paths.report_csv) == run.report;
  detail += std::string("; csv parse ") + (csv ? "exact" : "MISMATCH");
  pass = ck && ds && csv;
  fs::remove_all(dir);
  return {"AC7", pass, detail};
}

template <class F>
Verdict guarded(const std::string& id, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {id, false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_work");
  fs::create_directories(work);
  const auto cfg = ExperimentConfig::defaults();

  std::vector<Verdict> out;
  progress("AC1 ctc oracle");
  out.push_back(guarded("AC1", ac1));
  progress("AC2 gradient suites");
  out.push_back(guarded("AC2", ac2));
  progress("AC3 flow exactness");
  out.push_back(guarded("AC3", ac3));

  std::optional<Run> first, second;
  std::string run_error;
  try {
    progress("default pipeline, run 1");
    first = run_default(cfg, work / "run1", "run1");
    progress("default pipeline, run 2");
    second = run_default(cfg, work / "run2", "run2");
  } catch (const std::exception& e) {
    run_error = std::string("pipeline failed: ") + e.what();
  }
  auto need = [&](const std::string& id, auto f) {
    return first && second ? guarded(id, f) : Verdict{id, false, run_error};
  };
  out.push_back(need("AC4", [&] { return ac4(cfg, *first); }));
  out.push_back(need("AC5", [&] { return ac5(cfg, *first); }));
  out.push_back(need("AC6", [&] { return ac6(*first, *second); }));
  out.push_back(need("AC7", [&] { return ac7(cfg, *first, work); }));

  if (first) std::cout << "default report (WER %):\n" << report_table(first->report);
  bool all = true;
  for (const auto& v : out) {
    std::cout << v.id << " " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << "\n";
    all = all && v.pass;
  }
  std::cout << (all ? "all acceptance criteria passed" : "acceptance FAILED") << std::endl;
  return all ? 0 : 1;
}
