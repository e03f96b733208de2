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

#include <string>

#include "lfr/harness/pipeline.hpp"
#include "lfr/verify/suites.hpp"

namespace lfr {

/// Runs the oracle and gradient suites; true when all pass.
inline bool run_selftest(const Logger& log) {
  bool ok = true;
  for (const auto& r : verify::run_all_suites()) {
    ok = ok && r.pass;
    if (log) {
      log(std::string(r.pass ? "PASS " : "FAIL ") + r.name + ": " + std::to_string(r.cases) + " cases, worst " +
          kv::format_double(r.worst) + " (tol " + kv::format_double(r.tolerance) + ")" +
          (r.detail.empty() ? "" : ", " + r.detail));
    }
  }
  return ok;
}

}  // namespace lfr
