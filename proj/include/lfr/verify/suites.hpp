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


// Oracle and gradient suites shared by `lfr selftest` and the test binaries.
// All run in 64-bit.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lfr/asr/ctc.hpp"
#include "lfr/flow/flow.hpp"
#include "lfr/numerics/finite_diff.hpp"
#include "lfr/numerics/ops.hpp"
#include "lfr/numerics/rng.hpp"
#include "lfr/refiner/unet.hpp"
#include "lfr/verify/oracles.hpp"

namespace lfr::verify {

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  double worst = 0;  // largest error observed
  double tolerance = 0;
  bool pass = false;
  std::string detail;
};

inline Tensor<double> random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Tensor<double> t({r, c});
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

inline Tensor<double> random_logpost(Rng& rng, std::size_t T, std::size_t C) {
  return log_softmax(random_matrix(rng, T, C, 1.5), 1);
}

// ---------------------------------------------------------------------------
// CTC against path enumeration

/// Every T in [1, 4], V in [1, 3] and target of length 0..2 over V symbols,
/// with `draws` random posteriors each. Infeasible targets must raise
/// AlignmentError while enumeration finds no path.
inline SuiteResult ctc_oracle_suite(std::uint64_t seed = 11, std::size_t draws = 3, double tol = 1e-9) {
  SuiteResult r{"ctc oracle equivalence", 0, 0, tol, true, {}};
  Rng rng(seed);
  for (std::size_t T = 1; T <= 4; ++T) {
    for (int V = 1; V <= 3; ++V) {
      std::vector<Labels> targets{{}};
      for (int a = 0; a < V; ++a) {
        targets.push_back({a});
        for (int b = 0; b < V; ++b) targets.push_back({a, b});
      }
      for (const auto& y : targets) {
        for (std::size_t d = 0; d < draws; ++d) {
          const auto lp = random_logpost(rng, T, std::size_t(V) + 1);
          const double brute = oracle::ctc_brute_force(lp, y);
          ++r.cases;
          if (ctc_min_frames(y) > T) {
            bool threw = false;
            try {
              ctc_log_prob(lp, y);
            } catch (const AlignmentError&) {
              threw = true;
            }
            if (!threw || std::isfinite(brute)) {
              r.pass = false;
              r.detail = "infeasible target not rejected at T=" + std::to_string(T);
            }
            continue;
          }
          const double err = std::abs(ctc_log_prob(lp, y) - brute);
          r.worst = std::max(r.worst, err);
        }
      }
    }
  }
  r.pass = r.pass && r.worst <= tol && r.cases >= 200;
  return r;
}

// ---------------------------------------------------------------------------
// Gradient suites

/// Relative error between the tape gradient and central differences of
/// `loss` with respect to `x`.
inline double input_grad_error(const std::function<Var<double>(Tape<double>&, Var<double>)>& loss,
                               const Tensor<double>& x, double h = 1e-5) {
  Tape<double> tape;
  auto xv = tape.variable(x);
  tape.backward(loss(tape, xv));
  const auto g = tape.grad(xv);
  const auto fd = finite_diff_grad<double>(
      [&](const Tensor<double>& p) {
        Tape<double> t(false);
        return loss(t, t.constant(p)).value().item();
      },
      x, h);
  return relative_error(g, fd);
}

/// Relative error over all parameters jointly (concatenated), tape vs
/// central differences. `loss` must read parameters through the tape.
template <class Model>
double param_grad_error(Model& model, const std::function<Var<double>(Tape<double>&)>& loss, double h = 1e-5) {
  Tape<double> tape;
  tape.backward(loss(tape));
  model.params().zero_grad();
  tape.accumulate_param_grads(model.params());
  std::vector<double> a, b;
  for (auto& p : model.params()) {
    const auto fd = finite_diff_param<double>(
        [&] {
          Tape<double> t(false);
          return loss(t).value().item();
        },
        p, h);
    a.insert(a.end(), p.grad.data().begin(), p.grad.data().end());
    b.insert(b.end(), fd.data().begin(), fd.data().end());
  }
  return relative_error(Tensor<double>({a.size()}, a), Tensor<double>({b.size()}, b));
}

inline SuiteResult ctc_grad_suite(std::size_t n = 20, std::uint64_t seed = 12, double tol = 1e-5) {
  SuiteResult r{"ctc_loss gradient", 0, 0, tol, true, {}};
  Rng rng(seed);
  while (r.cases < n) {
    const std::size_t T = std::size_t(rng.uniform_int(1, 6));
    const std::size_t V = std::size_t(rng.uniform_int(1, 3));
    Labels y(std::size_t(rng.uniform_int(0, 3)));
    for (auto& s : y) s = int(rng.uniform_int(0, std::int64_t(V) - 1));
    if (ctc_min_frames(y) > T) continue;
    const auto logits = random_matrix(rng, T, V + 1);
    const double err = input_grad_error(
        [&](Tape<double>&, Var<double> x) { return ctc_loss(log_softmax(x, 1), y); }, logits);
    r.worst = std::max(r.worst, err);
    ++r.cases;
  }
  r.pass = r.worst <= tol;
  return r;
}

/// Small U-Net used by the gradient suites.
inline RefinerConfig tiny_refiner_config() {
  RefinerConfig c;
  c.depth = 2;
  c.base_channels = 4;
  c.channel_mults = {1, 2};
  c.time_dim = 4;
  c.latent_dim = 3;
  c.groups = 2;
  return c;
}

/// Replaces every parameter (including the zero output conv) with N(0, s^2).
template <std::floating_point T>
void randomize_params(ParamStore<T>& params, Rng& rng, double s = 0.3) {
  for (auto& p : params)
    for (auto& v : p.value.data()) v = T(s * rng.normal());
}

inline SuiteResult cfm_grad_suite(std::size_t n = 20, std::uint64_t seed = 13, double tol = 1e-5) {
  SuiteResult r{"cfm_loss gradient", 0, 0, tol, true, {}};
  Rng rng(seed);
  const auto cfg = tiny_refiner_config();
  for (; r.cases < n; ++r.cases) {
    UNetRefiner<double> model(cfg, rng.next());
    randomize_params(model.params(), rng);
    std::vector<LatentPair<double>> batch(2);
    std::vector<double> times(2);
    for (std::size_t i = 0; i < 2; ++i) {
      const std::size_t T = std::size_t(rng.uniform_int(3, 6));
      batch[i] = {random_matrix(rng, T, cfg.latent_dim), random_matrix(rng, T, cfg.latent_dim)};
      times[i] = rng.uniform();
    }
    const double sigma = r.cases % 2 ? 0.1 : 0.0;
    const double err = param_grad_error(model, [&](Tape<double>& tape) {
      return cfm_loss_at<double>(model, tape, std::span<const LatentPair<double>>(batch),
                                 std::span<const double>(times), sigma);
    });
    r.worst = std::max(r.worst, err);
  }
  r.pass = r.worst <= tol;
  return r;
}

/// Loss sum(v(x_t, z, t) * R) with random R: gradients with respect to the
/// parameters and to x_t.
inline SuiteResult unet_grad_suite(std::size_t n = 20, std::uint64_t seed = 14, double tol = 1e-5) {
  SuiteResult r{"unet_forward gradient", 0, 0, tol, true, {}};
  Rng rng(seed);
  const auto cfg = tiny_refiner_config();
  for (; r.cases < n; ++r.cases) {
    UNetRefiner<double> model(cfg, rng.next());
    randomize_params(model.params(), rng);
    const std::size_t T = std::size_t(rng.uniform_int(1, 9));
    const auto xt = random_matrix(rng, T, cfg.latent_dim);
    const auto z = random_matrix(rng, T, cfg.latent_dim);
    const auto R = random_matrix(rng, T, cfg.latent_dim);
    const double t = rng.uniform();
    const double e1 = param_grad_error(model, [&](Tape<double>& tape) {
      return sum(mul(model.velocity(tape.constant(xt), tape.constant(z), t), tape.constant(R)));
    });
    const double e2 = input_grad_error(
        [&](Tape<double>& tape, Var<double> x) {
          return sum(mul(model.velocity(x, tape.constant(z), t), tape.constant(R)));
        },
        xt);
    r.worst = std::max({r.worst, e1, e2});
  }
  r.pass = r.worst <= tol;
  return r;
}

// ---------------------------------------------------------------------------
// Flow exactness

/// v(x, c, t) = constant field, independent of state and time.
template <std::floating_point T>
struct ConstantField {
  Tensor<T> c;
  Var<T> velocity(Var<T> x, Var<T>, T) const { return x.tape->constant(c); }
};

inline SuiteResult flow_exactness_suite(std::uint64_t seed = 15) {
  SuiteResult r{"flow exactness", 0, 0, 1e-6, true, {}};
  Rng rng(seed);
  auto fail = [&](const std::string& why) {
    r.pass = false;
    if (r.detail.empty()) r.detail = why;
  };
  for (std::size_t k = 0; k < 20; ++k) {
    const auto x0 = random_matrix(rng, 4, 3), x1 = random_matrix(rng, 4, 3);
    const double sigma = k % 2 ? rng.uniform(0.0, 0.5) : 0.0;
    // Endpoints are exact equalities.
    if (!(ot_interpolate(x0, x1, 0.0, sigma) == x0)) fail("t=0 endpoint not exact");
    if (!(ot_interpolate(x0, x1, 1.0, 0.0) == x1)) fail("t=1 endpoint not exact");
    // Path derivative by finite differences equals the target field.
    const double t = rng.uniform(0.0, 0.99), dt = 1e-3;
    const auto u = target_field(x0, x1, sigma);
    const auto a = ot_interpolate(x0, x1, t, sigma), b = ot_interpolate(x0, x1, t + dt, sigma);
    for (std::size_t i = 0; i < u.size(); ++i) {
      r.worst = std::max(r.worst, std::abs((b[i] - a[i]) / dt - u[i]));
    }
    // Euler on a constant field lands on x0 + c for every step count.
    const auto c = random_matrix(rng, 4, 3);
    ConstantField<double> field{c};
    for (std::size_t steps : {1u, 3u, 10u}) {
      const auto out = euler_integrate(field, x0, x0, FlowConfig{sigma, steps});
      for (std::size_t i = 0; i < out.size(); ++i) r.worst = std::max(r.worst, std::abs(out[i] - (x0[i] + c[i])));
    }
    ++r.cases;
  }
  if (r.worst > r.tolerance) fail("deviation " + kv::format_double(r.worst));
  return r;
}

inline std::vector<SuiteResult> run_all_suites() {
  return {ctc_oracle_suite(), ctc_grad_suite(), cfm_grad_suite(), unet_grad_suite(), flow_exactness_suite()};
}

}  // namespace lfr::verify
