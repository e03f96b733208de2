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


#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "lfr/numerics/adam.hpp"
#include "lfr/numerics/finite_diff.hpp"
#include "lfr/numerics/minibatch.hpp"
#include "lfr/numerics/ops.hpp"
#include "lfr/numerics/parallel.hpp"
#include "lfr/numerics/rng.hpp"
#include "lfr/verify/oracles.hpp"

namespace lfr {
namespace {

using TD = Tensor<double>;

TD rand_t(Rng& rng, Shape s, double scale = 1.0) {
  TD t(std::move(s));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

TEST(Tensor, ShapeContract) {
  TD t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_THROW(TD({2, 0}), ShapeError);
  EXPECT_THROW(TD({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_EQ(TD::scalar(4).shape(), Shape{1});
}

TEST(Tensor, FiniteCheck) {
  TD t({2}, 1.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = Rng::stream(7, 1, 2), b = Rng::stream(7, 1, 2), c = Rng::stream(7, 2, 1);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
}

TEST(Rng, UniformIntInclusiveBounds) {
  Rng r(3);
  bool lo = false, hi = false;
  for (int i = 0; i < 1000; ++i) {
    const auto v = r.uniform_int(2, 4);
    ASSERT_GE(v, 2);
    ASSERT_LE(v, 4);
    lo |= v == 2;
    hi |= v == 4;
  }
  EXPECT_TRUE(lo && hi);
}

// --- softmax / log_sum_exp / silu -------------------------------------------

TEST(Softmax, Symmetric) {
  const auto s = softmax(TD::vector({0, 0}), 0);
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
}

TEST(Softmax, ShiftInvariant) {
  Rng rng(1);
  const auto x = rand_t(rng, {3, 5}, 3.0);
  for (double c : {-100.0, 0.5, 1e3}) {
    TD y = x;
    for (auto& v : y.data()) v += c;
    EXPECT_LE(max_abs_diff(softmax(x, 1), softmax(y, 1)), 1e-6);
  }
}

TEST(Softmax, HandEvaluated) {
  const auto s = softmax(TD::vector({std::log(1.0), std::log(3.0)}), 0);
  EXPECT_NEAR(s[0], 0.25, 1e-12);
  EXPECT_NEAR(s[1], 0.75, 1e-12);
}

TEST(Softmax, RowsSumToOneAndRejectNonFinite) {
  Rng rng(2);
  const auto s = softmax(rand_t(rng, {4, 7}, 50.0), 1);
  for (std::size_t r = 0; r < 4; ++r) {
    double sum = 0;
    for (std::size_t c = 0; c < 7; ++c) {
      EXPECT_GE(s[r * 7 + c], 0.0);
      sum += s[r * 7 + c];
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
  EXPECT_THROW(softmax(TD::vector({0, std::numeric_limits<double>::infinity()}), 0), NonFiniteError);
  EXPECT_THROW(softmax(TD::vector({0, 1}), 1), ShapeError);
}

TEST(LogSumExp, Examples) {
  const double a = 0.37, ninf = -std::numeric_limits<double>::infinity();
  EXPECT_NEAR(log_sum_exp(TD::vector({a, a}), 0).item(), a + std::numbers::ln2, 1e-12);
  EXPECT_EQ(log_sum_exp(TD::vector({a, ninf}), 0).item(), a);
  EXPECT_NEAR(log_sum_exp(TD::vector({0, std::log(3.0)}), 0).item(), std::log(4.0), 1e-12);
  EXPECT_EQ(log_sum_exp(TD::vector({ninf, ninf}), 0).item(), ninf);
}

TEST(LogSumExp, NoOverflowAtLargeMagnitude) {
  const auto r = log_sum_exp(TD::vector({1e4, 1e4 - 1, -1e4}), 0).item();
  EXPECT_TRUE(std::isfinite(r));
  EXPECT_NEAR(r, 1e4 + std::log(1 + std::exp(-1.0)), 1e-9);
}

TEST(LogSumExp, MatchesDirectSumIn64Bit) {
  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    const auto x = rand_t(rng, {6}, 2.0);
    double direct = 0;
    for (double v : x.data()) direct += std::exp(v);
    EXPECT_NEAR(log_sum_exp(x, 0).item(), std::log(direct), 1e-9);
  }
}

TEST(Silu, Examples) {
  EXPECT_EQ(silu(TD::scalar(0)).item(), 0.0);
  EXPECT_NEAR(silu(TD::scalar(30)).item(), 30.0, 1e-6);
  EXPECT_NEAR(silu(TD::scalar(1)).item(), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(silu(TD::scalar(1)).item(), 0.731059, 1e-5);
}

// --- normalization ----------------------------------------------------------

TEST(GroupNorm, ConstantInputGivesZeros) {
  Tape<double> tape;
  auto x = tape.constant(TD({5, 4}, 3.0));
  auto y = group_norm(x, 2, tape.constant(TD({4}, 1.0)), tape.constant(TD({4}, 0.0)));
  for (double v : y.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(GroupNorm, PerGroupStatistics) {
  Rng rng(5);
  Tape<double> tape;
  const auto xv = rand_t(rng, {6, 8}, 2.0);
  auto y = group_norm(tape.constant(xv), 4, tape.constant(TD({8}, 1.0)), tape.constant(TD({8}, 0.0)));
  // A group spans all frames and 2 adjacent channels.
  for (std::size_t g = 0; g < 4; ++g) {
    double m = 0, v = 0;
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t c = 2 * g; c < 2 * g + 2; ++c) m += y.value()[r * 8 + c];
    m /= 12;
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t c = 2 * g; c < 2 * g + 2; ++c) v += std::pow(y.value()[r * 8 + c] - m, 2);
    v /= 12;
    EXPECT_NEAR(m, 0.0, 1e-4);
    EXPECT_NEAR(v, 1.0, 1e-4);
  }
}

TEST(GroupNorm, GroupsEqualChannelsIsPerChannel) {
  Rng rng(6);
  const auto xv = rand_t(rng, {5, 3});
  Tape<double> tape;
  auto y = group_norm(tape.constant(xv), 3, tape.constant(TD({3}, 1.0)), tape.constant(TD({3}, 0.0)), 1e-5);
  // Column c normalized over frames: transpose, layer-norm rows, transpose.
  TD xt({3, 5});
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) xt[c * 5 + r] = xv[r * 3 + c];
  const auto ref = oracle::layer_norm_rows(xt, 1e-5);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(y.value()[r * 3 + c], ref[c * 5 + r], 1e-9);
}

TEST(GroupNorm, OneGroupMatchesLayerNormOracle) {
  Rng rng(7);
  const auto xv = rand_t(rng, {4, 6});
  Tape<double> tape;
  auto y = group_norm(tape.constant(xv), 1, tape.constant(TD({6}, 1.0)), tape.constant(TD({6}, 0.0)), 1e-5);
  TD flat({1, 24}, std::vector<double>(xv.data().begin(), xv.data().end()));
  const auto ref = oracle::layer_norm_rows(flat, 1e-5);
  for (std::size_t i = 0; i < 24; ++i) EXPECT_NEAR(y.value()[i], ref[i], 1e-5);
}

TEST(GroupNorm, IndivisibleChannelsRejected) {
  Tape<double> tape;
  EXPECT_THROW(group_norm(tape.constant(TD({2, 6}, 1.0)), 4, tape.constant(TD({6}, 1.0)),
                          tape.constant(TD({6}, 0.0))),
               ShapeError);
}

TEST(LayerNorm, MatchesOracle) {
  Rng rng(8);
  const auto xv = rand_t(rng, {3, 5});
  Tape<double> tape;
  auto y = layer_norm(tape.constant(xv), tape.constant(TD({5}, 1.0)), tape.constant(TD({5}, 0.0)), 1e-5);
  EXPECT_LE(max_abs_diff(y.value(), oracle::layer_norm_rows(xv, 1e-5)), 1e-12);
}

// --- conv / attention -------------------------------------------------------

TEST(Conv1d, IdentityKernel) {
  Rng rng(9);
  const auto x = rand_t(rng, {5, 1});
  Tape<double> tape;
  auto y = conv1d(tape.constant(x), tape.constant(TD({1, 1, 1}, 1.0)), tape.constant(TD({1}, 0.0)), 1, 0);
  EXPECT_EQ(y.value(), x);
}

TEST(Conv1d, OnesKernelSlidingSums) {
  Tape<double> tape;
  auto y = conv1d(tape.constant(TD({3, 1}, {1, 2, 3})), tape.constant(TD({2, 1, 1}, 1.0)),
                  tape.constant(TD({1}, 0.0)), 1, 0);
  ASSERT_EQ(y.value().shape(), (Shape{2, 1}));
  EXPECT_EQ(y.value()[0], 3.0);
  EXPECT_EQ(y.value()[1], 5.0);
}

TEST(Conv1d, StrideTwoHalvesEvenLength) {
  Tape<double> tape;
  for (std::size_t len : {2u, 4u, 8u, 16u}) {
    auto y = conv1d(tape.constant(TD({len, 2}, 1.0)), tape.constant(TD({3, 2, 4}, 1.0)),
                    tape.constant(TD({4}, 0.0)), 2, 1);
    EXPECT_EQ(y.value().dim(0), len / 2);
  }
}

TEST(Conv1d, MatchesDirectOracle) {
  Rng rng(10);
  for (int k = 0; k < 10; ++k) {
    const std::size_t len = std::size_t(rng.uniform_int(3, 9)), K = std::size_t(rng.uniform_int(1, 3));
    const std::size_t stride = std::size_t(rng.uniform_int(1, 2)), pad = std::size_t(rng.uniform_int(0, 1));
    const auto x = rand_t(rng, {len, 3}), w = rand_t(rng, {K, 3, 2}), b = rand_t(rng, {2});
    Tape<double> tape;
    auto y = conv1d(tape.constant(x), tape.constant(w), tape.constant(b), stride, pad);
    EXPECT_LE(max_abs_diff(y.value(), oracle::conv1d_direct(x, w, b, stride, pad)), 1e-12);
  }
}

TEST(Conv1d, InvalidGeometryRejected) {
  Tape<double> tape;
  EXPECT_THROW(conv1d(tape.constant(TD({2, 1}, 1.0)), tape.constant(TD({3, 1, 1}, 1.0)),
                      tape.constant(TD({1}, 0.0)), 1, 0),
               ShapeError);
  EXPECT_THROW(conv1d(tape.constant(TD({4, 2}, 1.0)), tape.constant(TD({3, 1, 1}, 1.0)),
                      tape.constant(TD({1}, 0.0)), 1, 0),
               ShapeError);
}

TEST(Attention, SingleStepReturnsValue) {
  Rng rng(11);
  const auto v = rand_t(rng, {1, 3});
  Tape<double> tape;
  auto y = scaled_dot_attention(tape.constant(rand_t(rng, {1, 4})), tape.constant(rand_t(rng, {1, 4})),
                                tape.constant(v));
  EXPECT_EQ(y.value(), v);
}

TEST(Attention, IdenticalKeysAverageValues) {
  Rng rng(12);
  const auto v = rand_t(rng, {3, 2});
  TD k({3, 4});
  const auto row = rand_t(rng, {4});
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c) k[r * 4 + c] = row[c];
  Tape<double> tape;
  auto y = scaled_dot_attention(tape.constant(rand_t(rng, {2, 4})), tape.constant(k), tape.constant(v));
  for (std::size_t q = 0; q < 2; ++q)
    for (std::size_t c = 0; c < 2; ++c)
      EXPECT_NEAR(y.value()[q * 2 + c], (v[c] + v[2 + c] + v[4 + c]) / 3.0, 1e-12);
}

TEST(Attention, TwoStepHandComputed) {
  // q = [[1, 0]], k = [[1, 0], [0, 1]], v = [[1], [3]]: scores [1, 0] / sqrt 2.
  Tape<double> tape;
  auto y = scaled_dot_attention(tape.constant(TD({1, 2}, {1, 0})), tape.constant(TD({2, 2}, {1, 0, 0, 1})),
                                tape.constant(TD({2, 1}, {1, 3})));
  const double e = std::exp(1.0 / std::sqrt(2.0));
  EXPECT_NEAR(y.value().item(), (e * 1 + 1 * 3) / (e + 1), 1e-6);
}

TEST(Attention, DimMismatchRejected) {
  Tape<double> tape;
  EXPECT_THROW(scaled_dot_attention(tape.constant(TD({2, 3}, 1.0)), tape.constant(TD({2, 4}, 1.0)),
                                    tape.constant(TD({2, 1}, 1.0))),
               ShapeError);
}

// --- backward ---------------------------------------------------------------

TEST(Backward, SumGivesOnes) {
  Parameter<double> p{"p", TD::vector({1, -2, 3}), TD({3})};
  Tape<double> tape;
  auto v = tape.param(p);
  tape.backward(sum(v));
  EXPECT_EQ(tape.grad(v), TD({3}, 1.0));
}

TEST(Backward, SumOfSquares) {
  ParamStore<double> store;
  store.add("p", TD::vector({1, 2}));
  Tape<double> tape;
  tape.backward(sum(square(tape.param(store[0]))));
  tape.accumulate_param_grads(store);
  EXPECT_EQ(store[0].grad, TD::vector({2, 4}));
}

TEST(Backward, RejectsNonScalarAndDetached) {
  Tape<double> tape;
  auto v = tape.variable(TD::vector({1, 2}));
  EXPECT_THROW(tape.backward(v), ShapeError);
  auto c = tape.constant(TD::scalar(1));
  EXPECT_THROW(tape.backward(c), std::logic_error);
}

TEST(Backward, RepeatedPassesAreBitIdentical) {
  Rng rng(13);
  Tape<double> tape;
  auto x = tape.variable(rand_t(rng, {3, 4}));
  auto w = tape.variable(rand_t(rng, {4, 2}));
  auto loss = sum(silu(matmul(x, w)));
  tape.backward(loss);
  const auto g1 = tape.grad(x);
  tape.backward(loss);
  EXPECT_EQ(tape.grad(x), g1);
}

TEST(Backward, NonFiniteNamesProducingOp) {
  Tape<double> tape;
  auto x = tape.variable(TD::vector({1e300}));
  try {
    square(x);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("square"), std::string::npos);
  }
}

// Every differentiable op against central differences: loss = sum(op(x) * R).
template <class T>
struct OpCase {
  const char* name;
  std::vector<Shape> inputs;
  std::function<Var<T>(Tape<T>&, std::vector<Var<T>>&)> fn;
};

template <class T>
std::vector<OpCase<T>> op_cases() {
  using V = std::vector<Var<T>>;
  return {
      {"add", {{3, 4}, {3, 4}}, [](Tape<T>&, V& v) { return add(v[0], v[1]); }},
      {"sub", {{3, 4}, {3, 4}}, [](Tape<T>&, V& v) { return sub(v[0], v[1]); }},
      {"mul", {{3, 4}, {3, 4}}, [](Tape<T>&, V& v) { return mul(v[0], v[1]); }},
      {"scale", {{3, 4}}, [](Tape<T>&, V& v) { return scale(v[0], T(-1.7)); }},
      {"square", {{3, 4}}, [](Tape<T>&, V& v) { return square(v[0]); }},
      {"relu", {{3, 4}}, [](Tape<T>&, V& v) { return relu(v[0]); }},
      {"silu", {{3, 4}}, [](Tape<T>&, V& v) { return silu(v[0]); }},
      {"mean", {{3, 4}}, [](Tape<T>&, V& v) { return mean(v[0]); }},
      {"matmul", {{3, 4}, {4, 2}}, [](Tape<T>&, V& v) { return matmul(v[0], v[1]); }},
      {"transpose", {{3, 4}}, [](Tape<T>&, V& v) { return transpose(v[0]); }},
      {"add_row", {{3, 4}, {4}}, [](Tape<T>&, V& v) { return add_row(v[0], v[1]); }},
      {"linear", {{3, 4}, {4, 2}, {2}}, [](Tape<T>&, V& v) { return linear(v[0], v[1], v[2]); }},
      {"softmax", {{3, 4}}, [](Tape<T>&, V& v) { return softmax(v[0], 1); }},
      {"log_softmax", {{3, 4}}, [](Tape<T>&, V& v) { return log_softmax(v[0], 1); }},
      {"layer_norm", {{3, 4}, {4}, {4}}, [](Tape<T>&, V& v) { return layer_norm(v[0], v[1], v[2]); }},
      {"group_norm", {{5, 4}, {4}, {4}}, [](Tape<T>&, V& v) { return group_norm(v[0], 2, v[1], v[2]); }},
      {"conv1d", {{6, 3}, {3, 3, 2}, {2}}, [](Tape<T>&, V& v) { return conv1d(v[0], v[1], v[2], 1, 1); }},
      {"conv1d_stride2", {{6, 3}, {3, 3, 2}, {2}}, [](Tape<T>&, V& v) { return conv1d(v[0], v[1], v[2], 2, 1); }},
      {"upsample_nearest", {{3, 2}}, [](Tape<T>&, V& v) { return upsample_nearest(v[0], 2); }},
      {"concat_cols", {{3, 2}, {3, 3}}, [](Tape<T>&, V& v) { return concat_cols(v[0], v[1]); }},
      {"slice_cols", {{3, 5}}, [](Tape<T>&, V& v) { return slice_cols(v[0], 1, 3); }},
      {"reflect_pad_rows", {{3, 2}}, [](Tape<T>&, V& v) { return reflect_pad_rows(v[0], 8); }},
      {"crop_rows", {{5, 2}}, [](Tape<T>&, V& v) { return crop_rows(v[0], 3); }},
      {"attention", {{2, 4}, {3, 4}, {3, 2}}, [](Tape<T>&, V& v) { return scaled_dot_attention(v[0], v[1], v[2]); }},
  };
}

template <class T>
double op_grad_error(const OpCase<T>& c, Rng& rng, T h) {
  std::vector<Tensor<T>> xs;
  for (const auto& s : c.inputs) {
    auto x = rand_t(rng, s);
    // Keep relu inputs clear of the kink by more than the probe step.
    if (std::string(c.name) == "relu")
      for (auto& v : x.data()) v += v < 0 ? -0.1 : 0.1;
    xs.push_back(x.template cast<T>());
  }
  Tensor<T> R;
  auto eval = [&](Tape<T>& tape, const std::vector<Tensor<T>>& in, bool vars) {
    std::vector<Var<T>> v;
    for (const auto& x : in) v.push_back(vars ? tape.variable(x) : tape.constant(x));
    auto out = c.fn(tape, v);
    if (R.empty()) R = rand_t(rng, out.value().shape()).template cast<T>();
    return std::make_pair(sum(mul(out, tape.constant(R))), v);
  };
  Tape<T> tape;
  auto [loss, vars] = eval(tape, xs, true);
  tape.backward(loss);
  double worst = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto fd = finite_diff_grad<T>(
        [&](const Tensor<T>& p) {
          auto in = xs;
          in[i] = p;
          Tape<T> t(false);
          return eval(t, in, false).first.value().item();
        },
        xs[i], h);
    worst = std::max(worst, relative_error(tape.grad(vars[i]), fd));
  }
  return worst;
}

TEST(GradientSweep, EveryOpMatchesFiniteDifferences64) {
  Rng rng(14);
  for (const auto& c : op_cases<double>()) {
    double worst = 0;
    for (int k = 0; k < 20; ++k) worst = std::max(worst, op_grad_error(c, rng, 1e-5));
    EXPECT_LE(worst, 1e-5) << c.name;
  }
}

TEST(GradientSweep, EveryOpMatchesFiniteDifferences32) {
  Rng rng(15);
  for (const auto& c : op_cases<float>()) {
    double worst = 0;
    for (int k = 0; k < 20; ++k) worst = std::max(worst, op_grad_error(c, rng, 1e-2f));
    EXPECT_LE(worst, 1e-3) << c.name;
  }
}

TEST(GradientSweep, RandomCompositeGraph) {
  Rng rng(16);
  for (int k = 0; k < 20; ++k) {
    const auto x = rand_t(rng, {4, 3});
    const auto w = rand_t(rng, {3, 3});
    const auto g = rand_t(rng, {3});
    auto f = [&](Tape<double>& tape, Var<double> xv) {
      auto h = silu(matmul(xv, tape.constant(w)));
      h = layer_norm(add(h, xv), tape.constant(g), tape.constant(TD({3}, 0.1)));
      return mean(square(log_softmax(h, 1)));
    };
    Tape<double> tape;
    auto xv = tape.variable(x);
    tape.backward(f(tape, xv));
    const auto fd = finite_diff_grad<double>(
        [&](const TD& p) {
          Tape<double> t(false);
          return f(t, t.constant(p)).value().item();
        },
        x, 1e-5);
    EXPECT_LE(relative_error(tape.grad(xv), fd), 1e-5);
  }
}

// --- finite differences -----------------------------------------------------

TEST(FiniteDiff, IdentityAndSquare) {
  const auto g1 = finite_diff_grad<double>([](const TD& x) { return x[0]; }, TD::scalar(0.3), 1e-5);
  EXPECT_NEAR(g1.item(), 1.0, 1e-9);
  const auto g2 = finite_diff_grad<double>([](const TD& x) { return x[0] * x[0]; }, TD::scalar(3), 1e-5);
  EXPECT_NEAR(g2.item(), 6.0, 1e-8);
}

// --- Adam -------------------------------------------------------------------

TEST(Adam, ZeroGradientLeavesParameters) {
  ParamStore<double> s;
  s.add("p", TD::vector({1, -2}));
  AdamState<double> opt;
  opt.step(s);
  EXPECT_EQ(s[0].value, TD::vector({1, -2}));
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore<double> s;
  s.add("p", TD::vector({1, -2, 0.5}));
  s[0].grad = TD::vector({0.3, -7, 1e-3});
  AdamState<double> opt(AdamHyper{0.01});
  opt.step(s);
  // m_hat / sqrt(v_hat) = g / |g| at t = 1.
  EXPECT_NEAR(s[0].value[0], 1 - 0.01, 1e-6);
  EXPECT_NEAR(s[0].value[1], -2 + 0.01, 1e-6);
  EXPECT_NEAR(s[0].value[2], 0.5 - 0.01, 1e-4);
  EXPECT_EQ(opt.first_moment(0).shape(), s[0].value.shape());
  EXPECT_EQ(opt.second_moment(0).shape(), s[0].value.shape());
}

TEST(Adam, DeterministicAndStepCounterIncreases) {
  auto run = [] {
    ParamStore<double> s;
    s.add("p", TD::vector({1, 2}));
    AdamState<double> opt;
    for (int i = 0; i < 3; ++i) {
      s[0].grad = TD::vector({0.1 * i, -0.5});
      opt.step(s);
      EXPECT_EQ(opt.steps(), std::uint64_t(i + 1));
    }
    return s[0].value;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, RejectsBadGradients) {
  ParamStore<double> s;
  s.add("p", TD::vector({1, 2}));
  AdamState<double> opt;
  s[0].grad = TD({3});
  EXPECT_THROW(opt.step(s), ShapeError);
  s[0].grad = TD::vector({1, std::numeric_limits<double>::infinity()});
  EXPECT_THROW(opt.step(s), NonFiniteError);
}

// --- minibatch helpers ------------------------------------------------------

TEST(Minibatch, MeanGradientAndClipping) {
  ParamStore<double> s;
  s.add("p", TD::vector({1, 2}));
  const double loss = batch_gradients(s, 2, [&](std::size_t i, Tape<double>& tape) {
    return scale(sum(square(tape.param(s[0]))), double(i + 1));
  });
  EXPECT_DOUBLE_EQ(loss, (5.0 + 10.0) / 2);
  EXPECT_EQ(s[0].grad, TD::vector({3, 6}));
  EXPECT_NEAR(clip_grad_norm(s, 1.0), std::sqrt(45.0), 1e-12);
  EXPECT_NEAR(std::hypot(s[0].grad[0], s[0].grad[1]), 1.0, 1e-12);
}

TEST(Minibatch, ResultIndependentOfThreadCount) {
  auto run = [](const char* threads) {
    setenv("LFR_THREADS", threads, 1);
    ParamStore<float> s;
    s.add("w", Tensor<float>({3, 3}, 0.1f));
    Rng rng(17);
    std::vector<Tensor<float>> xs;
    for (int i = 0; i < 8; ++i) xs.push_back(rand_t(rng, {4, 3}).cast<float>());
    batch_gradients(s, xs.size(), [&](std::size_t i, Tape<float>& tape) {
      return sum(silu(matmul(tape.constant(xs[i]), tape.param(s[0]))));
    });
    return s[0].grad;
  };
  const auto a = run("1"), b = run("4");
  unsetenv("LFR_THREADS");
  EXPECT_EQ(a, b);
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                 if (i == 7) throw DomainError("boom");
               }),
               DomainError);
}

}  // namespace
}  // namespace lfr
