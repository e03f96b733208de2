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

#include "lfr/asr/train.hpp"
#include "lfr/flow/flow.hpp"
#include "lfr/flow/latent_pairs.hpp"
#include "lfr/numerics/finite_diff.hpp"
#include "lfr/verify/suites.hpp"

namespace lfr {
namespace {

using TD = Tensor<double>;

struct ZeroField {
  Var<double> velocity(Var<double> x, Var<double>, double) const {
    return x.tape->constant(TD(x.value().shape()));
  }
};

struct IdentityField {
  Var<double> velocity(Var<double> x, Var<double>, double) const { return x; }
};

// Returns the exact target field for one fixed pair, whatever x_t and t are.
struct OracleField {
  TD u;
  Var<double> velocity(Var<double> x, Var<double>, double) const { return x.tape->constant(u); }
};

// v = x * a + c * b on single-column latents; a and b are 1x1 parameters.
struct LinearField {
  ParamStore<double> params;
  LinearField(double a, double b) {
    params.add("a", TD({1, 1}, a));
    params.add("b", TD({1, 1}, b));
  }
  Var<double> velocity(Var<double> x, Var<double> c, double) const {
    auto& t = *x.tape;
    return add(matmul(x, t.param(params[0])), matmul(c, t.param(params[1])));
  }
};

TEST(OtPath, HandExamples) {
  const TD x0({1}, 2.0), x1({1}, 5.0);
  EXPECT_NEAR(ot_interpolate(x0, x1, 0.5, 0.1)[0], 3.6, 1e-12);
  EXPECT_NEAR(target_field(x0, x1, 0.1)[0], 3.2, 1e-12);
  EXPECT_EQ(ot_interpolate(x0, x1, 0.0, 0.1), x0);
  EXPECT_EQ(ot_interpolate(x0, x1, 1.0, 0.0), x1);
  EXPECT_EQ(target_field(x1, x1, 0.0), TD({1}, 0.0));
}

TEST(OtPath, Errors) {
  const TD a({2}), b({3});
  EXPECT_THROW(ot_interpolate(a, b, 0.5, 0.0), ShapeError);
  EXPECT_THROW(target_field(a, b, 0.0), ShapeError);
  EXPECT_THROW(ot_interpolate(a, a, 1.5, 0.0), DomainError);
  EXPECT_THROW(ot_interpolate(a, a, -0.1, 0.0), DomainError);
}

TEST(OtPath, FieldIsPathDerivative) {
  Rng rng(1);
  const auto x0 = verify::random_matrix(rng, 3, 4), x1 = verify::random_matrix(rng, 3, 4);
  for (double sigma : {0.0, 0.2}) {
    const auto u = target_field(x0, x1, sigma);
    for (double t : {0.0, 0.3, 0.77}) {
      const double d = 0.2;
      const auto a = ot_interpolate(x0, x1, t, sigma), b = ot_interpolate(x0, x1, t + d, sigma);
      for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(b[i] - a[i], d * u[i], 1e-12);
    }
  }
}

TEST(CfmLoss, ZeroModelScalarPair) {
  const std::vector<LatentPair<double>> batch{{TD({1, 1}, 0.0), TD({1, 1}, 2.0)}};
  for (double t : {0.0, 0.4, 1.0}) {
    Tape<double> tape(false);
    const std::vector<double> times{t};
    EXPECT_DOUBLE_EQ(cfm_loss_at<double>(ZeroField{}, tape, batch, times, 0.0).value()[0], 4.0);
  }
}

TEST(CfmLoss, OracleModelHasZeroLoss) {
  Rng rng(2);
  const LatentPair<double> p{verify::random_matrix(rng, 5, 3), verify::random_matrix(rng, 5, 3)};
  const OracleField oracle{target_field(p.source, p.target, 0.0)};
  const std::vector<LatentPair<double>> batch{p};
  for (int k = 0; k < 5; ++k) {
    Tape<double> tape(false);
    EXPECT_NEAR(cfm_loss(oracle, tape, std::span<const LatentPair<double>>(batch), rng, FlowConfig{}).value()[0],
                0.0, 1e-24);
  }
}

TEST(CfmLoss, InvariantToBatchOrder) {
  Rng rng(3);
  std::vector<LatentPair<double>> batch;
  std::vector<double> times;
  for (int i = 0; i < 4; ++i) {
    batch.push_back({verify::random_matrix(rng, 3, 1), verify::random_matrix(rng, 3, 1)});
    times.push_back(rng.uniform());
  }
  const LinearField m(0.3, -0.6);
  Tape<double> t1(false), t2(false);
  const double a = cfm_loss_at<double>(m, t1, batch, times, 0.0).value()[0];
  std::reverse(batch.begin(), batch.end());
  std::reverse(times.begin(), times.end());
  EXPECT_NEAR(cfm_loss_at<double>(m, t2, batch, times, 0.0).value()[0], a, 1e-14);
}

TEST(CfmLoss, GradientMatchesFiniteDifferencesOnLinearModel) {
  Rng rng(4);
  std::vector<LatentPair<double>> batch;
  std::vector<double> times;
  for (int i = 0; i < 3; ++i) {
    batch.push_back({verify::random_matrix(rng, 4, 1), verify::random_matrix(rng, 4, 1)});
    times.push_back(rng.uniform());
  }
  LinearField m(0.4, 0.1);
  Tape<double> tape;
  tape.backward(cfm_loss_at<double>(m, tape, batch, times, 0.1));
  m.params.zero_grad();
  tape.accumulate_param_grads(m.params);
  for (std::size_t k = 0; k < 2; ++k) {
    auto f = [&] {
      Tape<double> t(false);
      return cfm_loss_at<double>(m, t, batch, times, 0.1).value()[0];
    };
    const auto num = finite_diff_param<double>(f, m.params[k], 1e-6);
    EXPECT_LE(relative_error(m.params[k].grad, num), 1e-5) << m.params[k].name;
  }
}

TEST(CfmLoss, Errors) {
  Tape<double> tape;
  const std::vector<LatentPair<double>> none;
  const std::vector<double> no_times;
  EXPECT_THROW(cfm_loss_at<double>(ZeroField{}, tape, none, no_times, 0.0), DomainError);
  const std::vector<LatentPair<double>> bad{{TD({2, 1}), TD({3, 1})}};
  const std::vector<double> t{0.5};
  EXPECT_THROW(cfm_loss_at<double>(ZeroField{}, tape, bad, t, 0.0), ShapeError);
}

TEST(Euler, IdentityFieldTwoSteps) {
  EXPECT_DOUBLE_EQ(euler_integrate(IdentityField{}, TD({1}, 1.0), TD({1}, 1.0), FlowConfig{0.0, 2})[0], 2.25);
}

TEST(Euler, ZeroAndConstantFields) {
  Rng rng(5);
  const auto x0 = verify::random_matrix(rng, 4, 3), c = verify::random_matrix(rng, 4, 3);
  for (std::size_t n : {1u, 3u, 10u}) {
    EXPECT_EQ(euler_integrate(ZeroField{}, x0, x0, FlowConfig{0.0, n}), x0);
    const auto out = euler_integrate(verify::ConstantField<double>{c}, x0, x0, FlowConfig{0.0, n});
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], x0[i] + c[i], 1e-12);
  }
  EXPECT_THROW(euler_integrate(ZeroField{}, x0, x0, FlowConfig{0.0, 0}), ConfigError);
}

struct BlowUp {
  Var<double> velocity(Var<double> x, Var<double>, double) const {
    return x.tape->constant(TD(x.value().shape(), 1e308));
  }
};

TEST(Euler, NonFiniteStateNamesStep) {
  try {
    euler_integrate(BlowUp{}, TD({1}, 1e308), TD({1}, 0.0), FlowConfig{0.0, 1});
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
}

TEST(Refine, ZeroModelIsNoOpAndInputUntouched) {
  Rng rng(6);
  const LatentSequence<double> z{verify::random_matrix(rng, 6, 4), Provenance::noisy};
  const auto copy = z.frames;
  const auto r = refine(z, ZeroField{}, FlowConfig{});
  EXPECT_EQ(r.frames, z.frames);
  EXPECT_EQ(r.tag, Provenance::refined);
  EXPECT_EQ(z.frames, copy);
  EXPECT_EQ(z.tag, Provenance::noisy);
}

TEST(Refine, OracleFieldReachesClean) {
  Rng rng(7);
  const auto zn = verify::random_matrix(rng, 5, 3), zc = verify::random_matrix(rng, 5, 3);
  const LatentSequence<double> z{zn, Provenance::noisy};
  for (std::size_t n : {1u, 3u, 7u}) {
    const auto r = refine(z, verify::ConstantField<double>{target_field(zn, zc, 0.0)}, FlowConfig{0.0, n});
    for (std::size_t i = 0; i < zc.size(); ++i) EXPECT_NEAR(r.frames[i], zc[i], 1e-12);
  }
  // With sigma_min > 0 the endpoint is z^c + sigma_min * z_input.
  const double s = 0.25;
  const auto r = refine(z, verify::ConstantField<double>{target_field(zn, zc, s)}, FlowConfig{s, 3});
  for (std::size_t i = 0; i < zc.size(); ++i) EXPECT_NEAR(r.frames[i], zc[i] + s * zn[i], 1e-12);
}

CorpusSpec pair_spec() {
  CorpusSpec s;
  s.vocab_size = 4;
  s.feature_dim = 8;
  s.max_len = 4;
  s.train_count = 24;
  s.dev_count = 4;
  s.test_count = 12;
  return s;
}

TEST(LatentPairs, CountsShapesAndCleanPairing) {
  const auto spec = pair_spec();
  const auto corpus = build_corpus(spec);
  EncoderConfig enc;
  enc.feature_dim = spec.feature_dim;
  enc.vocab_size = spec.vocab_size;
  enc.dim = 16;
  enc.ffn_dim = 32;
  enc.layers = 1;
  const CtcAsr<float> asr(enc, 9);
  const auto before = param_checksum(asr.params());
  const auto clean = extract_latent_pairs(corpus.dev, asr, LatentVariant::clean());
  ASSERT_EQ(clean.size(), corpus.dev.records.size());
  EXPECT_EQ(mean_pair_distance(clean), 0.0);
  const auto noisy = extract_latent_pairs(corpus.dev, asr, LatentVariant::noisy());
  const auto enh = extract_latent_pairs(corpus.dev, asr, LatentVariant::enhanced(SurrogateSE{0.7, 0.1, 3}));
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    EXPECT_EQ(noisy[i].source.shape(), (Shape{corpus.dev.records[i].clean.dim(0), 16}));
    EXPECT_EQ(noisy[i].target, clean[i].target);
    EXPECT_EQ(enh[i].source.shape(), noisy[i].source.shape());
  }
  EXPECT_GT(mean_pair_distance(noisy), mean_pair_distance(enh));
  EXPECT_EQ(param_checksum(asr.params()), before);
}

TEST(LatentPairs, DistanceFallsWithSnrForTrainedEncoder) {
  const auto spec = pair_spec();
  const auto corpus = build_corpus(spec);
  EncoderConfig enc;
  enc.feature_dim = spec.feature_dim;
  enc.vocab_size = spec.vocab_size;
  enc.dim = 16;
  enc.ffn_dim = 32;
  enc.layers = 1;
  AsrTrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.lr = 3e-3;
  const auto asr = train_asr<float>(corpus.train, corpus.dev, enc, cfg).model;
  const std::size_t grid = spec.snr_grid.size();
  std::vector<CorpusSplit> by_snr(grid);
  for (std::size_t i = 0; i < corpus.test.records.size(); ++i) {
    by_snr[i % grid].records.push_back(corpus.test.records[i]);
  }
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid; ++k) {
    const double d = mean_pair_distance(extract_latent_pairs(by_snr[k], asr, LatentVariant::noisy()));
    EXPECT_LT(d, prev) << "snr " << spec.snr_grid[k];
    prev = d;
  }
}

}  // namespace
}  // namespace lfr
