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

// Transformer CTC acoustic model: input projection with sinusoidal positions,
// a stack of pre-norm self-attention layers, a final layer norm, and a
// linear + log-softmax head over V symbols plus blank.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lfr/error.hpp"
#include "lfr/kv.hpp"
#include "lfr/numerics/autograd.hpp"
#include "lfr/numerics/init.hpp"
#include "lfr/numerics/ops.hpp"
#include "lfr/numerics/rng.hpp"

namespace lfr {

struct EncoderConfig {
  std::size_t feature_dim = 32;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t dim = 32;
  std::size_t ffn_dim = 128;
  std::size_t vocab_size = 8;

  std::size_t blank() const { return vocab_size; }
  std::size_t classes() const { return vocab_size + 1; }

  void validate() const {
    if (layers < 1) throw ConfigError("encoder.layers must be >= 1");
    if (heads < 1 || dim % heads != 0) {
      throw ConfigError("encoder.dim (" + std::to_string(dim) + ") must be divisible by encoder.heads (" +
                        std::to_string(heads) + ")");
    }
    if (feature_dim < 1 || ffn_dim < 1 || vocab_size < 1) {
      throw ConfigError("encoder dimensions must be positive");
    }
  }

  // feature_dim and vocab_size follow the corpus in an experiment config;
  // checkpoints echo them too.
  kv::Bindings bindings(const std::string& p = "encoder.", bool with_io_dims = true) {
    kv::Bindings b{kv::bind(p + "layers", layers), kv::bind(p + "heads", heads), kv::bind(p + "dim", dim),
                   kv::bind(p + "ffn_dim", ffn_dim)};
    if (with_io_dims) {
      b.push_back(kv::bind(p + "feature_dim", feature_dim));
      b.push_back(kv::bind(p + "vocab_size", vocab_size));
    }
    return b;
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

enum class Provenance { clean, noisy, enhanced, refined };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::clean: return "clean";
    case Provenance::noisy: return "noisy";
    case Provenance::enhanced: return "enhanced";
    case Provenance::refined: return "refined";
  }
  return "?";
}

/// Encoder output H^L, one row per input frame.
template <std::floating_point T>
struct LatentSequence {
  Tensor<T> frames;
  Provenance tag = Provenance::noisy;

  std::size_t length() const { return frames.dim(0); }
  std::size_t dim() const { return frames.dim(1); }
};

template <std::floating_point T>
Tensor<T> sinusoidal_positions(std::size_t frames, std::size_t dim) {
  Tensor<T> pe({frames, dim});
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -double(i) / double(dim));
      pe[t * dim + i] = T(std::sin(double(t) * freq));
      if (i + 1 < dim) pe[t * dim + i + 1] = T(std::cos(double(t) * freq));
    }
  }
  return pe;
}

template <std::floating_point T>
class CtcAsr {
 public:
  explicit CtcAsr(const EncoderConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    Rng rng = Rng::stream(seed, 0xa5a5);
    const std::size_t d = cfg_.dim, f = cfg_.ffn_dim;
    auto weight = [&](const std::string& name, std::size_t in, std::size_t out) {
      return params_.add(name, fan_in_uniform<T>(rng, {in, out}, in));
    };
    auto zeros = [&](const std::string& name, std::size_t n) { return params_.add(name, Tensor<T>({n})); };
    auto ones = [&](const std::string& name, std::size_t n) { return params_.add(name, filled<T>({n}, T(1))); };

    in_w_ = weight("encoder.input.weight", cfg_.feature_dim, d);
    in_b_ = zeros("encoder.input.bias", d);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      const std::string p = "encoder.layers." + std::to_string(l) + ".";
      Layer L;
      L.ln1_g = ones(p + "norm1.gain", d);
      L.ln1_b = zeros(p + "norm1.bias", d);
      L.wq = weight(p + "attn.q.weight", d, d);
      L.bq = zeros(p + "attn.q.bias", d);
      L.wk = weight(p + "attn.k.weight", d, d);
      L.bk = zeros(p + "attn.k.bias", d);
      L.wv = weight(p + "attn.v.weight", d, d);
      L.bv = zeros(p + "attn.v.bias", d);
      L.wo = weight(p + "attn.out.weight", d, d);
      L.bo = zeros(p + "attn.out.bias", d);
      L.ln2_g = ones(p + "norm2.gain", d);
      L.ln2_b = zeros(p + "norm2.bias", d);
      L.w1 = weight(p + "ffn.in.weight", d, f);
      L.b1 = zeros(p + "ffn.in.bias", f);
      L.w2 = weight(p + "ffn.out.weight", f, d);
      L.b2 = zeros(p + "ffn.out.bias", d);
      layers_.push_back(L);
    }
    out_g_ = ones("encoder.final_norm.gain", d);
    out_b_ = zeros("encoder.final_norm.bias", d);
    head_w_ = weight("head.weight", d, cfg_.classes());
    head_b_ = zeros("head.bias", cfg_.classes());
  }

  const EncoderConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  /// Features (T x F) -> latents (T x d). No temporal subsampling.
  Var<T> encode(Tape<T>& tape, const Tensor<T>& features) const {
    if (features.rank() != 2 || features.dim(1) != cfg_.feature_dim) {
      throw ShapeError("encode: expected (frames x " + std::to_string(cfg_.feature_dim) + ") features, got " +
                       shape_str(features.shape()));
    }
    const std::size_t frames = features.dim(0), d = cfg_.dim;
    auto P = [&](std::size_t i) { return tape.param(params_[i]); };

    auto x = linear(tape.constant(features), P(in_w_), P(in_b_));
    x = add(x, tape.constant(sinusoidal_positions<T>(frames, d)));
    const std::size_t dk = d / cfg_.heads;
    for (const auto& L : layers_) {
      auto h = layer_norm(x, P(L.ln1_g), P(L.ln1_b));
      auto q = linear(h, P(L.wq), P(L.bq));
      auto k = linear(h, P(L.wk), P(L.bk));
      auto v = linear(h, P(L.wv), P(L.bv));
      Var<T> heads{};
      for (std::size_t hd = 0; hd < cfg_.heads; ++hd) {
        auto o = scaled_dot_attention(slice_cols(q, hd * dk, dk), slice_cols(k, hd * dk, dk),
                                      slice_cols(v, hd * dk, dk));
        heads = hd == 0 ? o : concat_cols(heads, o);
      }
      x = add(x, linear(heads, P(L.wo), P(L.bo)));
      auto ff = layer_norm(x, P(L.ln2_g), P(L.ln2_b));
      ff = linear(relu(linear(ff, P(L.w1), P(L.b1))), P(L.w2), P(L.b2));
      x = add(x, ff);
    }
    return layer_norm(x, P(out_g_), P(out_b_));
  }

  /// Latents (T x d) -> log posteriors (T x (V+1)).
  Var<T> classify(Var<T> latents) const {
    auto& tape = *latents.tape;
    if (latents.value().rank() != 2 || latents.value().dim(1) != cfg_.dim) {
      throw ShapeError("classify: expected latent dim " + std::to_string(cfg_.dim) + ", got " +
                       shape_str(latents.value().shape()));
    }
    return log_softmax(linear(latents, tape.param(params_[head_w_]), tape.param(params_[head_b_])), 1);
  }

  LatentSequence<T> encode(const Tensor<T>& features, Provenance tag) const {
    Tape<T> tape(false);
    return {encode(tape, features).value(), tag};
  }

  Tensor<T> classify(const Tensor<T>& latents) const {
    Tape<T> tape(false);
    return classify(tape.constant(latents)).value();
  }

 private:
  struct Layer {
    std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };

  EncoderConfig cfg_;
  ParamStore<T> params_;
  std::size_t in_w_, in_b_, out_g_, out_b_, head_w_, head_b_;
  std::vector<Layer> layers_;
};

}  // namespace lfr
