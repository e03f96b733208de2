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

// 1-D U-Net vector field over latent sequences.
//
//   input    concat(x_t, z_cond) along channels, reflect-padded at the end to
//            a multiple of 2^depth frames
//   down     per level: residual block, keep skip, stride-2 conv
//   middle   residual block, single-head self-attention, residual block
//   up       per level: nearest x2 upsample + conv, concat skip, residual block
//   output   group norm, SiLU, conv to latent_dim (zero-initialized), crop
//
// Residual blocks are GN -> SiLU -> conv, + time embedding, GN -> SiLU ->
// conv, plus a 1x1 projection on the shortcut when channel counts differ.

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "lfr/error.hpp"
#include "lfr/kv.hpp"
#include "lfr/numerics/autograd.hpp"
#include "lfr/numerics/init.hpp"
#include "lfr/numerics/ops.hpp"
#include "lfr/numerics/rng.hpp"

namespace lfr {

struct RefinerConfig {
  std::size_t depth = 2;
  std::size_t base_channels = 32;
  std::vector<std::size_t> channel_mults{1, 2};
  std::size_t time_dim = 32;
  std::size_t latent_dim = 32;
  std::size_t groups = 8;

  std::size_t channels(std::size_t level) const { return base_channels * channel_mults.at(level); }
  std::size_t groups_for(std::size_t c) const { return std::gcd(groups, c); }
  std::size_t multiple() const { return std::size_t(1) << depth; }

  void validate() const {
    if (depth < 1) throw ConfigError("refiner.depth must be >= 1");
    if (channel_mults.size() != depth) {
      throw ConfigError("refiner.channel_mults needs one entry per level (" + std::to_string(depth) + ")");
    }
    for (auto m : channel_mults)
      if (m < 1) throw ConfigError("refiner.channel_mults entries must be >= 1");
    if (base_channels < 1 || latent_dim < 1 || groups < 1) throw ConfigError("refiner dimensions must be positive");
    if (time_dim < 2 || time_dim % 2 != 0) throw ConfigError("refiner.time_dim must be even and >= 2");
  }

  // latent_dim follows encoder.dim in an experiment config.
  kv::Bindings bindings(const std::string& p = "refiner.", bool with_latent_dim = true) {
    kv::Bindings b{kv::bind(p + "depth", depth), kv::bind(p + "base_channels", base_channels),
                   kv::bind(p + "channel_mults", channel_mults), kv::bind(p + "time_dim", time_dim),
                   kv::bind(p + "groups", groups)};
    if (with_latent_dim) b.push_back(kv::bind(p + "latent_dim", latent_dim));
    return b;
  }

  friend bool operator==(const RefinerConfig&, const RefinerConfig&) = default;
};

/// Highest angular frequency of the raw time embedding. The frequencies are
/// log-spaced on [1, kTimeMaxFrequency].
inline constexpr double kTimeMaxFrequency = 50.0;

inline std::vector<double> time_frequencies(std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw DomainError("time embedding dim must be even and positive");
  const std::size_t half = dim / 2;
  std::vector<double> w(half, 1.0);
  for (std::size_t k = 0; k < half && half > 1; ++k) {
    w[k] = std::pow(kTimeMaxFrequency, double(k) / double(half - 1));
  }
  return w;
}

/// [sin(t w_0) .. sin(t w_{h-1}), cos(t w_0) .. cos(t w_{h-1})] as a (1 x dim) row.
template <std::floating_point T>
Tensor<T> time_embedding_raw(double t, std::size_t dim) {
  const auto w = time_frequencies(dim);
  Tensor<T> e({1, dim});
  for (std::size_t k = 0; k < w.size(); ++k) {
    e[k] = T(std::sin(t * w[k]));
    e[w.size() + k] = T(std::cos(t * w[k]));
  }
  return e;
}

template <std::floating_point T>
class UNetRefiner {
 public:
  explicit UNetRefiner(const RefinerConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    Rng rng = Rng::stream(seed, 0x756e6574);
    const std::size_t D = cfg_.depth, td = cfg_.time_dim;

    temb_w_ = add_weight(rng, "refiner.time.weight", {td, td}, td);
    temb_b_ = add_zeros("refiner.time.bias", td);
    in_ = add_conv(rng, "refiner.in", 3, 2 * cfg_.latent_dim, cfg_.channels(0));

    std::size_t c = cfg_.channels(0);
    for (std::size_t i = 0; i < D; ++i) {
      const std::string p = "refiner.down." + std::to_string(i) + ".";
      down_res_.push_back(add_res(rng, p + "res.", c, cfg_.channels(i)));
      c = cfg_.channels(i);
      down_conv_.push_back(add_conv(rng, p + "downsample", 3, c, c));
    }
    mid1_ = add_res(rng, "refiner.mid.res1.", c, c);
    attn_ = add_attn(rng, "refiner.mid.attn.", c);
    mid2_ = add_res(rng, "refiner.mid.res2.", c, c);
    up_conv_.resize(D);
    up_res_.resize(D);
    for (std::size_t i = D; i-- > 0;) {
      const std::string p = "refiner.up." + std::to_string(i) + ".";
      up_conv_[i] = add_conv(rng, p + "upsample", 3, c, c);
      up_res_[i] = add_res(rng, p + "res.", c + cfg_.channels(i), cfg_.channels(i));
      c = cfg_.channels(i);
    }
    out_g_ = add_ones("refiner.out.norm.gain", c);
    out_b_ = add_zeros("refiner.out.norm.bias", c);
    out_ = Conv{params_.add("refiner.out.conv.weight", Tensor<T>({3, c, cfg_.latent_dim})),
                add_zeros("refiner.out.conv.bias", cfg_.latent_dim)};
  }

  const RefinerConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  /// Time embedding after the learned affine map and SiLU, (1 x time_dim).
  Var<T> time_embed(Tape<T>& tape, T t) const {
    return silu(linear(tape.constant(time_embedding_raw<T>(double(t), cfg_.time_dim)),
                       tape.param(params_[temb_w_]), tape.param(params_[temb_b_])));
  }

  /// Velocity at (x_t, z_cond, t); output has the shape of x_t.
  Var<T> velocity(Var<T> x_t, Var<T> z_cond, T t) const {
    auto& tape = *x_t.tape;
    const auto& xs = x_t.value().shape();
    if (xs.size() != 2 || xs[1] != cfg_.latent_dim) {
      throw ShapeError("unet_forward: expected (frames x " + std::to_string(cfg_.latent_dim) + ") latents, got " +
                       shape_str(xs));
    }
    if (z_cond.value().shape() != xs) {
      throw ShapeError("unet_forward: condition " + shape_str(z_cond.value().shape()) + " vs state " + shape_str(xs));
    }
    check_time(double(t), "unet_forward");
    const std::size_t frames = xs[0];
    const std::size_t m = cfg_.multiple();
    const std::size_t padded = (frames + m - 1) / m * m;

    auto temb = time_embed(tape, t);
    auto h = concat_cols(x_t, z_cond);
    if (padded != frames) h = reflect_pad_rows(h, padded);
    h = conv(tape, in_, h, 1, 1);

    std::vector<Var<T>> skips;
    for (std::size_t i = 0; i < cfg_.depth; ++i) {
      h = res_block(tape, down_res_[i], h, temb);
      skips.push_back(h);
      h = conv(tape, down_conv_[i], h, 2, 1);
    }
    h = res_block(tape, mid1_, h, temb);
    h = attention(tape, attn_, h);
    h = res_block(tape, mid2_, h, temb);
    for (std::size_t i = cfg_.depth; i-- > 0;) {
      h = conv(tape, up_conv_[i], upsample_nearest(h, 2), 1, 1);
      h = res_block(tape, up_res_[i], concat_cols(h, skips[i]), temb);
    }
    h = silu(group_norm(h, cfg_.groups_for(h.value().dim(1)), tape.param(params_[out_g_]),
                        tape.param(params_[out_b_])));
    h = conv(tape, out_, h, 1, 1);
    return padded != frames ? crop_rows(h, frames) : h;
  }

 private:
  struct Conv {
    std::size_t w, b;
  };
  struct Res {
    std::size_t cin, cout;
    std::size_t gn1_g, gn1_b, gn2_g, gn2_b, temb_w, temb_b;
    Conv conv1, conv2;
    bool has_skip = false;
    Conv skip{};
  };
  struct Attn {
    std::size_t gn_g, gn_b, wq, bq, wk, bk, wv, bv, wo, bo;
  };

  std::size_t add_weight(Rng& rng, const std::string& name, Shape shape, std::size_t fan_in) {
    return params_.add(name, fan_in_uniform<T>(rng, std::move(shape), fan_in));
  }
  std::size_t add_zeros(const std::string& name, std::size_t n) { return params_.add(name, Tensor<T>({n})); }
  std::size_t add_ones(const std::string& name, std::size_t n) { return params_.add(name, filled<T>({n}, T(1))); }
  Conv add_conv(Rng& rng, const std::string& name, std::size_t k, std::size_t cin, std::size_t cout) {
    return {add_weight(rng, name + ".weight", {k, cin, cout}, k * cin), add_zeros(name + ".bias", cout)};
  }
  Res add_res(Rng& rng, const std::string& p, std::size_t cin, std::size_t cout) {
    Res r;
    r.cin = cin;
    r.cout = cout;
    r.gn1_g = add_ones(p + "norm1.gain", cin);
    r.gn1_b = add_zeros(p + "norm1.bias", cin);
    r.conv1 = add_conv(rng, p + "conv1", 3, cin, cout);
    r.temb_w = add_weight(rng, p + "time.weight", {cfg_.time_dim, cout}, cfg_.time_dim);
    r.temb_b = add_zeros(p + "time.bias", cout);
    r.gn2_g = add_ones(p + "norm2.gain", cout);
    r.gn2_b = add_zeros(p + "norm2.bias", cout);
    r.conv2 = add_conv(rng, p + "conv2", 3, cout, cout);
    if (cin != cout) {
      r.has_skip = true;
      r.skip = add_conv(rng, p + "shortcut", 1, cin, cout);
    }
    return r;
  }
  Attn add_attn(Rng& rng, const std::string& p, std::size_t c) {
    Attn a;
    a.gn_g = add_ones(p + "norm.gain", c);
    a.gn_b = add_zeros(p + "norm.bias", c);
    a.wq = add_weight(rng, p + "q.weight", {c, c}, c);
    a.bq = add_zeros(p + "q.bias", c);
    a.wk = add_weight(rng, p + "k.weight", {c, c}, c);
    a.bk = add_zeros(p + "k.bias", c);
    a.wv = add_weight(rng, p + "v.weight", {c, c}, c);
    a.bv = add_zeros(p + "v.bias", c);
    a.wo = add_weight(rng, p + "out.weight", {c, c}, c);
    a.bo = add_zeros(p + "out.bias", c);
    return a;
  }

  Var<T> P(Tape<T>& tape, std::size_t i) const { return tape.param(params_[i]); }

  Var<T> conv(Tape<T>& tape, const Conv& c, Var<T> x, std::size_t stride, std::size_t pad) const {
    return conv1d(x, P(tape, c.w), P(tape, c.b), stride, pad);
  }

  Var<T> res_block(Tape<T>& tape, const Res& r, Var<T> x, Var<T> temb) const {
    auto h = silu(group_norm(x, cfg_.groups_for(r.cin), P(tape, r.gn1_g), P(tape, r.gn1_b)));
    h = conv(tape, r.conv1, h, 1, 1);
    h = add_row(h, linear(temb, P(tape, r.temb_w), P(tape, r.temb_b)));
    h = silu(group_norm(h, cfg_.groups_for(r.cout), P(tape, r.gn2_g), P(tape, r.gn2_b)));
    h = conv(tape, r.conv2, h, 1, 1);
    auto shortcut = r.has_skip ? conv(tape, r.skip, x, 1, 0) : x;
    return add(h, shortcut);
  }

  Var<T> attention(Tape<T>& tape, const Attn& a, Var<T> x) const {
    const std::size_t c = x.value().dim(1);
    auto h = group_norm(x, cfg_.groups_for(c), P(tape, a.gn_g), P(tape, a.gn_b));
    auto q = linear(h, P(tape, a.wq), P(tape, a.bq));
    auto k = linear(h, P(tape, a.wk), P(tape, a.bk));
    auto v = linear(h, P(tape, a.wv), P(tape, a.bv));
    return add(x, linear(scaled_dot_attention(q, k, v), P(tape, a.wo), P(tape, a.bo)));
  }

  RefinerConfig cfg_;
  ParamStore<T> params_;
  std::size_t temb_w_, temb_b_, out_g_, out_b_;
  Conv in_, out_;
  std::vector<Res> down_res_, up_res_;
  std::vector<Conv> down_conv_, up_conv_;
  Res mid1_, mid2_;
  Attn attn_;
};

/// Freshly initialized refiner. The output conv is zero, so the untrained
/// field is identically zero and refinement is the identity.
template <std::floating_point T>
UNetRefiner<T> init_params(const RefinerConfig& cfg, std::uint64_t seed) {
  return UNetRefiner<T>(cfg, seed);
}

}  // namespace lfr
