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

// Synthetic paired clean/noisy corpus.
//
// Each symbol owns a unit-norm prototype feature vector. An utterance is the
// prototype sequence of its transcript, each held for a random duration,
// with a one-frame cross-fade at symbol onsets and small uniform jitter.
// Noise is white Gaussian or "babble" (four shifted streams of other
// utterances) scaled to hit the requested SNR exactly.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "lfr/asr/ctc.hpp"
#include "lfr/error.hpp"
#include "lfr/kv.hpp"
#include "lfr/numerics/parallel.hpp"
#include "lfr/numerics/rng.hpp"
#include "lfr/numerics/tensor.hpp"

namespace lfr {

enum class NoiseKind : std::uint8_t { white, babble, unknown };

inline const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::white: return "white";
    case NoiseKind::babble: return "babble";
    case NoiseKind::unknown: return "unknown";
  }
  return "?";
}

inline NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "white") return NoiseKind::white;
  if (s == "babble") return NoiseKind::babble;
  throw ConfigError("unknown noise kind '" + s + "' (expected white or babble)");
}

struct CorpusSpec {
  std::size_t vocab_size = 8;
  std::size_t min_len = 2;
  std::size_t max_len = 8;
  std::size_t min_frames = 3;  // frames per symbol
  std::size_t max_frames = 6;
  std::size_t feature_dim = 32;
  double jitter = 0.05;
  std::vector<std::string> noise_kinds{"white", "babble"};
  std::vector<double> snr_grid{-5, -2, 0, 2, 5, 10};
  double train_snr_min = -5;
  double train_snr_max = 10;
  std::size_t train_count = 800;
  std::size_t dev_count = 100;
  std::size_t test_count = 100;
  std::uint64_t seed = 1234;

  void validate() const {
    if (vocab_size < 1) throw ConfigError("corpus.vocab_size must be >= 1");
    if (vocab_size > 65535) throw ConfigError("corpus.vocab_size must fit 16 bits");
    if (min_len < 1 || max_len < min_len) throw ConfigError("corpus length range invalid (need 1 <= min_len <= max_len)");
    if (min_frames < 1 || max_frames < min_frames) throw ConfigError("corpus frames-per-symbol range invalid");
    if (feature_dim < 1) throw ConfigError("corpus.feature_dim must be >= 1");
    if (snr_grid.empty()) throw ConfigError("corpus.snr_grid must be non-empty");
    for (double s : snr_grid)
      if (!std::isfinite(s)) throw ConfigError("corpus.snr_grid entries must be finite");
    if (!(train_snr_min <= train_snr_max)) throw ConfigError("corpus train SNR range invalid");
    if (noise_kinds.empty()) throw ConfigError("corpus.noise_kinds must be non-empty");
    for (const auto& k : noise_kinds) parse_noise_kind(k);
    if (train_count < 1 || dev_count < 1 || test_count < 1) throw ConfigError("corpus split counts must be >= 1");
    if (!(jitter >= 0)) throw ConfigError("corpus.jitter must be >= 0");
  }

  kv::Bindings bindings(const std::string& p = "corpus.") {
    return {kv::bind(p + "vocab_size", vocab_size),     kv::bind(p + "min_len", min_len),
            kv::bind(p + "max_len", max_len),           kv::bind(p + "min_frames", min_frames),
            kv::bind(p + "max_frames", max_frames),     kv::bind(p + "feature_dim", feature_dim),
            kv::bind(p + "jitter", jitter),             kv::bind(p + "noise_kinds", noise_kinds),
            kv::bind(p + "snr_grid", snr_grid),         kv::bind(p + "train_snr_min", train_snr_min),
            kv::bind(p + "train_snr_max", train_snr_max), kv::bind(p + "train_count", train_count),
            kv::bind(p + "dev_count", dev_count),       kv::bind(p + "test_count", test_count),
            kv::bind(p + "seed", seed)};
  }

  std::string echo() const {
    auto copy = *this;
    return kv::to_text(kv::dump(copy.bindings()));
  }
};

/// One stored condition instance: a transcript with its clean and degraded
/// feature matrices (frames x feature_dim).
struct Utterance {
  std::uint32_t id = 0;
  Labels labels;
  Tensor<float> clean;
  Tensor<float> noisy;
  float snr_db = 0;
  NoiseKind noise = NoiseKind::unknown;
};

/// 10 log10(P_clean / P_noise) over the full utterance, with noise = noisy - clean.
template <std::floating_point T>
double measure_snr_db(const Tensor<T>& clean, const Tensor<T>& noisy) {
  clean.require_same_shape(noisy, "measure_snr_db");
  double pc = 0, pn = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double c = clean[i];
    const double n = double(noisy[i]) - c;
    pc += c * c;
    pn += n * n;
  }
  return 10.0 * std::log10(pc / pn);
}

// ---------------------------------------------------------------------------

inline Labels sample_transcript(const CorpusSpec& spec, Rng& rng) {
  const auto len = std::size_t(rng.uniform_int(std::int64_t(spec.min_len), std::int64_t(spec.max_len)));
  Labels out(len);
  for (auto& y : out) y = int(rng.uniform_int(0, std::int64_t(spec.vocab_size) - 1));
  return out;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return d / std::sqrt(na * nb);
}

/// Unit-norm symbol prototypes drawn once per corpus from the master seed.
/// For V <= 32 and F >= 32 the set is redrawn until every pairwise cosine
/// similarity is below 0.5.
class Prototypes {
 public:
  static constexpr double kMaxCosine = 0.5;

  explicit Prototypes(const CorpusSpec& spec) : dim_(spec.feature_dim) {
    Rng rng = Rng::stream(spec.seed, 0x70726f74);
    const bool enforce = spec.vocab_size <= 32 && spec.feature_dim >= 32;
    for (int attempt = 0;; ++attempt) {
      vectors_.assign(spec.vocab_size, std::vector<double>(dim_));
      for (auto& v : vectors_) {
        double n = 0;
        for (auto& x : v) {
          x = rng.normal();
          n += x * x;
        }
        n = std::sqrt(n);
        for (auto& x : v) x /= n;
      }
      if (!enforce || max_pairwise_cosine() < kMaxCosine) break;
      if (attempt == 1000) throw ConfigError("could not draw well-separated prototypes");
    }
  }

  std::size_t size() const { return vectors_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<double>& operator[](std::size_t i) const { return vectors_[i]; }

  double max_pairwise_cosine() const {
    double m = -1;
    for (std::size_t i = 0; i < vectors_.size(); ++i)
      for (std::size_t j = i + 1; j < vectors_.size(); ++j) m = std::max(m, cosine(vectors_[i], vectors_[j]));
    return m;
  }

 private:
  std::size_t dim_;
  std::vector<std::vector<double>> vectors_;
};

/// Renders a transcript in double precision.
///
/// Frame 0 of every symbol after the first is the cross-fade midpoint of the
/// two prototypes at half amplitude, so an onset stays visible even between
/// two equal symbols.
inline std::vector<double> render_features(const Labels& labels, const Prototypes& protos,
                                           const CorpusSpec& spec, double jitter, Rng& rng,
                                           std::size_t* frames_out = nullptr) {
  if (labels.empty()) throw DomainError("render_features: empty transcript");
  const std::size_t F = protos.dim();
  std::vector<std::size_t> dur(labels.size());
  std::size_t total = 0;
  for (auto& d : dur) {
    d = std::size_t(rng.uniform_int(std::int64_t(spec.min_frames), std::int64_t(spec.max_frames)));
    total += d;
  }
  std::vector<double> out(total * F);
  std::size_t t = 0;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const auto& cur = protos[std::size_t(labels[s])];
    for (std::size_t k = 0; k < dur[s]; ++k, ++t) {
      double* row = out.data() + t * F;
      if (k == 0 && s > 0) {
        const auto& prev = protos[std::size_t(labels[s - 1])];
        for (std::size_t f = 0; f < F; ++f) row[f] = 0.25 * (prev[f] + cur[f]);
      } else {
        for (std::size_t f = 0; f < F; ++f) row[f] = cur[f];
      }
    }
  }
  if (jitter > 0) {
    for (auto& v : out) v += rng.uniform(-jitter, jitter);
  }
  if (frames_out) *frames_out = total;
  return out;
}

inline Tensor<float> to_float_matrix(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  std::vector<float> f(v.begin(), v.end());
  return Tensor<float>({rows, cols}, std::move(f));
}

/// Noise field of the given kind, (frames x F), in double precision.
inline std::vector<double> generate_noise(NoiseKind kind, std::size_t frames, const Prototypes& protos,
                                          const CorpusSpec& spec, Rng& rng) {
  const std::size_t F = protos.dim();
  std::vector<double> n(frames * F, 0.0);
  switch (kind) {
    case NoiseKind::white:
      for (auto& v : n) v = rng.normal();
      break;
    case NoiseKind::babble:
      for (int stream = 0; stream < 4; ++stream) {
        Labels talk;
        std::size_t len = 0;
        std::vector<double> feats;
        // Extend the interfering transcript until it covers the utterance.
        while (len < frames) {
          talk.push_back(int(rng.uniform_int(0, std::int64_t(spec.vocab_size) - 1)));
          len += spec.max_frames;
        }
        feats = render_features(talk, protos, spec, spec.jitter, rng, &len);
        const auto shift = std::size_t(rng.uniform_int(0, std::int64_t(len) - 1));
        for (std::size_t t = 0; t < frames; ++t) {
          const std::size_t src = (t + shift) % len;
          for (std::size_t f = 0; f < F; ++f) n[t * F + f] += feats[src * F + f];
        }
      }
      break;
    case NoiseKind::unknown:
      throw DomainError("generate_noise: unknown noise kind");
  }
  return n;
}

struct MixResult {
  std::vector<double> noisy;
  double gain = 0;
};

/// noisy = clean + g * noise with g chosen so 10 log10(P_clean / P_{g noise}) = snr_db.
inline MixResult scale_to_snr(const std::vector<double>& clean, const std::vector<double>& noise, double snr_db) {
  if (!std::isfinite(snr_db)) throw DomainError("mix_noise: SNR must be finite");
  if (clean.size() != noise.size()) throw ShapeError("mix_noise: clean/noise size mismatch");
  double pc = 0, pn = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    pc += clean[i] * clean[i];
    pn += noise[i] * noise[i];
  }
  if (pc == 0) throw DomainError("mix_noise: clean signal has zero power");
  if (pn == 0) throw DomainError("mix_noise: noise has zero power");
  MixResult r;
  r.gain = std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
  r.noisy.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) r.noisy[i] = clean[i] + r.gain * noise[i];
  return r;
}

inline MixResult mix_noise(const std::vector<double>& clean, std::size_t frames, NoiseKind kind, double snr_db,
                           const Prototypes& protos, const CorpusSpec& spec, Rng& rng) {
  return scale_to_snr(clean, generate_noise(kind, frames, protos, spec, rng), snr_db);
}

// ---------------------------------------------------------------------------
// Surrogate enhancement front-end

/// enhanced = alpha clean + (1 - alpha) noisy + gamma a, where a is a smooth,
/// unit-power, low-frequency artifact field.
struct SurrogateSE {
  double alpha = 0.7;
  double gamma = 0.1;
  std::uint64_t seed = 77;

  void validate() const {
    if (!(alpha >= 0 && alpha <= 1)) throw DomainError("surrogate SE: alpha must lie in [0, 1]");
    if (!(gamma >= 0)) throw DomainError("surrogate SE: gamma must be >= 0");
  }

  std::string label() const { return "se(" + kv::format_double(alpha) + ":" + kv::format_double(gamma) + ")"; }
};

inline SurrogateSE parse_se_profile(std::string_view s) {
  const auto parts = kv::split(s, ':');
  if (parts.size() != 2) throw ConfigError("SE profile must be alpha:gamma, got '" + std::string(s) + "'");
  SurrogateSE se;
  se.alpha = kv::parse_double("se.profile", parts[0]);
  se.gamma = kv::parse_double("se.profile", parts[1]);
  se.validate();
  return se;
}

inline Tensor<float> artifact_field(std::size_t frames, std::size_t dims, Rng& rng) {
  constexpr int kComponents = 2;
  std::vector<double> a(frames * dims, 0.0);
  for (std::size_t f = 0; f < dims; ++f) {
    for (int c = 0; c < kComponents; ++c) {
      const double freq = rng.uniform(0.01, 0.08);  // cycles per frame
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (std::size_t t = 0; t < frames; ++t) {
        a[t * dims + f] += std::sin(2.0 * std::numbers::pi * freq * double(t) + phase);
      }
    }
  }
  double p = 0;
  for (double v : a) p += v * v;
  p /= double(a.size());
  if (p > 0) {
    const double s = 1.0 / std::sqrt(p);
    for (auto& v : a) v *= s;
  }
  return to_float_matrix(a, frames, dims);
}

/// `instance` keys the artifact draw (utterance id and condition).
inline Tensor<float> surrogate_enhance(const Tensor<float>& clean, const Tensor<float>& noisy, const SurrogateSE& se,
                                       std::uint64_t instance) {
  se.validate();
  clean.require_same_shape(noisy, "surrogate_enhance");
  Tensor<float> out(clean.shape());
  const double a = se.alpha;
  if (se.gamma == 0) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = float(a * double(clean[i]) + (1.0 - a) * double(noisy[i]));
    }
    return out;
  }
  Rng rng = Rng::stream(se.seed, instance, 0x5e);
  const auto art = artifact_field(clean.dim(0), clean.dim(1), rng);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = float(a * double(clean[i]) + (1.0 - a) * double(noisy[i]) + se.gamma * double(art[i]));
  }
  return out;
}

inline Tensor<float> surrogate_enhance(const Utterance& u, const SurrogateSE& se) {
  return surrogate_enhance(u.clean, u.noisy, se, (std::uint64_t(u.id) << 32) ^ std::uint64_t(std::int64_t(std::lround(u.snr_db * 1000.0))));
}

// ---------------------------------------------------------------------------
// Corpus assembly

struct CorpusSplit {
  std::string name;
  std::string spec_echo;
  std::vector<Utterance> records;
};

struct Corpus {
  CorpusSplit train, dev, test;
};

namespace detail {

enum : std::uint64_t { kLabelStream = 1, kRenderStream = 2, kNoiseStream = 3, kSnrStream = 4 };

// Builds the stored record for utterance `id` at `snr_db` (test: grid index
// `cond`; train/dev: cond = 0).
inline Utterance make_record(std::uint32_t id, const Labels& labels, const std::vector<double>& clean,
                             std::size_t frames, double snr_db, std::uint64_t cond, const Prototypes& protos,
                             const CorpusSpec& spec) {
  Rng nrng = Rng::stream(spec.seed, id, (kNoiseStream << 16) + cond);
  const auto kind_idx = std::size_t(nrng.uniform_int(0, std::int64_t(spec.noise_kinds.size()) - 1));
  const NoiseKind kind = parse_noise_kind(spec.noise_kinds[kind_idx]);
  const auto mix = mix_noise(clean, frames, kind, snr_db, protos, spec, nrng);
  Utterance u;
  u.id = id;
  u.labels = labels;
  u.clean = to_float_matrix(clean, frames, spec.feature_dim);
  u.noisy = to_float_matrix(mix.noisy, frames, spec.feature_dim);
  u.snr_db = float(measure_snr_db(u.clean, u.noisy));
  u.noise = kind;
  return u;
}

}  // namespace detail

/// Deterministic corpus from (spec, seed). Utterance ids are global and
/// disjoint across splits: train [0, n_train), dev next, test last. Test
/// stores every grid SNR for every utterance; train/dev draw one SNR
/// uniformly from [train_snr_min, train_snr_max].
inline Corpus build_corpus(const CorpusSpec& spec) {
  spec.validate();
  const Prototypes protos(spec);
  const std::string echo = spec.echo();
  Corpus c;
  c.train = {"train", echo, {}};
  c.dev = {"dev", echo, {}};
  c.test = {"test", echo, {}};

  auto fill = [&](CorpusSplit& split, std::uint32_t first_id, std::size_t count, bool grid) {
    const std::size_t per = grid ? spec.snr_grid.size() : 1;
    split.records.resize(count * per);
    parallel_for(count, [&](std::size_t i) {
      const auto id = std::uint32_t(first_id + i);
      Rng lrng = Rng::stream(spec.seed, id, detail::kLabelStream);
      const Labels labels = sample_transcript(spec, lrng);
      Rng rrng = Rng::stream(spec.seed, id, detail::kRenderStream);
      std::size_t frames = 0;
      const auto clean = render_features(labels, protos, spec, spec.jitter, rrng, &frames);
      if (grid) {
        for (std::size_t k = 0; k < per; ++k) {
          split.records[i * per + k] =
              detail::make_record(id, labels, clean, frames, spec.snr_grid[k], k, protos, spec);
        }
      } else {
        Rng srng = Rng::stream(spec.seed, id, detail::kSnrStream);
        const double snr = srng.uniform(spec.train_snr_min, spec.train_snr_max);
        split.records[i] = detail::make_record(id, labels, clean, frames, snr, 0, protos, spec);
      }
    });
  };
  fill(c.train, 0, spec.train_count, false);
  fill(c.dev, std::uint32_t(spec.train_count), spec.dev_count, false);
  fill(c.test, std::uint32_t(spec.train_count + spec.dev_count), spec.test_count, true);
  return c;
}

}  // namespace lfr
