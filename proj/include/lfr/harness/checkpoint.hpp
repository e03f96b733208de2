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


// Checkpoint file, little-endian:
//
//   "LFCK"          4 bytes magic
//   version         u32 (= 1)
//   kind            u8 length + "asr" | "refiner"
//   config echo     u32 byte length + `key = value` lines
//   epoch           u32
//   dev metric      f64
//   seed            u64
//   tensor count    u32
//   tensors:        u16 name length, name, u8 rank, u32 dims, f32 values

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lfr/asr/encoder.hpp"
#include "lfr/binary_io.hpp"
#include "lfr/kv.hpp"
#include "lfr/refiner/unet.hpp"

namespace lfr {

inline constexpr char kCkptMagic[4] = {'L', 'F', 'C', 'K'};
inline constexpr std::uint32_t kCkptVersion = 1;

enum class ModelKind { asr, refiner };

inline const char* to_string(ModelKind k) { return k == ModelKind::asr ? "asr" : "refiner"; }

struct CheckpointMeta {
  std::uint32_t epoch = 0;
  double dev_metric = 0;
  std::uint64_t seed = 0;
};

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

struct Checkpoint {
  ModelKind kind = ModelKind::asr;
  std::string config_echo;
  CheckpointMeta meta;
  std::vector<NamedTensor> tensors;
};

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  io::ByteWriter w;
  w.raw(std::string_view(kCkptMagic, 4));
  w.u32(kCkptVersion);
  const std::string kind = to_string(c.kind);
  w.u8(std::uint8_t(kind.size()));
  w.raw(kind);
  w.str32(c.config_echo);
  w.u32(c.meta.epoch);
  w.f64(c.meta.dev_metric);
  w.u64(c.meta.seed);
  w.u32(std::uint32_t(c.tensors.size()));
  for (const auto& t : c.tensors) {
    if (t.name.size() > 0xffff) throw FormatError("checkpoint: tensor name too long: " + t.name);
    w.u16(std::uint16_t(t.name.size()));
    w.raw(t.name);
    w.u8(std::uint8_t(t.value.rank()));
    for (auto d : t.value.shape()) w.u32(std::uint32_t(d));
    for (float v : t.value.data()) w.f32(v);
  }
  return w.bytes();
}

/// Parses checkpoint bytes; `what` names the source in errors.
inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& what,
                                    std::optional<ModelKind> expected = std::nullopt) {
  io::ByteReader r(bytes, "checkpoint '" + what + "'");
  const auto magic = bytes.size() >= 4 ? r.raw(4) : std::string();
  if (magic != std::string_view(kCkptMagic, 4)) {
    throw FormatError("checkpoint '" + what + "': bad magic (expected \"LFCK\")");
  }
  if (const auto v = r.u32(); v != kCkptVersion) {
    throw FormatError("checkpoint '" + what + "': unsupported version " + std::to_string(v) + " (expected " +
                      std::to_string(kCkptVersion) + ")");
  }
  Checkpoint c;
  const std::string kind = r.raw(r.u8());
  if (kind == "asr") {
    c.kind = ModelKind::asr;
  } else if (kind == "refiner") {
    c.kind = ModelKind::refiner;
  } else {
    throw FormatError("checkpoint '" + what + "': unknown model kind '" + kind + "'");
  }
  if (expected && *expected != c.kind) {
    throw FormatError("checkpoint '" + what + "': kind mismatch (expected " + to_string(*expected) + ", found " +
                      kind + ")");
  }
  c.config_echo = r.str32();
  c.meta.epoch = r.u32();
  c.meta.dev_metric = r.f64();
  c.meta.seed = r.u64();
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    NamedTensor t;
    t.name = r.raw(r.u16());
    Shape shape(r.u8());
    if (shape.empty()) throw FormatError("checkpoint '" + what + "': tensor " + t.name + " has rank 0");
    for (auto& d : shape) d = r.u32();
    const std::size_t count = shape_size(shape);
    r.need(count * 4);
    std::vector<float> data(count);
    for (auto& v : data) v = r.f32();
    t.value = Tensor<float>(std::move(shape), std::move(data));
    c.tensors.push_back(std::move(t));
  }
  if (!r.at_end()) throw FormatError("checkpoint '" + what + "': trailing bytes");
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<ModelKind> expected = std::nullopt) {
  return decode_checkpoint(io::read_file(path), path.string(), expected);
}

template <std::floating_point T>
std::vector<NamedTensor> export_params(const ParamStore<T>& params) {
  std::vector<NamedTensor> out;
  for (const auto& p : params) out.push_back({p.name, p.value.template cast<float>()});
  return out;
}

/// Copies tensors into `params`; the name sets must match exactly.
template <std::floating_point T>
void import_params(ParamStore<T>& params, const std::vector<NamedTensor>& tensors, const std::string& what) {
  if (tensors.size() != params.size()) {
    throw FormatError("checkpoint '" + what + "': holds " + std::to_string(tensors.size()) + " tensors, model has " +
                      std::to_string(params.size()));
  }
  ParamStore<float> src;
  for (const auto& t : tensors) src.add(t.name, t.value);
  try {
    params.assign_from(src);
  } catch (const std::exception& e) {
    throw FormatError("checkpoint '" + what + "': " + e.what());
  }
}

inline Checkpoint make_checkpoint(const CtcAsr<float>& m, CheckpointMeta meta) {
  auto cfg = m.config();
  return {ModelKind::asr, kv::to_text(kv::dump(cfg.bindings())), meta, export_params(m.params())};
}

inline Checkpoint make_checkpoint(const UNetRefiner<float>& m, CheckpointMeta meta) {
  auto cfg = m.config();
  return {ModelKind::refiner, kv::to_text(kv::dump(cfg.bindings())), meta, export_params(m.params())};
}

inline CtcAsr<float> asr_from_checkpoint(const Checkpoint& c, const std::string& what) {
  if (c.kind != ModelKind::asr) throw FormatError("checkpoint '" + what + "': kind mismatch (expected asr)");
  EncoderConfig cfg;
  try {
    kv::apply(cfg.bindings(), kv::parse(c.config_echo));
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError("checkpoint '" + what + "': bad config echo: " + e.what());
  }
  CtcAsr<float> m(cfg, 0);
  import_params(m.params(), c.tensors, what);
  return m;
}

inline UNetRefiner<float> refiner_from_checkpoint(const Checkpoint& c, const std::string& what) {
  if (c.kind != ModelKind::refiner) throw FormatError("checkpoint '" + what + "': kind mismatch (expected refiner)");
  RefinerConfig cfg;
  try {
    kv::apply(cfg.bindings(), kv::parse(c.config_echo));
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError("checkpoint '" + what + "': bad config echo: " + e.what());
  }
  UNetRefiner<float> m(cfg, 0);
  import_params(m.params(), c.tensors, what);
  return m;
}

inline CtcAsr<float> load_asr(const std::filesystem::path& path) {
  return asr_from_checkpoint(load_checkpoint(path, ModelKind::asr), path.string());
}

inline UNetRefiner<float> load_refiner(const std::filesystem::path& path) {
  return refiner_from_checkpoint(load_checkpoint(path, ModelKind::refiner), path.string());
}

}  // namespace lfr
