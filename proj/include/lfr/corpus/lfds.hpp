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

// LFDS dataset split file, all integers and floats little-endian:
//
//   "LFDS"            4 bytes magic
//   version           u32 (= 1)
//   spec echo         u32 byte length + UTF-8 `key = value` lines
//   record count      u32
//   records:
//     id              u32
//     label count     u16, then labels as u16
//     frames T        u32
//     features F      u32
//     snr_db          f32 (measured on the stored matrices)
//     clean           T*F f32, row-major
//     noisy           T*F f32, row-major

#pragma once

#include <filesystem>
#include <string>

#include "lfr/binary_io.hpp"
#include "lfr/corpus/synth.hpp"

namespace lfr {

inline constexpr char kLfdsMagic[4] = {'L', 'F', 'D', 'S'};
inline constexpr std::uint32_t kLfdsVersion = 1;

inline std::vector<std::uint8_t> encode_split(const CorpusSplit& split) {
  io::ByteWriter w;
  w.raw(std::string_view(kLfdsMagic, 4));
  w.u32(kLfdsVersion);
  w.str32(split.spec_echo);
  w.u32(std::uint32_t(split.records.size()));
  for (const auto& u : split.records) {
    w.u32(u.id);
    w.u16(std::uint16_t(u.labels.size()));
    for (int y : u.labels) w.u16(std::uint16_t(y));
    w.u32(std::uint32_t(u.clean.dim(0)));
    w.u32(std::uint32_t(u.clean.dim(1)));
    w.f32(u.snr_db);
    for (float v : u.clean.data()) w.f32(v);
    for (float v : u.noisy.data()) w.f32(v);
  }
  return w.bytes();
}

inline CorpusSplit decode_split(const std::vector<std::uint8_t>& bytes, std::string name) {
  io::ByteReader r(bytes, "LFDS '" + name + "'");
  if (r.raw(4) != std::string_view(kLfdsMagic, 4)) {
    throw FormatError("LFDS '" + name + "': bad magic (expected \"LFDS\")");
  }
  if (const auto v = r.u32(); v != kLfdsVersion) {
    throw FormatError("LFDS '" + name + "': unsupported version " + std::to_string(v));
  }
  CorpusSplit split;
  split.name = std::move(name);
  split.spec_echo = r.str32();
  const std::uint32_t n = r.u32();
  split.records.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Utterance u;
    u.id = r.u32();
    u.labels.resize(r.u16());
    for (auto& y : u.labels) y = r.u16();
    const std::size_t T = r.u32(), F = r.u32();
    if (T == 0 || F == 0) throw FormatError("LFDS: empty feature matrix in record " + std::to_string(u.id));
    u.snr_db = r.f32();
    r.need(2 * T * F * 4);
    std::vector<float> clean(T * F), noisy(T * F);
    for (auto& v : clean) v = r.f32();
    for (auto& v : noisy) v = r.f32();
    u.clean = Tensor<float>({T, F}, std::move(clean));
    u.noisy = Tensor<float>({T, F}, std::move(noisy));
    split.records.push_back(std::move(u));
  }
  if (!r.at_end()) throw FormatError("LFDS '" + split.name + "': trailing bytes");
  return split;
}

inline CorpusSpec spec_from_echo(const std::string& echo) {
  CorpusSpec spec;
  kv::apply(spec.bindings(), kv::parse(echo));
  spec.validate();
  return spec;
}

inline void write_split(const CorpusSplit& split, const std::filesystem::path& path) {
  io::write_file(path, encode_split(split));
}

inline CorpusSplit read_split(const std::filesystem::path& path) {
  return decode_split(io::read_file(path), path.stem().string());
}

inline std::filesystem::path split_path(const std::filesystem::path& dir, const std::string& name) {
  return dir / (name + ".lfds");
}

inline void write_corpus(const Corpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_split(c.train, split_path(dir, "train"));
  write_split(c.dev, split_path(dir, "dev"));
  write_split(c.test, split_path(dir, "test"));
}

inline Corpus read_corpus(const std::filesystem::path& dir) {
  return {read_split(split_path(dir, "train")), read_split(split_path(dir, "dev")),
          read_split(split_path(dir, "test"))};
}

}  // namespace lfr
