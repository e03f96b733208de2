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

// Plain-text `section.key = value` configuration: parsing, formatting and
// typed bindings from keys to struct fields.

#pragma once

#include <charconv>
#include <concepts>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "lfr/error.hpp"

namespace lfr::kv {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline double parse_double(std::string_view key, std::string_view s) {
  s = trim(s);
  double v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError("config key '" + std::string(key) + "': not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::uint64_t parse_uint(std::string_view key, std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError("config key '" + std::string(key) + "': not a non-negative integer: '" +
                      std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  s = trim(s);
  if (s.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Ordered key/value entries.
using Entries = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines; `#` starts a comment; blank lines ignored.
inline Entries parse(std::string_view text) {
  Entries out;
  std::map<std::string, int> seen;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = line;
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    sv = trim(sv);
    if (sv.empty()) continue;
    const auto eq = sv.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(trim(sv.substr(0, eq)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (seen[key]++) throw ConfigError("config key '" + key + "' given twice");
    out.emplace_back(std::move(key), std::string(trim(sv.substr(eq + 1))));
  }
  return out;
}

inline std::string to_text(const Entries& e) {
  std::string out;
  for (const auto& [k, v] : e) out += k + " = " + v + "\n";
  return out;
}

struct Binding {
  std::string key;
  std::function<std::string()> get;
  std::function<void(std::string_view)> set;
};

using Bindings = std::vector<Binding>;

template <std::unsigned_integral U>
Binding bind(std::string key, U& ref) {
  return {key, [&ref] { return std::to_string(ref); },
          [&ref, key](std::string_view s) { ref = U(parse_uint(key, s)); }};
}

inline Binding bind(std::string key, double& ref) {
  return {key, [&ref] { return format_double(ref); },
          [&ref, key](std::string_view s) { ref = parse_double(key, s); }};
}

inline Binding bind(std::string key, std::string& ref) {
  return {key, [&ref] { return ref; }, [&ref](std::string_view s) { ref = std::string(s); }};
}

inline Binding bind(std::string key, std::vector<double>& ref) {
  return {key,
          [&ref] {
            std::string s;
            for (std::size_t i = 0; i < ref.size(); ++i) s += (i ? "," : "") + format_double(ref[i]);
            return s;
          },
          [&ref, key](std::string_view s) {
            ref.clear();
            for (const auto& part : split(s, ',')) ref.push_back(parse_double(key, part));
          }};
}

inline Binding bind(std::string key, std::vector<std::size_t>& ref) {
  return {key,
          [&ref] {
            std::string s;
            for (std::size_t i = 0; i < ref.size(); ++i) s += (i ? "," : "") + std::to_string(ref[i]);
            return s;
          },
          [&ref, key](std::string_view s) {
            ref.clear();
            for (const auto& part : split(s, ',')) ref.push_back(std::size_t(parse_uint(key, part)));
          }};
}

inline Binding bind(std::string key, std::vector<std::string>& ref) {
  return {key,
          [&ref] {
            std::string s;
            for (std::size_t i = 0; i < ref.size(); ++i) s += (i ? "," : "") + ref[i];
            return s;
          },
          [&ref](std::string_view s) { ref = split(s, ','); }};
}

inline Entries dump(const Bindings& b) {
  Entries out;
  for (const auto& x : b) out.emplace_back(x.key, x.get());
  return out;
}

/// Applies entries to bindings. Unknown keys are errors unless `ignore_unknown`.
inline void apply(const Bindings& b, const Entries& entries, bool ignore_unknown = false) {
  std::map<std::string_view, const Binding*> by_key;
  for (const auto& x : b) by_key[x.key] = &x;
  for (const auto& [k, v] : entries) {
    auto it = by_key.find(k);
    if (it == by_key.end()) {
      if (ignore_unknown) continue;
      throw ConfigError("unknown config key '" + k + "'");
    }
    it->second->set(v);
  }
}

}  // namespace lfr::kv
