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


// Per-condition, per-SNR WER table with an unweighted average row.

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lfr/binary_io.hpp"
#include "lfr/error.hpp"
#include "lfr/kv.hpp"

namespace lfr {

struct ReportRow {
  std::string condition;
  std::optional<double> snr_db;  // empty on the average row
  std::size_t n_utts = 0;
  double wer = 0;

  bool is_average() const { return !snr_db.has_value(); }
  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct EvalReport {
  std::vector<ReportRow> rows;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;

  std::vector<std::string> conditions() const {
    std::vector<std::string> out;
    for (const auto& r : rows) {
      if (std::find(out.begin(), out.end(), r.condition) == out.end()) out.push_back(r.condition);
    }
    return out;
  }

  const ReportRow* find(const std::string& condition, std::optional<double> snr) const {
    for (const auto& r : rows) {
      if (r.condition == condition && r.snr_db == snr) return &r;
    }
    return nullptr;
  }

  double average(const std::string& condition) const {
    const auto* r = find(condition, std::nullopt);
    if (!r) throw DomainError("report has no average row for '" + condition + "'");
    return r->wer;
  }

  /// Appends per-SNR rows for one condition followed by its average, the
  /// unweighted mean of the per-SNR WERs in row order.
  void add_condition(const std::string& condition, const std::vector<ReportRow>& per_snr) {
    if (per_snr.empty()) throw DomainError("report: condition '" + condition + "' has no rows");
    double sum = 0;
    std::size_t n = 0;
    for (const auto& r : per_snr) {
      rows.push_back(r);
      rows.back().condition = condition;
      sum += r.wer;
      n += r.n_utts;
    }
    rows.push_back({condition, std::nullopt, n, sum / double(per_snr.size())});
  }
};

inline constexpr const char* kReportHeader = "condition,snr_db,n_utts,wer";

inline std::string report_csv(const EvalReport& r) {
  std::string out = std::string(kReportHeader) + "\n";
  for (const auto& row : r.rows) {
    if (row.condition.find_first_of(",\n") != std::string::npos) {
      throw FormatError("report: condition label may not contain ',' or newline");
    }
    out += row.condition + "," + (row.snr_db ? kv::format_double(*row.snr_db) : std::string("avg")) + "," +
           std::to_string(row.n_utts) + "," + kv::format_double(row.wer) + "\n";
  }
  return out;
}

inline EvalReport parse_report_csv(std::string_view text) {
  EvalReport r;
  std::size_t line_no = 0;
  for (const auto& raw : kv::split(text, '\n')) {
    const auto line = kv::trim(raw);
    ++line_no;
    if (line_no == 1) {
      if (line != kReportHeader) throw FormatError("report csv: bad header '" + std::string(line) + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto f = kv::split(line, ',');
    if (f.size() != 4) throw FormatError("report csv: line " + std::to_string(line_no) + " needs 4 fields");
    ReportRow row;
    row.condition = f[0];
    try {
      if (f[1] != "avg") row.snr_db = kv::parse_double("snr_db", f[1]);
      row.n_utts = std::size_t(kv::parse_uint("n_utts", f[2]));
      row.wer = kv::parse_double("wer", f[3]);
    } catch (const ConfigError& e) {
      throw FormatError("report csv: line " + std::to_string(line_no) + ": " + e.what());
    }
    r.rows.push_back(std::move(row));
  }
  if (line_no == 0) throw FormatError("report csv: empty file");
  return r;
}

/// Fixed-width table, WER in percent: one row per condition, the SNR columns
/// in the order they first appear, then Avg.
inline std::string report_table(const EvalReport& r) {
  std::vector<double> snrs;
  for (const auto& row : r.rows) {
    if (row.snr_db && std::find(snrs.begin(), snrs.end(), *row.snr_db) == snrs.end()) snrs.push_back(*row.snr_db);
  }
  std::size_t width = 9;
  for (const auto& c : r.conditions()) width = std::max(width, c.size());
  char buf[64];
  auto cell = [&](const std::string& s) {
    std::snprintf(buf, sizeof buf, "%8s", s.c_str());
    return std::string(buf);
  };
  std::string out = "condition" + std::string(width - 9, ' ');
  for (double s : snrs) out += cell(kv::format_double(s));
  out += cell("Avg.") + "\n";
  for (const auto& c : r.conditions()) {
    out += c + std::string(width - c.size(), ' ');
    auto pct = [&](const ReportRow* row) {
      if (!row) return cell("-");
      std::snprintf(buf, sizeof buf, "%8.2f", 100.0 * row->wer);
      return std::string(buf);
    };
    for (double s : snrs) out += pct(r.find(c, s));
    out += pct(r.find(c, std::nullopt)) + "\n";
  }
  return out;
}

inline void write_report(const EvalReport& r, const std::filesystem::path& path, const std::string& format) {
  if (format == "csv") {
    io::write_text(path, report_csv(r));
  } else if (format == "text") {
    io::write_text(path, report_table(r));
  } else {
    throw ConfigError("report format must be csv or text, got '" + format + "'");
  }
}

inline EvalReport read_report_csv(const std::filesystem::path& path) { return parse_report_csv(io::read_text(path)); }

}  // namespace lfr
