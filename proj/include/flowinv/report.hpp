// Copyright 2026 The flowinv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowinv/binning.hpp"
#include "flowinv/distribution.hpp"
#include "flowinv/error.hpp"
#include "flowinv/flowtable.hpp"
#include "flowinv/inversion.hpp"
#include "flowinv/sampling.hpp"

namespace flowinv {

struct ReportMetadata {
  std::string method;
  double p = 1.0;
  std::uint64_t seed = 0;
  double flow_timeout = 0.0;
  double export_timeout = 0.0;
  std::uint64_t buffer_capacity = 0;
  std::uint64_t packets_sampled = 0;
  std::uint64_t flows_formed = 0;
  double mean_flow_length = 0.0;

  friend bool operator==(const ReportMetadata&, const ReportMetadata&) = default;
};

// Probability mass per bin for each series; inverted_raw is the unclamped
// pooled estimate and may be negative.
struct BinRow {
  std::uint64_t bin_lo = 0;
  std::uint64_t bin_hi = 0;
  double truth = 0.0;
  double sampled = 0.0;
  double inverted_raw = 0.0;
  double inverted_clamped = 0.0;

  friend bool operator==(const BinRow&, const BinRow&) = default;
};

struct ComparisonReport {
  double total_variation = 0.0;
  double ccdf_max_gap = 0.0;
  std::vector<BinRow> per_bin_table;
  ReportMetadata metadata;

  friend bool operator==(const ComparisonReport&, const ComparisonReport&) = default;
};

inline std::vector<double> histogram_weights(const LengthHistogram& hist) {
  std::vector<double> w;
  if (!hist.empty()) w.assign(hist.rbegin()->first, 0.0);
  for (const auto& [len, count] : hist) {
    if (len == 0) throw ConfigError("histogram contains zero-length flows");
    w[len - 1] = static_cast<double>(count);
  }
  return w;
}

namespace detail {

inline std::vector<double> bin_fractions(std::span<const double> weights, const BinBoundaries& bins) {
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("distribution weights must be non-negative");
  }
  auto mass = bin_sums(weights, bins);
  const double total = accurate_sum(mass);
  if (total > 0.0) {
    for (double& m : mass) m /= total;
  }
  return mass;
}

inline double max_ccdf_gap(std::span<const double> a, std::span<const double> b) {
  const auto ca = ccdf(a);
  const auto cb = ccdf(b);
  double gap = 0.0;
  for (std::size_t i = 0; i < std::max(ca.size(), cb.size()); ++i) {
    const double ta = i < ca.size() ? ca[i].tail : 0.0;
    const double tb = i < cb.size() ? cb[i].tail : 0.0;
    gap = std::max(gap, std::abs(ta - tb));
  }
  return gap;
}

}  // namespace detail

// Compares two non-negative per-length weight vectors (weights[0] is length
// 1, normalized internally) over `bins`. Total variation is taken on bin mass
// fractions; the CCDF gap on integer lengths.
inline ComparisonReport compare(std::span<const double> truth, std::span<const double> estimate,
                                const BinBoundaries& bins) {
  const auto t = detail::bin_fractions(truth, bins);
  const auto e = detail::bin_fractions(estimate, bins);
  ComparisonReport report;
  double tv = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    tv += std::abs(t[k] - e[k]);
    report.per_bin_table.push_back({bins[k], bins[k + 1], t[k], 0.0, e[k], e[k]});
  }
  report.total_variation = std::clamp(0.5 * tv, 0.0, 1.0);
  report.ccdf_max_gap = detail::max_ccdf_gap(truth, estimate);
  return report;
}

inline ComparisonReport compare(const LengthHistogram& truth, const LengthHistogram& estimate,
                                const BinBoundaries& bins) {
  return compare(histogram_weights(truth), histogram_weights(estimate), bins);
}

// Full report: truth against the clamped inversion, with the sampled
// distribution and the raw pooled estimate alongside.
inline ComparisonReport build_report(std::span<const double> truth, const ObservedDistribution& sampled,
                                     const InversionResult& inversion, const BinBoundaries& bins,
                                     const ReportMetadata& metadata) {
  auto report = compare(truth, inversion.clamped_normalized.probs, bins);
  const auto sampled_mass = detail::bin_fractions(sampled.probs, bins);
  const auto pooled = pool_estimates(inversion.raw_estimates, bins);
  for (std::size_t k = 0; k < report.per_bin_table.size(); ++k) {
    report.per_bin_table[k].sampled = sampled_mass[k];
    report.per_bin_table[k].inverted_raw = pooled.raw[k];
  }
  report.metadata = metadata;
  return report;
}

// ---------------------------------------------------------------------------
// Plot data: per-bin CSV plus a JSON metadata sidecar next to it.

inline constexpr const char* kReportCsvHeader =
    "bin_lo,bin_hi,plot_lo,plot_hi,true,sampled,inverted_raw,inverted_clamped";

inline std::filesystem::path metadata_sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

inline nlohmann::json to_json(const ReportMetadata& m) {
  return {{"method", m.method},
          {"p", m.p},
          {"seed", m.seed},
          {"flow_timeout", m.flow_timeout},
          {"export_timeout", m.export_timeout},
          {"buffer_capacity", m.buffer_capacity},
          {"packets_sampled", m.packets_sampled},
          {"flows_formed", m.flows_formed},
          {"mean_flow_length", m.mean_flow_length}};
}

inline ReportMetadata metadata_from_json(const nlohmann::json& j) {
  ReportMetadata m;
  m.method = j.at("method").get<std::string>();
  m.p = j.at("p").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.flow_timeout = j.at("flow_timeout").get<double>();
  m.export_timeout = j.at("export_timeout").get<double>();
  m.buffer_capacity = j.at("buffer_capacity").get<std::uint64_t>();
  m.packets_sampled = j.at("packets_sampled").get<std::uint64_t>();
  m.flows_formed = j.at("flows_formed").get<std::uint64_t>();
  m.mean_flow_length = j.at("mean_flow_length").get<double>();
  return m;
}

inline void write_report_csv(std::ostream& out, const ComparisonReport& report) {
  out << kReportCsvHeader << '\n';
  char buf[320];
  for (const auto& r : report.per_bin_table) {
    std::snprintf(buf, sizeof buf, "%llu,%llu,%.1f,%.1f,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(r.bin_lo), static_cast<unsigned long long>(r.bin_hi),
                  static_cast<double>(r.bin_lo) - 0.5, static_cast<double>(r.bin_hi) - 0.5, r.truth,
                  r.sampled, r.inverted_raw, r.inverted_clamped);
    out << buf;
  }
}

inline void emit_plot_data(const ComparisonReport& report, const std::filesystem::path& csv_path) {
  {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw IoError("cannot write '" + csv_path.string() + "'");
    write_report_csv(csv, report);
    if (!csv) throw IoError("write failed for '" + csv_path.string() + "'");
  }
  const auto meta_path = metadata_sidecar_path(csv_path);
  std::ofstream meta(meta_path, std::ios::binary);
  if (!meta) throw IoError("cannot write '" + meta_path.string() + "'");
  nlohmann::json j;
  j["total_variation"] = report.total_variation;
  j["ccdf_max_gap"] = report.ccdf_max_gap;
  j["metadata"] = to_json(report.metadata);
  meta << j.dump(2) << '\n';
  if (!meta) throw IoError("write failed for '" + meta_path.string() + "'");
}

inline ComparisonReport read_plot_data(const std::filesystem::path& csv_path) {
  ComparisonReport report;
  std::ifstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot read '" + csv_path.string() + "'");
  std::string line;
  if (!std::getline(csv, line) || line != kReportCsvHeader) {
    throw IoError(csv_path.string() + ": missing report header");
  }
  std::size_t line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    BinRow r;
    unsigned long long lo = 0, hi = 0;
    double plo = 0, phi = 0;
    if (std::sscanf(line.c_str(), "%llu,%llu,%lf,%lf,%lf,%lf,%lf,%lf", &lo, &hi, &plo, &phi, &r.truth,
                    &r.sampled, &r.inverted_raw, &r.inverted_clamped) != 8) {
      throw IoError(csv_path.string() + ": malformed row at line " + std::to_string(line_no));
    }
    r.bin_lo = lo;
    r.bin_hi = hi;
    report.per_bin_table.push_back(r);
  }
  const auto meta_path = metadata_sidecar_path(csv_path);
  std::ifstream meta(meta_path, std::ios::binary);
  if (!meta) throw IoError("cannot read '" + meta_path.string() + "'");
  try {
    const auto j = nlohmann::json::parse(meta);
    report.total_variation = j.at("total_variation").get<double>();
    report.ccdf_max_gap = j.at("ccdf_max_gap").get<double>();
    report.metadata = metadata_from_json(j.at("metadata"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(meta_path.string() + ": " + e.what());
  }
  return report;
}

}  // namespace flowinv
