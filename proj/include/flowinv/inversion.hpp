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

// Estimating the original flow-length distribution from sample-and-hold
// observations.
//
// For sample-and-hold by packet with start probability p (q = 1 - p), the
// observed lengths X_i satisfy q^i X_i = C sum_{j>=i} q^j theta_j with
// C = 1 - q + q X_1, which inverts to
//
//   theta_i = (X_i - q X_{i+1}) / C.
//
// The estimate depends on differences of neighbouring X, so sampling noise
// can make individual estimates negative. They are reported as-is together
// with a clamped-and-renormalized variant.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowinv/binning.hpp"
#include "flowinv/distribution.hpp"
#include "flowinv/error.hpp"
#include "flowinv/flowtable.hpp"
#include "flowinv/sampling.hpp"

namespace flowinv {

struct InversionResult {
  double p = 1.0;  // start probability the inversion assumed
  double normalizer = 1.0;  // C
  std::vector<double> raw_estimates;  // raw_estimates[0] is length 1
  FlowLengthDistribution clamped_normalized;
  std::vector<std::uint64_t> negative_indices;  // 1-based lengths
  bool approximate = false;  // set by the by-byte approximation
};

namespace detail {

inline FlowLengthDistribution clamp_and_normalize(const std::vector<double>& raw) {
  FlowLengthDistribution out{raw};
  for (double& v : out.probs) v = std::max(v, 0.0);
  const double total = accurate_sum(out.probs);
  if (total > 0.0) {
    for (double& v : out.probs) v /= total;
  }
  return out;
}

}  // namespace detail

inline InversionResult invert_sh_packet(const ObservedDistribution& observed, double p) {
  detail::check_probability(p);
  const auto& x = observed.probs;
  if (x.empty()) throw InversionError("cannot invert an empty observed distribution");
  const double q = 1.0 - p;
  std::vector<double> numerators(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double next = i + 1 < x.size() ? x[i + 1] : 0.0;  // X_{M+1} = 0
    numerators[i] = x[i] - q * next;
  }
  // C is the telescoped sum of the numerators, 1 - q + q X_1 when X sums to
  // 1. Summing them directly keeps the estimates summing to 1 even when C is
  // tiny and X carries rounding error.
  const double c = accurate_sum(numerators);
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw InversionError("normalizer C = " + std::to_string(c) + " is not positive; observed data corrupt");
  }
  InversionResult result;
  result.p = p;
  result.normalizer = c;
  result.raw_estimates.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    result.raw_estimates[i] = numerators[i] / c;
    if (result.raw_estimates[i] < 0.0) result.negative_indices.push_back(i + 1);
  }
  result.clamped_normalized = detail::clamp_and_normalize(result.raw_estimates);
  return result;
}

struct PooledEstimate {
  BinBoundaries boundaries;
  std::vector<double> raw;      // sum of raw estimates in each bin
  std::vector<double> clamped;  // raw bin sums clamped at 0, renormalized
};

inline PooledEstimate pool_estimates(const std::vector<double>& raw_estimates,
                                     const BinBoundaries& bins) {
  PooledEstimate out{bins, bin_sums(raw_estimates, bins), {}};
  out.clamped = out.raw;
  for (double& v : out.clamped) v = std::max(v, 0.0);
  const double total = accurate_sum(out.clamped);
  if (total > 0.0) {
    for (double& v : out.clamped) v /= total;
  }
  return out;
}

inline PooledEstimate invert_sh_packet_pooled(const ObservedDistribution& observed, double p,
                                              const BinBoundaries& bins) {
  return pool_estimates(invert_sh_packet(observed, p).raw_estimates, bins);
}

// Start probability of a packet of `mean_packet_len` bytes under by-byte
// sampling with per-byte probability p.
inline double effective_byte_probability(double p_per_byte, double mean_packet_len) {
  detail::check_probability(p_per_byte);
  if (!(mean_packet_len >= 1.0)) throw ConfigError("mean packet length must be at least 1 byte");
  return byte_start_probability(p_per_byte, mean_packet_len);
}

// Approximation: treat the by-byte sample as a by-packet sample whose start
// probability is that of a mean-sized packet.
inline InversionResult invert_sh_byte(const ObservedDistribution& observed, double p_per_byte,
                                      double mean_packet_len) {
  auto result = invert_sh_packet(observed, effective_byte_probability(p_per_byte, mean_packet_len));
  result.approximate = true;
  return result;
}

// Arithmetic mean length of the sampled packets.
inline double mean_sampled_packet_len(const FlowSet& flows) {
  std::uint64_t packets = 0;
  std::uint64_t bytes = 0;
  for (const auto& r : flows.records) {
    packets += r.packet_count;
    bytes += r.byte_count;
  }
  if (packets == 0) throw InversionError("no sampled packets to average");
  return static_cast<double>(bytes) / static_cast<double>(packets);
}

struct SynEstimate {
  FlowLengthDistribution distribution;  // TCP flows only
  std::uint64_t flows = 0;
  std::optional<std::string> warning;
};

// Sample-and-hold by SYN approximates flow sampling of TCP flows, so the
// sampled lengths are used directly.
inline SynEstimate syn_estimate(const FlowSet& flows) {
  SynEstimate out;
  const auto hist = tcp_flow_length_histogram(flows);
  out.flows = total_count(hist);
  if (out.flows == 0) {
    out.warning = "no TCP flows were sampled; estimate is empty";
    return out;
  }
  out.distribution = distribution_from_histogram(hist);
  return out;
}

// ---------------------------------------------------------------------------
// JSON: {p, C, raw, clamped, negative_indices, ...}

inline nlohmann::json to_json(const InversionResult& r) {
  nlohmann::json j;
  j["p"] = r.p;
  j["C"] = r.normalizer;
  j["raw"] = r.raw_estimates;
  j["clamped"] = r.clamped_normalized.probs;
  j["negative_indices"] = r.negative_indices;
  j["approximate"] = r.approximate;
  return j;
}

inline InversionResult inversion_from_json(const nlohmann::json& j) {
  try {
    InversionResult r;
    r.p = j.at("p").get<double>();
    r.normalizer = j.at("C").get<double>();
    r.raw_estimates = j.at("raw").get<std::vector<double>>();
    r.clamped_normalized.probs = j.at("clamped").get<std::vector<double>>();
    r.negative_indices = j.at("negative_indices").get<std::vector<std::uint64_t>>();
    r.approximate = j.value("approximate", false);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InversionError(std::string("malformed inversion result: ") + e.what());
  }
}

}  // namespace flowinv
