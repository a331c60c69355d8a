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

// Per-packet sampling decisions (packet sampling and the three
// sample-and-hold variants) and the exact distribution-level forward models
// of packet sampling and sample-and-hold by packet.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "flowinv/distribution.hpp"
#include "flowinv/error.hpp"
#include "flowinv/packet.hpp"
#include "flowinv/random.hpp"

namespace flowinv {

enum class SamplerMethod {
  kPacket,    // iid per-packet sampling
  kShPacket,  // sample-and-hold, constant start probability
  kShByte,    // sample-and-hold, start probability 1-(1-p)^bytes
  kShSyn,     // sample-and-hold, start only on SYN packets
  kAlways,    // every packet, every flow (ground truth)
};

inline std::string_view method_name(SamplerMethod m) {
  switch (m) {
    case SamplerMethod::kPacket: return "packet";
    case SamplerMethod::kShPacket: return "sh-packet";
    case SamplerMethod::kShByte: return "sh-byte";
    case SamplerMethod::kShSyn: return "sh-syn";
    case SamplerMethod::kAlways: return "always";
  }
  return "?";
}

inline std::optional<SamplerMethod> parse_method(std::string_view name) {
  for (auto m : {SamplerMethod::kPacket, SamplerMethod::kShPacket, SamplerMethod::kShByte,
                 SamplerMethod::kShSyn, SamplerMethod::kAlways}) {
    if (name == method_name(m)) return m;
  }
  return std::nullopt;
}

inline bool is_sample_and_hold(SamplerMethod m) {
  return m == SamplerMethod::kShPacket || m == SamplerMethod::kShByte ||
         m == SamplerMethod::kShSyn;
}

struct SamplerConfig {
  SamplerMethod method = SamplerMethod::kAlways;
  double p = 1.0;
  std::uint64_t seed = 0;

  double q() const { return 1.0 - p; }

  void validate() const {
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("sampling probability must lie in (0, 1]");
  }
};

enum class Decision {
  kSampleAndTrack,  // sample and start (or continue) holding the flow
  kSampleOnly,      // packet sampling: keep this packet only
  kSkip,
};

// 1 - (1-p)^bytes, evaluated without cancellation for small p.
inline double byte_start_probability(double p, double bytes) {
  if (p >= 1.0) return 1.0;
  return -std::expm1(bytes * std::log1p(-p));
}

// Probability that an untracked packet starts a held flow (sample-and-hold
// methods) or is sampled (packet method).
inline double start_probability(const SamplerConfig& config, const PacketRecord& packet) {
  switch (config.method) {
    case SamplerMethod::kPacket:
    case SamplerMethod::kShPacket:
      return config.p;
    case SamplerMethod::kShByte:
      return byte_start_probability(config.p, static_cast<double>(packet.byte_len));
    case SamplerMethod::kShSyn:
      return packet.tcp_flags.syn() && packet.key.protocol == kProtoTcp ? config.p : 0.0;
    case SamplerMethod::kAlways:
      return 1.0;
  }
  return 0.0;
}

// Pure function of (config, packet, packet_index, tracked).
inline Decision decide(const SamplerConfig& config, const PacketRecord& packet,
                       std::uint64_t packet_index, bool flow_is_tracked) {
  if (config.method == SamplerMethod::kAlways) return Decision::kSampleAndTrack;
  if (config.method == SamplerMethod::kPacket) {
    const double u = counter_uniform(config.seed, Stream::kSampling, packet_index);
    return u < config.p ? Decision::kSampleOnly : Decision::kSkip;
  }
  if (flow_is_tracked) return Decision::kSampleAndTrack;
  const double pp = start_probability(config, packet);
  if (pp <= 0.0) return Decision::kSkip;
  const double u = counter_uniform(config.seed, Stream::kSampling, packet_index);
  return u < pp ? Decision::kSampleAndTrack : Decision::kSkip;
}

namespace detail {

inline void check_probability(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("sampling probability must lie in (0, 1]");
}

// Restricts `dist` to lengths 1..max_len, returning the discarded mass.
inline std::span<const double> truncate(const FlowLengthDistribution& dist,
                                        std::optional<std::size_t> max_len, double& dropped) {
  std::span<const double> probs(dist.probs);
  dropped = 0.0;
  if (max_len && *max_len < probs.size()) {
    dropped = accurate_sum(probs.subspan(*max_len));
    probs = probs.first(*max_len);
  }
  return probs;
}

inline void normalize_in_place(std::vector<double>& v) {
  const double total = accurate_sum(v);
  if (total > 0.0) {
    for (double& x : v) x /= total;
  }
}

}  // namespace detail

// Exact law of sampled flow lengths under iid packet sampling, conditioned on
// at least one packet being sampled.
inline ObservedDistribution forward_packet_sampling(
    const FlowLengthDistribution& dist, double p,
    std::optional<std::size_t> max_len = std::nullopt) {
  detail::check_probability(p);
  double dropped = 0.0;
  const auto theta = detail::truncate(dist, max_len, dropped);
  ObservedDistribution out{std::vector<double>(theta.size(), 0.0), p, dropped};
  if (p == 1.0) {
    out.probs.assign(theta.begin(), theta.end());
    detail::normalize_in_place(out.probs);
    return out;
  }
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  for (std::size_t j = 1; j <= theta.size(); ++j) {
    const double tj = theta[j - 1];
    if (tj == 0.0) continue;
    const double lgj = std::lgamma(static_cast<double>(j) + 1.0);
    for (std::size_t k = 1; k <= j; ++k) {
      const double log_pmf = lgj - std::lgamma(static_cast<double>(k) + 1.0) -
                             std::lgamma(static_cast<double>(j - k) + 1.0) +
                             static_cast<double>(k) * log_p +
                             static_cast<double>(j - k) * log_q;
      out.probs[k - 1] += tj * std::exp(log_pmf);
    }
  }
  detail::normalize_in_place(out.probs);
  return out;
}

// Exact law of sampled flow lengths under sample-and-hold by packet: a flow of
// length j yields i in [1, j] with probability p q^(j-i) and nothing with
// probability q^j.
inline ObservedDistribution forward_sh_packet(const FlowLengthDistribution& dist, double p,
                                              std::optional<std::size_t> max_len = std::nullopt) {
  detail::check_probability(p);
  double dropped = 0.0;
  const auto theta = detail::truncate(dist, max_len, dropped);
  const double q = 1.0 - p;
  ObservedDistribution out{std::vector<double>(theta.size(), 0.0), p, dropped};
  // theta'_i = p theta_i + q theta'_(i+1)
  double next = 0.0;
  for (std::size_t i = theta.size(); i-- > 0;) {
    next = p * theta[i] + q * next;
    out.probs[i] = next;
  }
  detail::normalize_in_place(out.probs);
  return out;
}

// A packet emitted by a sample-and-hold flow table, tagged with the flow it
// was accounted to.
struct HeldPacket {
  PacketRecord packet;
  std::uint64_t flow_serial = 0;  // unique per exported flow record
};

// Turns a sample-and-hold-by-packet sample into a packet sample with the same
// p: the first held packet of each flow is kept, each later one with
// independent probability p.
inline std::vector<PacketRecord> resample_as_packet_sample(std::span<const HeldPacket> held,
                                                           double p, std::uint64_t seed) {
  detail::check_probability(p);
  std::vector<PacketRecord> out;
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t i = 0; i < held.size(); ++i) {
    const auto& h = held[i];
    if (seen.insert(h.flow_serial).second) {
      out.push_back(h.packet);
      continue;
    }
    if (p == 1.0 || counter_uniform(seed, Stream::kResampling, i) < p) out.push_back(h.packet);
  }
  return out;
}

}  // namespace flowinv
