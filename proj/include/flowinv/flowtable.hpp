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

// NetFlow-style flow construction over a (possibly sampled) packet stream.
//
// Each packet is either accounted to the flow currently tracked for its
// 5-tuple, starts a new flow when the sampler selects it, or is dropped.
// A tracked 5-tuple idle for longer than the flow timeout has its flow
// terminated and a fresh flow opened. The whole buffer is exported (and all
// tracking cleared) when it holds N_f records or when the export timer
// expires; whatever is resident at end of stream is exported too.

#pragma once

#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowinv/distribution.hpp"
#include "flowinv/error.hpp"
#include "flowinv/packet.hpp"
#include "flowinv/sampling.hpp"
#include "flowinv/trace.hpp"

namespace flowinv {

struct FlowTableConfig {
  double flow_timeout = 300.0;    // t_t, seconds
  double export_timeout = 300.0;  // t_w, seconds
  std::size_t buffer_capacity = std::size_t{1} << 20;  // N_f, records

  // No expiry, no timed export, unbounded buffer.
  static FlowTableConfig unbounded() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {inf, inf, std::numeric_limits<std::size_t>::max()};
  }

  void validate() const {
    if (!(flow_timeout > 0.0)) throw ConfigError("flow timeout must be positive");
    if (!(export_timeout > 0.0)) throw ConfigError("export timeout must be positive");
    if (buffer_capacity < 1) throw ConfigError("flow buffer capacity must be at least 1");
  }
};

// Flow identity: the 5-tuple plus (analysis window, number of earlier flows
// terminated on the same 5-tuple within that window).
struct FlowId {
  std::uint32_t window = 0;
  std::uint32_t sequence = 0;

  friend bool operator==(const FlowId&, const FlowId&) = default;
};

struct FlowRecord {
  FlowId id;
  FiveTuple key;
  std::uint64_t packet_count = 0;
  std::uint64_t byte_count = 0;
  double first_seen = 0.0;
  double last_seen = 0.0;
  std::uint32_t syn_count = 0;

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

struct FlowSet {
  std::vector<FlowRecord> records;
  std::vector<double> window_boundaries;  // trace time of each export
  std::uint64_t packets_seen = 0;
  std::uint64_t packets_admitted = 0;

  double sampled_fraction() const {
    return packets_seen == 0 ? 0.0
                             : static_cast<double>(packets_admitted) /
                                   static_cast<double>(packets_seen);
  }

  double mean_flow_length() const {
    return records.empty() ? 0.0
                           : static_cast<double>(packets_admitted) /
                                 static_cast<double>(records.size());
  }
};

class FlowTable {
 public:
  FlowTable(FlowTableConfig config, SamplerConfig sampler,
            std::vector<HeldPacket>* held = nullptr)
      : config_(config), sampler_(sampler), held_(held) {
    config_.validate();
    sampler_.validate();
  }

  void offer(const PacketRecord& pkt) {
    const std::uint64_t index = out_.packets_seen;
    if (index == 0) {
      window_start_ = pkt.timestamp;
    } else if (pkt.timestamp < last_time_) {
      throw FlowTableError("packet " + std::to_string(index) +
                           " is out of order (timestamp " + std::to_string(pkt.timestamp) +
                           " < " + std::to_string(last_time_) + ")");
    }
    last_time_ = pkt.timestamp;
    ++out_.packets_seen;

    auto tracked = tracked_.find(pkt.key);
    const bool is_tracked = tracked != tracked_.end();
    if (decide(sampler_, pkt, index, is_tracked) != Decision::kSkip) {
      std::size_t slot;
      if (is_tracked) {
        Tracking& state = tracked->second;
        if (pkt.timestamp - state.last_seen > config_.flow_timeout) {
          state.slot = create_flow(pkt, state.sequence + 1);
          ++state.sequence;
        }
        state.last_seen = pkt.timestamp;
        slot = state.slot;
      } else {
        slot = create_flow(pkt, 0);
        tracked_.emplace(pkt.key, Tracking{slot, pkt.timestamp, 0});
      }
      FlowRecord& rec = buffer_[slot];
      ++rec.packet_count;
      rec.byte_count += pkt.byte_len;
      rec.last_seen = pkt.timestamp;
      if (pkt.tcp_flags.syn()) ++rec.syn_count;
      ++out_.packets_admitted;
      if (held_ != nullptr) held_->push_back({pkt, serial_base_ + slot});
    }

    if (buffer_.size() >= config_.buffer_capacity ||
        pkt.timestamp - window_start_ >= config_.export_timeout) {
      export_buffer(pkt.timestamp);
    }
  }

  // Exports resident records and returns everything produced so far.
  FlowSet finish() {
    if (!buffer_.empty()) export_buffer(last_time_);
    FlowSet done = std::move(out_);
    out_ = FlowSet{};
    return done;
  }

 private:
  struct Tracking {
    std::size_t slot;  // index into buffer_
    double last_seen;
    std::uint32_t sequence;
  };

  std::size_t create_flow(const PacketRecord& pkt, std::uint32_t sequence) {
    FlowRecord rec;
    rec.id = FlowId{window_, sequence};
    rec.key = pkt.key;
    rec.first_seen = pkt.timestamp;
    rec.last_seen = pkt.timestamp;
    buffer_.push_back(rec);
    return buffer_.size() - 1;
  }

  void export_buffer(double now) {
    serial_base_ += buffer_.size();
    out_.records.insert(out_.records.end(), buffer_.begin(), buffer_.end());
    out_.window_boundaries.push_back(now);
    buffer_.clear();
    tracked_.clear();
    ++window_;
    // The next window is timed from this export, whichever condition fired.
    window_start_ = now;
  }

  FlowTableConfig config_;
  SamplerConfig sampler_;
  std::vector<HeldPacket>* held_;
  std::unordered_map<FiveTuple, Tracking, FiveTupleHash> tracked_;
  std::vector<FlowRecord> buffer_;
  FlowSet out_;
  std::uint32_t window_ = 0;
  std::uint64_t serial_base_ = 0;
  double window_start_ = 0.0;
  double last_time_ = 0.0;
};

inline FlowSet build_flows(std::span<const PacketRecord> packets, const FlowTableConfig& config,
                           const SamplerConfig& sampler,
                           std::vector<HeldPacket>* held = nullptr) {
  FlowTable table(config, sampler, held);
  for (const auto& pkt : packets) table.offer(pkt);
  return table.finish();
}

// Counts flows by packet count. With no window given all analysis windows are
// merged; flows split across windows stay separate flows either way.
inline LengthHistogram flow_length_histogram(const FlowSet& flows,
                                             std::optional<std::uint32_t> window = std::nullopt) {
  LengthHistogram hist;
  for (const auto& rec : flows.records) {
    if (window && rec.id.window != *window) continue;
    ++hist[rec.packet_count];
  }
  return hist;
}

inline LengthHistogram tcp_flow_length_histogram(const FlowSet& flows) {
  LengthHistogram hist;
  for (const auto& rec : flows.records) {
    if (rec.key.protocol == kProtoTcp) ++hist[rec.packet_count];
  }
  return hist;
}

// ---------------------------------------------------------------------------
// CSV: flow_id,proto,src,sport,dst,dport,packets,bytes,first_seen,last_seen,syn_count

inline constexpr const char* kFlowCsvHeader =
    "flow_id,proto,src,sport,dst,dport,packets,bytes,first_seen,last_seen,syn_count";

inline std::string format_flow_id(FlowId id) {
  return std::to_string(id.window) + ":" + std::to_string(id.sequence);
}

inline void write_flows_csv(std::ostream& out, const FlowSet& flows) {
  out << kFlowCsvHeader << '\n';
  char buf[256];
  for (const auto& r : flows.records) {
    std::snprintf(buf, sizeof buf, "%s,%u,%s,%u,%s,%u,%llu,%llu,%.6f,%.6f,%u\n",
                  format_flow_id(r.id).c_str(), unsigned{r.key.protocol},
                  format_ipv4(r.key.src_addr).c_str(), unsigned{r.key.src_port},
                  format_ipv4(r.key.dst_addr).c_str(), unsigned{r.key.dst_port},
                  static_cast<unsigned long long>(r.packet_count),
                  static_cast<unsigned long long>(r.byte_count), r.first_seen, r.last_seen,
                  r.syn_count);
    out << buf;
  }
}

inline FlowSet read_flows_csv(std::istream& in) {
  FlowSet flows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line == kFlowCsvHeader) continue;
    auto fail = [&](const std::string& what) {
      return TraceError("flows csv line " + std::to_string(line_no) + ": " + what);
    };
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 11) throw fail("expected 11 columns");
    FlowRecord r;
    const auto colon = f[0].find(':');
    if (colon == std::string::npos ||
        !detail::parse_uint<std::uint32_t>(std::string_view(f[0]).substr(0, colon), 0xffffffffu, r.id.window) ||
        !detail::parse_uint<std::uint32_t>(std::string_view(f[0]).substr(colon + 1), 0xffffffffu, r.id.sequence)) {
      throw fail("bad flow_id");
    }
    const auto src = parse_ipv4(f[2]);
    const auto dst = parse_ipv4(f[4]);
    if (!src || !dst) throw fail("bad address");
    r.key.src_addr = *src;
    r.key.dst_addr = *dst;
    std::int64_t first = 0, last = 0;
    if (!detail::parse_uint<std::uint8_t>(f[1], 255, r.key.protocol) ||
        !detail::parse_uint<std::uint16_t>(f[3], 65535, r.key.src_port) ||
        !detail::parse_uint<std::uint16_t>(f[5], 65535, r.key.dst_port) ||
        !detail::parse_uint<std::uint64_t>(f[6], ~std::uint64_t{0}, r.packet_count) ||
        !detail::parse_uint<std::uint64_t>(f[7], ~std::uint64_t{0}, r.byte_count) ||
        !detail::parse_micros(f[8], first) || !detail::parse_micros(f[9], last) ||
        !detail::parse_uint<std::uint32_t>(f[10], 0xffffffffu, r.syn_count)) {
      throw fail("bad numeric field");
    }
    if (r.packet_count == 0) throw fail("flow with zero packets");
    r.first_seen = static_cast<double>(first) / 1e6;
    r.last_seen = static_cast<double>(last) / 1e6;
    flows.packets_admitted += r.packet_count;
    flows.records.push_back(r);
  }
  return flows;
}

}  // namespace flowinv
