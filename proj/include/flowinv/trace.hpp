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

// Packet trace sources: the whitespace text format, a minimal pcap reader
// (Ethernet + IPv4 + TCP/UDP/ICMP), and a synthetic heavy-tailed trace
// generator with exact ground truth.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "flowinv/distribution.hpp"
#include "flowinv/error.hpp"
#include "flowinv/packet.hpp"
#include "flowinv/random.hpp"

namespace flowinv {

enum class TraceFormat { kAuto, kText, kPcap };

struct TraceReadResult {
  std::vector<PacketRecord> packets;
  std::size_t skipped = 0;  // packets whose link/IP layer could not be decoded
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

template <typename T>
bool parse_uint(std::string_view s, T max_value, T& out) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || v > static_cast<std::uint64_t>(max_value)) return false;
  out = static_cast<T>(v);
  return true;
}

// Decimal seconds to integer microseconds. Fraction digits beyond the sixth
// are truncated.
inline bool parse_micros(std::string_view s, std::int64_t& out) {
  const auto dot = s.find('.');
  const std::string_view whole = s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (whole.empty()) return false;
  std::int64_t seconds = 0;
  if (!parse_uint<std::int64_t>(whole, std::numeric_limits<std::int64_t>::max() / 1000000, seconds)) {
    return false;
  }
  std::int64_t micros = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    micros *= 10;
    if (i < frac.size()) {
      if (frac[i] < '0' || frac[i] > '9') return false;
      micros += frac[i] - '0';
    }
  }
  for (std::size_t i = 6; i < frac.size(); ++i) {
    if (frac[i] < '0' || frac[i] > '9') return false;
  }
  out = seconds * 1000000 + micros;
  return true;
}

inline bool has_ports(std::uint8_t protocol) {
  return protocol == kProtoTcp || protocol == kProtoUdp;
}

}  // namespace detail

// Text format: "timestamp proto src sport dst dport bytes flags" per line.
// Blank lines and lines starting with '#' are ignored. Timestamps are rebased
// so the first packet is at 0.
inline TraceReadResult read_text_trace(std::istream& in) {
  TraceReadResult result;
  std::string line;
  std::size_t line_no = 0;
  bool have_origin = false;
  std::int64_t origin = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = detail::split_fields(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    auto fail = [&](const std::string& what) -> TraceError {
      return TraceError("line " + std::to_string(line_no) + ": " + what);
    };
    if (fields.size() != 8) throw fail("expected 8 fields, got " + std::to_string(fields.size()));

    std::int64_t micros = 0;
    if (!detail::parse_micros(fields[0], micros)) throw fail("bad timestamp");
    PacketRecord pkt;
    if (!detail::parse_uint<std::uint8_t>(fields[1], 255, pkt.key.protocol)) throw fail("bad protocol");
    const auto src = parse_ipv4(fields[2]);
    const auto dst = parse_ipv4(fields[4]);
    if (!src) throw fail("bad source address");
    if (!dst) throw fail("bad destination address");
    pkt.key.src_addr = *src;
    pkt.key.dst_addr = *dst;
    if (!detail::parse_uint<std::uint16_t>(fields[3], 65535, pkt.key.src_port)) throw fail("bad source port");
    if (!detail::parse_uint<std::uint16_t>(fields[5], 65535, pkt.key.dst_port)) throw fail("bad destination port");
    if (!detail::parse_uint<std::uint32_t>(fields[6], 65535, pkt.byte_len) || pkt.byte_len == 0) {
      throw fail("bad byte length");
    }
    const auto flags = parse_flags(fields[7]);
    if (!flags) throw fail("bad flags");
    pkt.tcp_flags = *flags;
    if (pkt.key.protocol != kProtoTcp && !pkt.tcp_flags.empty()) throw fail("TCP flags on non-TCP packet");
    if (!detail::has_ports(pkt.key.protocol) && (pkt.key.src_port != 0 || pkt.key.dst_port != 0)) {
      throw fail("ports on a protocol without ports");
    }
    if (!have_origin) {
      origin = micros;
      have_origin = true;
    }
    pkt.timestamp = static_cast<double>(micros - origin) / 1e6;
    result.packets.push_back(pkt);
  }
  if (in.bad()) throw TraceError("read error");
  return result;
}

inline void write_text_trace(std::ostream& out, std::span<const PacketRecord> packets) {
  char buf[160];
  for (const auto& pkt : packets) {
    const std::string src = format_ipv4(pkt.key.src_addr);
    const std::string dst = format_ipv4(pkt.key.dst_addr);
    const std::string flags = format_flags(pkt.tcp_flags);
    std::snprintf(buf, sizeof buf, "%.6f %u %s %u %s %u %u %s\n", pkt.timestamp,
                  unsigned{pkt.key.protocol}, src.c_str(), unsigned{pkt.key.src_port},
                  dst.c_str(), unsigned{pkt.key.dst_port}, unsigned{pkt.byte_len},
                  flags.c_str());
    out << buf;
  }
}

namespace pcap {

inline constexpr std::uint32_t kMagicMicros = 0xa1b2c3d4;
inline constexpr std::uint32_t kMagicNanos = 0xa1b23c4d;
inline constexpr std::uint32_t kLinkEthernet = 1;
inline constexpr std::size_t kEthernetHeader = 14;
inline constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;

inline std::uint16_t be16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}
inline std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | p[3];
}

// Decodes one Ethernet frame; nullopt when any layer is unsupported or the
// capture is too short to hold the headers we need.
inline std::optional<PacketRecord> decode_ethernet(std::span<const std::uint8_t> frame,
                                                   std::uint32_t orig_len) {
  if (frame.size() < kEthernetHeader) return std::nullopt;
  if (be16(frame.data() + 12) != kEtherTypeIpv4) return std::nullopt;
  const auto ip = frame.subspan(kEthernetHeader);
  if (ip.size() < 20) return std::nullopt;
  if ((ip[0] >> 4) != 4) return std::nullopt;
  const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
  if (ihl < 20 || ip.size() < ihl) return std::nullopt;
  if ((be16(ip.data() + 6) & 0x1fff) != 0) return std::nullopt;  // non-first fragment

  PacketRecord pkt;
  std::uint32_t total_len = be16(ip.data() + 2);
  if (total_len == 0) {
    // Segmentation offload captures leave the length field zero.
    total_len = orig_len > kEthernetHeader ? orig_len - kEthernetHeader : 0;
  }
  if (total_len == 0) return std::nullopt;
  pkt.byte_len = std::min<std::uint32_t>(total_len, 65535);
  pkt.key.protocol = ip[9];
  pkt.key.src_addr = be32(ip.data() + 12);
  pkt.key.dst_addr = be32(ip.data() + 16);
  const auto l4 = ip.subspan(ihl);
  switch (pkt.key.protocol) {
    case kProtoTcp: {
      if (l4.size() < 14) return std::nullopt;
      pkt.key.src_port = be16(l4.data());
      pkt.key.dst_port = be16(l4.data() + 2);
      const std::uint8_t raw = l4[13];
      std::uint8_t bits = 0;
      if (raw & 0x02) bits |= TcpFlags::kSyn;
      if (raw & 0x01) bits |= TcpFlags::kFin;
      if (raw & 0x04) bits |= TcpFlags::kRst;
      pkt.tcp_flags = TcpFlags{bits};
      break;
    }
    case kProtoUdp:
      if (l4.size() < 4) return std::nullopt;
      pkt.key.src_port = be16(l4.data());
      pkt.key.dst_port = be16(l4.data() + 2);
      break;
    case kProtoIcmp:
      break;
    default:
      return std::nullopt;
  }
  return pkt;
}

}  // namespace pcap

inline TraceReadResult read_pcap_trace(std::istream& in) {
  std::array<std::uint8_t, 24> header{};
  if (!in.read(reinterpret_cast<char*>(header.data()), header.size())) {
    throw TraceError("pcap: truncated global header");
  }
  auto le32 = [](const std::uint8_t* p) {
    return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
           (std::uint32_t{p[3]} << 24);
  };
  const std::uint32_t magic_le = le32(header.data());
  const std::uint32_t magic_be = pcap::be32(header.data());
  bool little = false;
  bool nanos = false;
  if (magic_le == pcap::kMagicMicros || magic_le == pcap::kMagicNanos) {
    little = true;
    nanos = magic_le == pcap::kMagicNanos;
  } else if (magic_be == pcap::kMagicMicros || magic_be == pcap::kMagicNanos) {
    nanos = magic_be == pcap::kMagicNanos;
  } else {
    throw TraceError("pcap: bad magic number");
  }
  auto u32 = [&](const std::uint8_t* p) { return little ? le32(p) : pcap::be32(p); };
  const std::uint32_t linktype = u32(header.data() + 20);

  TraceReadResult result;
  bool have_origin = false;
  std::int64_t origin_ns = 0;
  std::vector<std::uint8_t> frame;
  std::array<std::uint8_t, 16> rec{};
  while (in.read(reinterpret_cast<char*>(rec.data()), rec.size())) {
    const std::uint32_t ts_sec = u32(rec.data());
    const std::uint32_t ts_frac = u32(rec.data() + 4);
    const std::uint32_t caplen = u32(rec.data() + 8);
    const std::uint32_t orig_len = u32(rec.data() + 12);
    if (caplen > (1u << 26)) throw TraceError("pcap: implausible capture length");
    frame.resize(caplen);
    if (!in.read(reinterpret_cast<char*>(frame.data()), caplen)) {
      // Trailing partial record.
      ++result.skipped;
      break;
    }
    const std::int64_t ns = static_cast<std::int64_t>(ts_sec) * 1000000000LL +
                            static_cast<std::int64_t>(ts_frac) * (nanos ? 1 : 1000);
    std::optional<PacketRecord> pkt;
    if (linktype == pcap::kLinkEthernet) pkt = pcap::decode_ethernet(frame, orig_len);
    if (!pkt) {
      ++result.skipped;
      continue;
    }
    if (!have_origin) {
      origin_ns = ns;
      have_origin = true;
    }
    const std::int64_t rel = ns - origin_ns;
    pkt->timestamp = nanos ? static_cast<double>(rel) / 1e9
                           : static_cast<double>(rel / 1000) / 1e6;
    result.packets.push_back(*pkt);
  }
  if (in.bad()) throw TraceError("pcap: read error");
  return result;
}

// Writes a microsecond little-endian Ethernet pcap with header-only captures
// (caplen covers the headers, the IPv4 length field carries byte_len).
inline void write_pcap_trace(std::ostream& out, std::span<const PacketRecord> packets) {
  auto put16le = [&](std::uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    out.write(b, 2);
  };
  auto put32le = [&](std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>(v >> 24)};
    out.write(b, 4);
  };
  put32le(pcap::kMagicMicros);
  put16le(2);
  put16le(4);
  put32le(0);
  put32le(0);
  put32le(65535);
  put32le(pcap::kLinkEthernet);

  std::vector<std::uint8_t> frame;
  for (const auto& pkt : packets) {
    const std::size_t l4_len = pkt.key.protocol == kProtoTcp ? 20
                               : (pkt.key.protocol == kProtoUdp || pkt.key.protocol == kProtoIcmp) ? 8
                                                                                                   : 0;
    frame.assign(pcap::kEthernetHeader + 20 + l4_len, 0);
    frame[12] = 0x08;
    frame[13] = 0x00;
    std::uint8_t* ip = frame.data() + pcap::kEthernetHeader;
    ip[0] = 0x45;
    ip[2] = static_cast<std::uint8_t>(pkt.byte_len >> 8);
    ip[3] = static_cast<std::uint8_t>(pkt.byte_len & 0xff);
    ip[8] = 64;
    ip[9] = pkt.key.protocol;
    for (int i = 0; i < 4; ++i) {
      ip[12 + i] = static_cast<std::uint8_t>(pkt.key.src_addr >> (24 - 8 * i));
      ip[16 + i] = static_cast<std::uint8_t>(pkt.key.dst_addr >> (24 - 8 * i));
    }
    std::uint8_t* l4 = ip + 20;
    if (detail::has_ports(pkt.key.protocol)) {
      l4[0] = static_cast<std::uint8_t>(pkt.key.src_port >> 8);
      l4[1] = static_cast<std::uint8_t>(pkt.key.src_port & 0xff);
      l4[2] = static_cast<std::uint8_t>(pkt.key.dst_port >> 8);
      l4[3] = static_cast<std::uint8_t>(pkt.key.dst_port & 0xff);
    }
    if (pkt.key.protocol == kProtoTcp) {
      l4[12] = 0x50;
      std::uint8_t raw = 0;
      if (pkt.tcp_flags.syn()) raw |= 0x02;
      if (pkt.tcp_flags.fin()) raw |= 0x01;
      if (pkt.tcp_flags.rst()) raw |= 0x04;
      l4[13] = raw;
    }
    const auto micros = static_cast<std::int64_t>(std::llround(pkt.timestamp * 1e6));
    put32le(static_cast<std::uint32_t>(micros / 1000000));
    put32le(static_cast<std::uint32_t>(micros % 1000000));
    put32le(static_cast<std::uint32_t>(frame.size()));
    put32le(static_cast<std::uint32_t>(pcap::kEthernetHeader + pkt.byte_len));
    out.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
  }
}

inline bool looks_like_pcap(std::istream& in) {
  std::array<std::uint8_t, 4> m{};
  const auto pos = in.tellg();
  const bool got = static_cast<bool>(in.read(reinterpret_cast<char*>(m.data()), 4));
  in.clear();
  in.seekg(pos);
  if (!got) return false;
  const std::uint32_t le = std::uint32_t{m[0]} | (std::uint32_t{m[1]} << 8) |
                           (std::uint32_t{m[2]} << 16) | (std::uint32_t{m[3]} << 24);
  const std::uint32_t be = pcap::be32(m.data());
  for (std::uint32_t v : {le, be}) {
    if (v == pcap::kMagicMicros || v == pcap::kMagicNanos) return true;
  }
  return false;
}

inline TraceReadResult read_trace(const std::string& path, TraceFormat format = TraceFormat::kAuto) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open trace file '" + path + "'");
  if (format == TraceFormat::kAuto) {
    format = looks_like_pcap(in) ? TraceFormat::kPcap : TraceFormat::kText;
  }
  try {
    return format == TraceFormat::kPcap ? read_pcap_trace(in) : read_text_trace(in);
  } catch (const TraceError& e) {
    throw TraceError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Synthetic traces

struct ByteLengthModel {
  std::uint32_t min_bytes = 1500;
  std::uint32_t max_bytes = 1500;  // equal to min_bytes for a fixed size

  static ByteLengthModel fixed(std::uint32_t bytes) { return {bytes, bytes}; }
  static ByteLengthModel uniform(std::uint32_t lo, std::uint32_t hi) { return {lo, hi}; }
};

struct SyntheticTraceConfig {
  std::uint64_t num_flows = 1000;
  double alpha = 1.5;  // CCDF tail exponent, P(L = k) proportional to k^-(alpha+1)
  std::uint64_t min_flow_len = 1;
  std::uint64_t max_flow_len = 10000;
  double mean_interarrival = 0.01;  // seconds between flow starts
  double mean_packet_gap = 0.01;    // seconds between packets of one flow
  double tcp_fraction = 1.0;
  double extra_syn_prob = 0.0;
  // Only TCP flows with length in [2, extra_syn_max_len] may carry the
  // second SYN; 0 means no upper limit.
  std::uint64_t extra_syn_max_len = 0;
  ByteLengthModel byte_len_model;
  std::uint64_t seed = 1;

  void validate() const {
    if (num_flows == 0) throw ConfigError("num_flows must be positive");
    if (num_flows > (1u << 24)) throw ConfigError("num_flows exceeds the synthetic address space (2^24)");
    if (!(alpha > 0.0 && alpha < 2.0)) throw ConfigError("alpha must lie in (0, 2)");
    if (min_flow_len == 0) throw ConfigError("min_flow_len must be positive");
    if (min_flow_len > max_flow_len) throw ConfigError("min_flow_len exceeds max_flow_len");
    if (max_flow_len > 50'000'000) throw ConfigError("max_flow_len too large");
    if (!(mean_interarrival >= 0.0) || !(mean_packet_gap >= 0.0)) {
      throw ConfigError("time scales must be non-negative");
    }
    if (!(tcp_fraction >= 0.0 && tcp_fraction <= 1.0)) throw ConfigError("tcp_fraction must lie in [0, 1]");
    if (!(extra_syn_prob >= 0.0 && extra_syn_prob <= 1.0)) throw ConfigError("extra_syn_prob must lie in [0, 1]");
    const auto& b = byte_len_model;
    if (b.min_bytes == 0 || b.min_bytes > b.max_bytes || b.max_bytes > 65535) {
      throw ConfigError("byte length model must satisfy 1 <= min <= max <= 65535");
    }
  }
};

struct SyntheticTrace {
  std::vector<PacketRecord> packets;
  FlowLengthDistribution ground_truth;
  LengthHistogram length_counts;
  LengthHistogram tcp_length_counts;
  double max_intra_flow_gap = 0.0;  // seconds
  std::uint64_t tcp_flows = 0;
  std::uint64_t multi_syn_flows = 0;
  std::uint64_t multi_syn_eligible_flows = 0;
};

// Distinct 5-tuple for flow `index` (index < 2^24).
inline FiveTuple synthetic_flow_key(std::uint64_t index, bool tcp) {
  FiveTuple key;
  key.protocol = tcp ? kProtoTcp : kProtoUdp;
  key.src_addr = (10u << 24) | static_cast<std::uint32_t>(index & 0xffffff);
  key.dst_addr = (192u << 24) | (168u << 16) | 1;
  key.src_port = static_cast<std::uint16_t>(1024 + index % 60000);
  key.dst_port = tcp ? 80 : 53;
  return key;
}

// Truncated discrete Pareto sampler over [min_len, max_len].
class DiscreteParetoSampler {
 public:
  DiscreteParetoSampler(double alpha, std::uint64_t min_len, std::uint64_t max_len)
      : min_len_(min_len) {
    cdf_.reserve(max_len - min_len + 1);
    double acc = 0.0;
    for (std::uint64_t k = min_len; k <= max_len; ++k) {
      acc += std::pow(static_cast<double>(k), -alpha - 1.0);
      cdf_.push_back(acc);
    }
  }

  std::uint64_t operator()(SequentialRng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto offset = static_cast<std::uint64_t>(
        std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
    return min_len_ + offset;
  }

 private:
  std::uint64_t min_len_;
  std::vector<double> cdf_;
};

inline SyntheticTrace generate_trace(const SyntheticTraceConfig& config) {
  config.validate();
  SequentialRng rng(config.seed);
  const DiscreteParetoSampler lengths(config.alpha, config.min_flow_len, config.max_flow_len);

  struct Event {
    std::int64_t micros;
    std::uint64_t flow;
    std::uint64_t seq;
    PacketRecord pkt;
  };
  std::vector<Event> events;
  SyntheticTrace trace;
  std::int64_t max_gap = 0;
  double start = 0.0;
  for (std::uint64_t f = 0; f < config.num_flows; ++f) {
    if (f > 0) start += rng.exponential(config.mean_interarrival);
    const std::uint64_t len = lengths(rng);
    const bool tcp = rng.bernoulli(config.tcp_fraction);
    const FiveTuple key = synthetic_flow_key(f, tcp);
    const bool eligible = tcp && len >= 2 &&
                          (config.extra_syn_max_len == 0 || len <= config.extra_syn_max_len);
    const bool extra_syn = eligible && rng.bernoulli(config.extra_syn_prob);

    ++trace.length_counts[len];
    if (tcp) {
      ++trace.tcp_length_counts[len];
      ++trace.tcp_flows;
    }
    if (eligible) ++trace.multi_syn_eligible_flows;
    if (extra_syn) ++trace.multi_syn_flows;

    std::int64_t t = std::llround(start * 1e6);
    for (std::uint64_t i = 0; i < len; ++i) {
      if (i > 0) {
        const std::int64_t gap = std::llround(rng.exponential(config.mean_packet_gap) * 1e6);
        max_gap = std::max(max_gap, gap);
        t += gap;
      }
      PacketRecord pkt;
      pkt.key = key;
      pkt.byte_len = static_cast<std::uint32_t>(
          rng.uniform_int(config.byte_len_model.min_bytes, config.byte_len_model.max_bytes));
      if (tcp && (i == 0 || (i == 1 && extra_syn))) pkt.tcp_flags = TcpFlags{TcpFlags::kSyn};
      events.push_back({t, f, i, pkt});
    }
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.micros != b.micros) return a.micros < b.micros;
    if (a.flow != b.flow) return a.flow < b.flow;
    return a.seq < b.seq;
  });
  trace.packets.reserve(events.size());
  for (auto& e : events) {
    e.pkt.timestamp = static_cast<double>(e.micros) / 1e6;
    trace.packets.push_back(e.pkt);
  }
  trace.max_intra_flow_gap = static_cast<double>(max_gap) / 1e6;
  trace.ground_truth = distribution_from_histogram(trace.length_counts);
  return trace;
}

}  // namespace flowinv
