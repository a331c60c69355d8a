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

#include "flowinv/trace.hpp"

#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "flowinv/binning.hpp"
#include "gtest/gtest.h"

namespace flowinv {
namespace {

TEST(TextTraceTest, ParsesOneLine) {
  std::istringstream in("0.000000 6 10.0.0.1 80 10.0.0.2 1234 1500 S\n");
  const auto r = read_text_trace(in);
  ASSERT_EQ(r.packets.size(), 1u);
  EXPECT_EQ(r.skipped, 0u);
  const auto& p = r.packets[0];
  EXPECT_EQ(p.timestamp, 0.0);
  EXPECT_EQ(p.key.protocol, 6);
  EXPECT_EQ(p.key.src_addr, 0x0a000001u);
  EXPECT_EQ(p.key.src_port, 80);
  EXPECT_EQ(p.key.dst_addr, 0x0a000002u);
  EXPECT_EQ(p.key.dst_port, 1234);
  EXPECT_EQ(p.byte_len, 1500u);
  EXPECT_TRUE(p.tcp_flags.syn());
  EXPECT_FALSE(p.tcp_flags.fin());
  EXPECT_FALSE(p.tcp_flags.rst());
}

TEST(TextTraceTest, EmptyInputGivesEmptyStream) {
  std::istringstream in("");
  const auto r = read_text_trace(in);
  EXPECT_TRUE(r.packets.empty());
  EXPECT_EQ(r.skipped, 0u);
}

TEST(TextTraceTest, RebasesTimestampsAndSkipsComments) {
  std::istringstream in(
      "# capture\n"
      "\n"
      "100.250000 17 1.2.3.4 53 5.6.7.8 999 80 -\n"
      "101.000001 1 1.2.3.4 0 5.6.7.8 0 64 -\n");
  const auto r = read_text_trace(in);
  ASSERT_EQ(r.packets.size(), 2u);
  EXPECT_EQ(r.packets[0].timestamp, 0.0);
  EXPECT_DOUBLE_EQ(r.packets[1].timestamp, 0.750001);
  EXPECT_TRUE(r.packets[1].tcp_flags.empty());
}

TEST(TextTraceTest, MalformedLineNamesLineNumber) {
  std::istringstream in(
      "0.000000 6 10.0.0.1 80 10.0.0.2 1234 1500 S\n"
      "0.000001 6 10.0.0.1 80 10.0.0.999 1234 1500 -\n");
  try {
    read_text_trace(in);
    FAIL() << "expected TraceError";
  } catch (const TraceError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(TextTraceTest, RejectsContractViolations) {
  const char* bad[] = {
      "0.0 6 10.0.0.1 80 10.0.0.2 1234 0 S",       // zero bytes
      "0.0 6 10.0.0.1 80 10.0.0.2 1234 70000 S",   // too long
      "0.0 17 10.0.0.1 80 10.0.0.2 1234 100 S",    // flags on UDP
      "0.0 1 10.0.0.1 80 10.0.0.2 0 100 -",        // ports on ICMP
      "0.0 6 10.0.0.1 80 10.0.0.2 1234 100 SX",    // unknown flag
      "0.0 6 10.0.0.1 80 10.0.0.2 1234 100",       // missing field
      "x 6 10.0.0.1 80 10.0.0.2 1234 100 -",       // bad timestamp
  };
  for (const char* line : bad) {
    std::istringstream in(line);
    EXPECT_THROW(read_text_trace(in), TraceError) << line;
  }
}

TEST(TextTraceTest, ReadTraceFailsOnMissingFile) {
  EXPECT_THROW(read_trace("/nonexistent/trace.txt"), TraceError);
}

std::vector<PacketRecord> random_packets(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<PacketRecord> out;
  std::int64_t micros = 0;
  for (std::size_t i = 0; i < n; ++i) {
    PacketRecord p;
    if (i > 0) micros += static_cast<std::int64_t>(rng() % 5'000'000);
    p.timestamp = static_cast<double>(micros) / 1e6;
    const std::uint8_t protos[] = {kProtoTcp, kProtoUdp, kProtoIcmp};
    p.key.protocol = protos[rng() % 3];
    p.key.src_addr = static_cast<std::uint32_t>(rng());
    p.key.dst_addr = static_cast<std::uint32_t>(rng());
    if (p.key.protocol != kProtoIcmp) {
      p.key.src_port = static_cast<std::uint16_t>(rng());
      p.key.dst_port = static_cast<std::uint16_t>(rng());
    }
    p.byte_len = 1 + static_cast<std::uint32_t>(rng() % 65535);
    if (p.key.protocol == kProtoTcp) p.tcp_flags = TcpFlags{static_cast<std::uint8_t>(rng() % 8)};
    out.push_back(p);
  }
  return out;
}

// Property: reading what was written is the identity on packet streams.
TEST(TextTraceTest, WriteThenReadIsIdentity) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto packets = random_packets(seed, 200);
    std::stringstream buf;
    write_text_trace(buf, packets);
    const auto back = read_text_trace(buf);
    ASSERT_EQ(back.packets, packets) << "seed " << seed;
  }
}

TEST(TextTraceTest, WriterFormatIsExact) {
  PacketRecord p;
  p.timestamp = 1.5;
  p.key = {kProtoTcp, 0x0a000001, 80, 0xc0a80102, 443};
  p.byte_len = 40;
  p.tcp_flags = TcpFlags{TcpFlags::kSyn | TcpFlags::kRst};
  std::ostringstream out;
  write_text_trace(out, std::span<const PacketRecord>(&p, 1));
  EXPECT_EQ(out.str(), "1.500000 6 10.0.0.1 80 192.168.1.2 443 40 SR\n");
}

TEST(PcapTraceTest, RoundTripsSupportedPackets) {
  const auto packets = random_packets(7, 100);
  std::stringstream buf;
  write_pcap_trace(buf, packets);
  EXPECT_TRUE(looks_like_pcap(buf));
  const auto back = read_pcap_trace(buf);
  EXPECT_EQ(back.skipped, 0u);
  ASSERT_EQ(back.packets.size(), packets.size());
  for (std::size_t i = 0; i < packets.size(); ++i) {
    EXPECT_EQ(back.packets[i].key, packets[i].key);
    EXPECT_EQ(back.packets[i].byte_len, packets[i].byte_len);
    EXPECT_EQ(back.packets[i].tcp_flags, packets[i].tcp_flags);
    EXPECT_DOUBLE_EQ(back.packets[i].timestamp, packets[i].timestamp);
  }
}

// Ten packets, one of which carries an ARP ethertype: nine are yielded and
// the skip counter records the tenth.
TEST(PcapTraceTest, UndecodablePacketIsCountedAndSkipped) {
  auto packets = random_packets(3, 10);
  std::stringstream buf;
  write_pcap_trace(buf, packets);
  std::string bytes = buf.str();
  // Locate the 5th record: 24-byte global header, then records of
  // (16 + caplen) bytes.
  std::size_t offset = 24;
  for (int i = 0; i < 4; ++i) {
    const auto caplen = static_cast<unsigned char>(bytes[offset + 8]);
    offset += 16 + caplen;
  }
  bytes[offset + 16 + 12] = 0x08;
  bytes[offset + 16 + 13] = 0x06;  // ARP
  std::istringstream in(bytes);
  const auto r = read_pcap_trace(in);
  EXPECT_EQ(r.packets.size(), 9u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.packets[4].key, packets[5].key);
}

TEST(PcapTraceTest, BigEndianNanosecondHeader) {
  // One Ethernet/IPv4/UDP packet in a big-endian nanosecond capture.
  std::string bytes;
  auto put32be = [&](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) bytes.push_back(static_cast<char>((v >> s) & 0xff));
  };
  auto put16be = [&](std::uint16_t v) {
    bytes.push_back(static_cast<char>(v >> 8));
    bytes.push_back(static_cast<char>(v & 0xff));
  };
  put32be(pcap::kMagicNanos);
  put16be(2);
  put16be(4);
  put32be(0);
  put32be(0);
  put32be(65535);
  put32be(1);
  for (std::uint32_t ns : {5u, 250000005u}) {
    put32be(100);
    put32be(ns);
    put32be(14 + 20 + 8);
    put32be(14 + 120);
    bytes.append(12, '\0');
    put16be(0x0800);
    bytes.push_back(0x45);
    bytes.push_back(0);
    put16be(120);
    bytes.append(5, '\0');
    bytes.push_back(static_cast<char>(kProtoUdp));
    bytes.append(2, '\0');
    put32be(0x01020304);
    put32be(0x05060708);
    put16be(53);
    put16be(4000);
    bytes.append(4, '\0');
  }
  std::istringstream in(bytes);
  const auto r = read_pcap_trace(in);
  ASSERT_EQ(r.packets.size(), 2u);
  EXPECT_EQ(r.packets[0].key.protocol, kProtoUdp);
  EXPECT_EQ(r.packets[0].key.src_addr, 0x01020304u);
  EXPECT_EQ(r.packets[0].key.dst_port, 4000);
  EXPECT_EQ(r.packets[0].byte_len, 120u);
  EXPECT_DOUBLE_EQ(r.packets[1].timestamp, 0.25);
}

TEST(PcapTraceTest, BadMagicIsFatal) {
  std::istringstream in(std::string(24, 'x'));
  EXPECT_THROW(read_pcap_trace(in), TraceError);
}

TEST(GenerateTraceTest, DegenerateSingleFlow) {
  SyntheticTraceConfig cfg;
  cfg.num_flows = 1;
  cfg.min_flow_len = 5;
  cfg.max_flow_len = 5;
  const auto t = generate_trace(cfg);
  EXPECT_EQ(t.packets.size(), 5u);
  ASSERT_EQ(t.ground_truth.probs.size(), 5u);
  EXPECT_EQ(t.ground_truth.at(5), 1.0);
  EXPECT_EQ(t.packets[0].timestamp, 0.0);
}

TEST(GenerateTraceTest, DeterministicGivenSeed) {
  SyntheticTraceConfig cfg;
  cfg.num_flows = 2000;
  cfg.tcp_fraction = 0.8;
  cfg.extra_syn_prob = 0.1;
  cfg.byte_len_model = ByteLengthModel::uniform(40, 1500);
  cfg.seed = 42;
  std::stringstream a, b;
  write_text_trace(a, generate_trace(cfg).packets);
  write_text_trace(b, generate_trace(cfg).packets);
  EXPECT_EQ(a.str(), b.str());
  cfg.seed = 43;
  std::stringstream c;
  write_text_trace(c, generate_trace(cfg).packets);
  EXPECT_NE(a.str(), c.str());
}

TEST(GenerateTraceTest, RejectsInvalidConfig) {
  SyntheticTraceConfig cfg;
  cfg.alpha = 2.0;
  EXPECT_THROW(generate_trace(cfg), ConfigError);
  cfg = {};
  cfg.min_flow_len = 10;
  cfg.max_flow_len = 9;
  EXPECT_THROW(generate_trace(cfg), ConfigError);
  cfg = {};
  cfg.num_flows = 0;
  EXPECT_THROW(generate_trace(cfg), ConfigError);
}

TEST(GenerateTraceTest, GroundTruthMatchesRecount) {
  SyntheticTraceConfig cfg;
  cfg.num_flows = 5000;
  cfg.tcp_fraction = 0.6;
  cfg.seed = 9;
  const auto t = generate_trace(cfg);
  std::map<FiveTuple, std::uint64_t> per_key;
  for (const auto& p : t.packets) ++per_key[p.key];
  LengthHistogram recount;
  for (const auto& [k, n] : per_key) ++recount[n];
  EXPECT_EQ(recount, t.length_counts);
  EXPECT_EQ(distribution_from_histogram(recount), t.ground_truth);
  // Packets are time-ordered and flows intermix.
  for (std::size_t i = 1; i < t.packets.size(); ++i) {
    ASSERT_LE(t.packets[i - 1].timestamp, t.packets[i].timestamp);
  }
}

TEST(GenerateTraceTest, SynStructure) {
  SyntheticTraceConfig cfg;
  cfg.num_flows = 40000;
  cfg.tcp_fraction = 0.9;
  cfg.extra_syn_prob = 0.07;
  cfg.seed = 5;
  const auto t = generate_trace(cfg);
  std::map<FiveTuple, int> syns;
  for (const auto& p : t.packets) {
    if (p.key.protocol == kProtoTcp) {
      syns[p.key] += p.tcp_flags.syn() ? 1 : 0;
    } else {
      ASSERT_TRUE(p.tcp_flags.empty());
    }
  }
  std::uint64_t multi = 0;
  for (const auto& [k, n] : syns) {
    ASSERT_GE(n, 1);
    if (n >= 2) ++multi;
  }
  EXPECT_EQ(multi, t.multi_syn_flows);
  EXPECT_EQ(syns.size(), t.tcp_flows);
  // Binomial 3-sigma bound around extra_syn_prob among eligible flows.
  const double n = static_cast<double>(t.multi_syn_eligible_flows);
  const double frac = static_cast<double>(multi) / n;
  EXPECT_NEAR(frac, 0.07, 3.0 * std::sqrt(0.07 * 0.93 / n));
}

// Least-squares slope of the log-binned CCDF of 10^5 generated lengths over
// the mid-range decades (10..1000) lies in [-1.7, -1.3] for alpha = 1.5.
TEST(GenerateTraceTest, TailSlopeMatchesAlpha) {
  SyntheticTraceConfig cfg;
  cfg.num_flows = 100000;
  cfg.alpha = 1.5;
  cfg.min_flow_len = 1;
  cfg.max_flow_len = 10000;
  cfg.seed = 11;
  const auto t = generate_trace(cfg);
  const auto tail = ccdf(t.length_counts);
  const auto bins = make_bins(10000, ratio_for_bins_per_decade(10));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (auto b : bins) {
    if (b < 10 || b > 1000 || b > tail.size()) continue;
    const double y = tail[b - 1].tail;
    if (y <= 0) continue;
    const double lx = std::log10(static_cast<double>(b));
    const double ly = std::log10(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  ASSERT_GE(n, 10);
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_GE(slope, -1.7);
  EXPECT_LE(slope, -1.3);
}

}  // namespace
}  // namespace flowinv
