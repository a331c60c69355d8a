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

#include <charconv>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace flowinv {

inline constexpr std::uint8_t kProtoIcmp = 1;
inline constexpr std::uint8_t kProtoTcp = 6;
inline constexpr std::uint8_t kProtoUdp = 17;

// Subset of TCP control flags relevant to flow construction.
class TcpFlags {
 public:
  static constexpr std::uint8_t kSyn = 0x1;
  static constexpr std::uint8_t kFin = 0x2;
  static constexpr std::uint8_t kRst = 0x4;

  constexpr TcpFlags() = default;
  constexpr explicit TcpFlags(std::uint8_t bits) : bits_(bits & 0x7) {}

  constexpr bool syn() const { return (bits_ & kSyn) != 0; }
  constexpr bool fin() const { return (bits_ & kFin) != 0; }
  constexpr bool rst() const { return (bits_ & kRst) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }

  friend constexpr bool operator==(TcpFlags, TcpFlags) = default;

 private:
  std::uint8_t bits_ = 0;
};

// Flow key. Ports are zero for protocols without ports.
struct FiveTuple {
  std::uint8_t protocol = 0;
  std::uint32_t src_addr = 0;
  std::uint16_t src_port = 0;
  std::uint32_t dst_addr = 0;
  std::uint16_t dst_port = 0;

  friend constexpr bool operator==(const FiveTuple&, const FiveTuple&) = default;
  friend constexpr auto operator<=>(const FiveTuple&, const FiveTuple&) = default;
};

struct FiveTupleHash {
  std::size_t operator()(const FiveTuple& k) const noexcept {
    std::uint64_t a = (std::uint64_t{k.src_addr} << 32) | k.dst_addr;
    std::uint64_t b = (std::uint64_t{k.protocol} << 32) |
                      (std::uint64_t{k.src_port} << 16) | k.dst_port;
    a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
    a ^= a >> 33;
    a *= 0xff51afd7ed558ccdULL;
    a ^= a >> 33;
    return static_cast<std::size_t>(a);
  }
};

struct PacketRecord {
  double timestamp = 0.0;  // seconds since trace start
  FiveTuple key;
  std::uint32_t byte_len = 1;
  TcpFlags tcp_flags;

  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

inline std::string format_ipv4(std::uint32_t addr) {
  return std::to_string((addr >> 24) & 0xff) + '.' +
         std::to_string((addr >> 16) & 0xff) + '.' +
         std::to_string((addr >> 8) & 0xff) + '.' + std::to_string(addr & 0xff);
}

inline std::optional<std::uint32_t> parse_ipv4(std::string_view text) {
  std::uint32_t addr = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int octet = 0; octet < 4; ++octet) {
    if (octet > 0) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
    unsigned value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc{} || next == p || value > 255 || next - p > 3) {
      return std::nullopt;
    }
    addr = (addr << 8) | value;
    p = next;
  }
  if (p != end) return std::nullopt;
  return addr;
}

// "SFR" subset in that order, "-" when empty.
inline std::string format_flags(TcpFlags flags) {
  if (flags.empty()) return "-";
  std::string out;
  if (flags.syn()) out += 'S';
  if (flags.fin()) out += 'F';
  if (flags.rst()) out += 'R';
  return out;
}

inline std::optional<TcpFlags> parse_flags(std::string_view text) {
  if (text == "-") return TcpFlags{};
  if (text.empty()) return std::nullopt;
  std::uint8_t bits = 0;
  for (char c : text) {
    std::uint8_t bit = 0;
    switch (c) {
      case 'S': bit = TcpFlags::kSyn; break;
      case 'F': bit = TcpFlags::kFin; break;
      case 'R': bit = TcpFlags::kRst; break;
      default: return std::nullopt;
    }
    if (bits & bit) return std::nullopt;
    bits |= bit;
  }
  return TcpFlags{bits};
}

}  // namespace flowinv
