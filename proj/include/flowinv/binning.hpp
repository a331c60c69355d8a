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

// Logarithmic binning of flow-length histograms, and CCDFs.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flowinv/distribution.hpp"
#include "flowinv/error.hpp"

namespace flowinv {

// Bin k covers lengths [boundaries[k], boundaries[k+1]).
using BinBoundaries = std::vector<std::uint64_t>;

inline constexpr double kDefaultBinsPerDecade = 10.0;

inline double ratio_for_bins_per_decade(double bins_per_decade) {
  if (!(bins_per_decade > 0.0)) throw BinningError("bins per decade must be positive");
  return std::pow(10.0, 1.0 / bins_per_decade);
}

// i_0 = 1, i_{k+1} = max(i_k + 1, round_half_up(i_k * ratio)), stopping at the
// first boundary that exceeds max_len.
inline BinBoundaries make_bins(std::uint64_t max_len, double ratio) {
  if (!(ratio > 1.0)) throw BinningError("bin ratio must exceed 1");
  if (max_len < 1) throw BinningError("max_len must be at least 1");
  BinBoundaries b{1};
  while (b.back() <= max_len) {
    const auto scaled = static_cast<std::uint64_t>(std::floor(static_cast<double>(b.back()) * ratio + 0.5));
    b.push_back(std::max(b.back() + 1, scaled));
  }
  return b;
}

inline void validate_bins(const BinBoundaries& b) {
  if (b.size() < 2 || b.front() != 1) throw BinningError("bins must start at 1 and hold at least one bin");
  for (std::size_t k = 1; k < b.size(); ++k) {
    if (b[k] <= b[k - 1]) throw BinningError("bin boundaries must be strictly increasing");
  }
}

struct LogBinning {
  BinBoundaries boundaries;
  std::vector<double> averages;  // mean count per unit length in each bin

  std::size_t bins() const { return averages.size(); }
  std::uint64_t width(std::size_t k) const { return boundaries[k + 1] - boundaries[k]; }
  // Display extent [i_{k-1} - 0.5, i_k - 0.5].
  std::pair<double, double> plot_extent(std::size_t k) const {
    return {static_cast<double>(boundaries[k]) - 0.5, static_cast<double>(boundaries[k + 1]) - 0.5};
  }
};

inline LogBinning bin_histogram(const LengthHistogram& counts, const BinBoundaries& boundaries) {
  validate_bins(boundaries);
  LogBinning out{boundaries, std::vector<double>(boundaries.size() - 1, 0.0)};
  std::vector<std::uint64_t> sums(out.averages.size(), 0);
  std::size_t k = 0;
  for (const auto& [len, count] : counts) {
    if (len == 0) throw BinningError("histogram contains zero-length flows");
    if (len >= boundaries.back()) {
      throw BinningError("flow length " + std::to_string(len) + " lies beyond the last bin boundary " +
                         std::to_string(boundaries.back()));
    }
    while (len >= boundaries[k + 1]) ++k;
    sums[k] += count;
  }
  for (std::size_t i = 0; i < sums.size(); ++i) {
    out.averages[i] = static_cast<double>(sums[i]) / static_cast<double>(out.width(i));
  }
  return out;
}

// Sum of per-length values (values[0] is length 1) within each bin. Values
// beyond the last boundary are an error unless they are exactly zero.
inline std::vector<double> bin_sums(std::span<const double> values, const BinBoundaries& boundaries) {
  validate_bins(boundaries);
  std::vector<double> out(boundaries.size() - 1, 0.0);
  for (std::size_t k = 0; k + 1 < boundaries.size(); ++k) {
    const std::uint64_t lo = boundaries[k];
    const std::uint64_t hi = std::min<std::uint64_t>(boundaries[k + 1], values.size() + 1);
    if (lo >= hi) continue;
    out[k] = accurate_sum(values.subspan(lo - 1, hi - lo));
  }
  for (std::size_t len = boundaries.back(); len <= values.size(); ++len) {
    if (values[len - 1] != 0.0) {
      throw BinningError("value at length " + std::to_string(len) + " lies beyond the last bin boundary");
    }
  }
  return out;
}

struct CcdfPoint {
  std::uint64_t length;
  double tail;  // P(Length > length)

  friend bool operator==(const CcdfPoint&, const CcdfPoint&) = default;
};

// P(Length > x) for x = 1..(largest length with non-zero weight). Built from
// suffix sums, so the last point is exactly 0 and values never increase.
// P(Length > 0) = 1 is implied. Negative weights are treated as zero.
inline std::vector<CcdfPoint> ccdf(std::span<const double> weights) {
  std::size_t last = weights.size();
  while (last > 0 && !(weights[last - 1] > 0.0)) --last;
  std::vector<CcdfPoint> out;
  if (last == 0) return out;
  std::vector<double> suffix(last + 1, 0.0);
  for (std::size_t i = last; i-- > 0;) suffix[i] = suffix[i + 1] + std::max(weights[i], 0.0);
  const double total = suffix[0];
  out.reserve(last);
  for (std::size_t x = 1; x <= last; ++x) {
    out.push_back({x, std::min(1.0, suffix[x] / total)});
  }
  return out;
}

inline std::vector<CcdfPoint> ccdf(const FlowLengthDistribution& dist) { return ccdf(dist.probs); }

inline std::vector<CcdfPoint> ccdf(const LengthHistogram& hist) {
  std::vector<double> weights;
  if (!hist.empty()) weights.assign(hist.rbegin()->first, 0.0);
  for (const auto& [len, count] : hist) {
    if (len == 0) throw BinningError("histogram contains zero-length flows");
    weights[len - 1] = static_cast<double>(count);
  }
  return ccdf(weights);
}

// CSV: bin_lo,bin_hi,avg_count,plot_lo,plot_hi
inline void write_binned_csv(std::ostream& out, const LogBinning& binning) {
  out << "bin_lo,bin_hi,avg_count,plot_lo,plot_hi\n";
  char buf[160];
  for (std::size_t k = 0; k < binning.bins(); ++k) {
    const auto [plo, phi] = binning.plot_extent(k);
    std::snprintf(buf, sizeof buf, "%llu,%llu,%.17g,%.1f,%.1f\n",
                  static_cast<unsigned long long>(binning.boundaries[k]),
                  static_cast<unsigned long long>(binning.boundaries[k + 1]), binning.averages[k], plo,
                  phi);
    out << buf;
  }
}

}  // namespace flowinv
