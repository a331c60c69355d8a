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

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flowinv/error.hpp"

namespace flowinv {

// Flow length (packets) -> number of flows.
using LengthHistogram = std::map<std::uint64_t, std::uint64_t>;

inline constexpr double kNormalizationTolerance = 1e-12;

// Neumaier compensated sum; the normalization checks are at 1e-12 and plain
// summation over 10^4 terms can drift past that.
inline double accurate_sum(std::span<const double> values) {
  double sum = 0.0;
  double compensation = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      compensation += (sum - t) + v;
    } else {
      compensation += (v - t) + sum;
    }
    sum = t;
  }
  return sum + compensation;
}

// Probability vector over flow lengths 1..M. probs[0] is the probability of
// length 1.
struct FlowLengthDistribution {
  std::vector<double> probs;

  std::size_t max_length() const { return probs.size(); }
  bool empty() const { return probs.empty(); }

  // Probability of exactly `length` packets; 0 outside 1..M.
  double at(std::uint64_t length) const {
    if (length == 0 || length > probs.size()) return 0.0;
    return probs[length - 1];
  }

  double total() const { return accurate_sum(probs); }

  void validate() const {
    for (double v : probs) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ConfigError("flow length distribution has a negative or non-finite entry");
      }
    }
    if (std::abs(total() - 1.0) > kNormalizationTolerance) {
      throw ConfigError("flow length distribution does not sum to 1");
    }
  }

  friend bool operator==(const FlowLengthDistribution&,
                         const FlowLengthDistribution&) = default;
};

// Law of sampled flow lengths with zero-length flows excluded.
struct ObservedDistribution {
  std::vector<double> probs;  // probs[0] is X_1
  double p_used = 1.0;
  // Mass of the input that lay beyond the requested truncation length.
  double truncated_mass = 0.0;

  std::size_t max_length() const { return probs.size(); }

  double at(std::uint64_t length) const {
    if (length == 0 || length > probs.size()) return 0.0;
    return probs[length - 1];
  }

  bool truncation_warning() const { return truncated_mass >= kNormalizationTolerance; }

  void validate() const {
    for (double v : probs) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ConfigError("observed distribution has a negative or non-finite entry");
      }
    }
    if (std::abs(accurate_sum(probs) - 1.0) > kNormalizationTolerance) {
      throw ConfigError("observed distribution does not sum to 1");
    }
  }
};

inline std::uint64_t total_count(const LengthHistogram& hist) {
  std::uint64_t n = 0;
  for (const auto& [len, count] : hist) n += count;
  return n;
}

// Normalized empirical distribution; empty histogram gives an empty vector.
inline std::vector<double> normalized_counts(const LengthHistogram& hist) {
  std::vector<double> out;
  if (hist.empty()) return out;
  const std::uint64_t max_len = hist.rbegin()->first;
  if (hist.begin()->first == 0) {
    throw ConfigError("histogram contains zero-length flows");
  }
  out.assign(max_len, 0.0);
  const double n = static_cast<double>(total_count(hist));
  if (n == 0.0) return {};
  for (const auto& [len, count] : hist) {
    out[len - 1] = static_cast<double>(count) / n;
  }
  return out;
}

inline FlowLengthDistribution distribution_from_histogram(const LengthHistogram& hist) {
  return FlowLengthDistribution{normalized_counts(hist)};
}

inline ObservedDistribution observed_from_histogram(const LengthHistogram& hist,
                                                    double p_used) {
  return ObservedDistribution{normalized_counts(hist), p_used, 0.0};
}

}  // namespace flowinv
