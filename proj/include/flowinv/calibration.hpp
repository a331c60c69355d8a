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

// Choosing p so that a sampler keeps a target fraction of packets.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "flowinv/distribution.hpp"
#include "flowinv/error.hpp"
#include "flowinv/flowtable.hpp"
#include "flowinv/sampling.hpp"

namespace flowinv {

// Accepted relative deviation of the achieved fraction from the target.
inline constexpr double kCalibrationTolerance = 0.2;

struct CalibrationResult {
  double p = 1.0;
  double achieved_fraction = 0.0;
  int pilot_runs = 0;
};

// Expected number of packets kept from one flow of `length` packets under
// sample-and-hold by packet: sum_i i p q^(length-i) = length - q (1 - q^length) / p.
inline double expected_sh_packet_sampled(double length, double p) {
  if (p >= 1.0) return length;
  const double q = 1.0 - p;
  const double miss_all = -std::expm1(length * std::log1p(-p));  // 1 - q^length
  return length - q * miss_all / p;
}

inline double expected_sh_packet_fraction(const LengthHistogram& hist, double p) {
  double kept = 0.0;
  double total = 0.0;
  for (const auto& [len, count] : hist) {
    const double n = static_cast<double>(count);
    kept += n * expected_sh_packet_sampled(static_cast<double>(len), p);
    total += n * static_cast<double>(len);
  }
  return total > 0.0 ? kept / total : 0.0;
}

namespace detail {

inline void check_target(double target) {
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("target fraction must lie in (0, 1)");
}

// Bisection on log p for a non-decreasing fraction(p). Stops once a probe is
// within 1% of the target; otherwise narrows to adjacent p values and keeps
// the better side.
template <typename Fraction>
CalibrationResult bisect_rate(Fraction&& fraction, double target) {
  CalibrationResult best;
  auto consider = [&](double p, double f) {
    if (best.pilot_runs == 0 || std::abs(f - target) < std::abs(best.achieved_fraction - target)) {
      best.p = p;
      best.achieved_fraction = f;
    }
  };
  int runs = 0;
  double hi = 1.0;
  double f_hi = fraction(hi);
  ++runs;
  consider(hi, f_hi);
  best.pilot_runs = runs;
  if (f_hi < target * (1.0 - kCalibrationTolerance)) {
    throw CalibrationError("target fraction " + std::to_string(target) +
                           " unattainable: even p = 1 keeps only " + std::to_string(f_hi));
  }
  double lo = 1e-15;
  for (int i = 0; i < 200 && hi / lo > 1.0 + 1e-12; ++i) {
    const double mid = std::sqrt(lo * hi);
    const double f = fraction(mid);
    ++runs;
    consider(mid, f);
    if (std::abs(f - target) <= 0.01 * target) break;
    (f < target ? lo : hi) = mid;
  }
  best.pilot_runs = runs;
  if (std::abs(best.achieved_fraction - target) > kCalibrationTolerance * target) {
    throw CalibrationError("target fraction " + std::to_string(target) +
                           " unattainable: nearest achievable fraction is " +
                           std::to_string(best.achieved_fraction));
  }
  return best;
}

}  // namespace detail

// Calibrates from a flow-length histogram using the exact expected fraction
// (sample-and-hold by packet only, since the other methods depend on packet
// contents).
inline CalibrationResult calibrate_rate(const LengthHistogram& hist, double target) {
  detail::check_target(target);
  if (hist.empty()) throw CalibrationError("cannot calibrate on an empty histogram");
  return detail::bisect_rate([&](double p) { return expected_sh_packet_fraction(hist, p); },
                             target);
}

// Calibrates against pilot runs of the flow table over `pilot` with a fixed
// calibration seed. Packet sampling needs no pilot: its expected fraction is p.
// For the sample-and-hold methods the pilot fraction is a non-decreasing step
// function of p for a fixed seed, so bisection converges on the step nearest
// the target.
inline CalibrationResult calibrate_rate(std::span<const PacketRecord> pilot, SamplerMethod method,
                                        const FlowTableConfig& table, double target,
                                        std::uint64_t calibration_seed) {
  detail::check_target(target);
  if (method == SamplerMethod::kAlways) {
    throw ConfigError("the always-sample strategy has no rate to calibrate");
  }
  if (pilot.empty()) throw CalibrationError("cannot calibrate on an empty pilot stream");
  auto run = [&](double p) {
    return build_flows(pilot, table, SamplerConfig{method, p, calibration_seed}).sampled_fraction();
  };
  if (method == SamplerMethod::kPacket) return {target, run(target), 1};
  return detail::bisect_rate(run, target);
}

}  // namespace flowinv
