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
#include <random>

namespace flowinv {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent random streams derived from one seed. Each consumer uses its
// own stream tag so that e.g. sampling and resampling never share draws.
enum class Stream : std::uint64_t {
  kSampling = 0x73616d706c65ULL,
  kResampling = 0x726573616d70ULL,
};

// Counter-based uniform draw in [0, 1): a pure function of
// (seed, stream, index), so decisions can be replayed in any order.
constexpr double counter_uniform(std::uint64_t seed, Stream stream,
                                 std::uint64_t index) {
  std::uint64_t h = mix64(mix64(seed) ^ static_cast<std::uint64_t>(stream));
  h = mix64(h ^ index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Sequential generator for the synthetic trace builder. The standard
// distributions are implementation-defined, so the draws are done by hand to
// keep traces identical across standard libraries.
class SequentialRng {
 public:
  explicit SequentialRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [lo, hi].
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    const std::uint64_t span = hi - lo + 1;
    if (span == 0) return engine_();
    return lo + static_cast<std::uint64_t>(uniform() * static_cast<double>(span)) % span;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace flowinv
