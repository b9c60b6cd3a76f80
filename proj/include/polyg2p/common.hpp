// Copyright (c) 2026 polyg2p authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace polyg2p {

// Error taxonomy; the CLI maps each family onto a distinct exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ArchiveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LexiconError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Text positions throughout the project count Unicode scalar values, not
// bytes. Invalid byte sequences raise DataError.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view text);
std::string encode_utf8(char32_t cp);

std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t state = 14695981039346656037ull);
std::uint64_t fnv1a64(std::string_view text);
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

// Deterministic random source. The engine (mt19937_64) is fully specified
// by the standard; the distributions are hand-rolled on top of it so that a
// seed reproduces the same stream on every build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double normal();

  // Normal(0, stddev) resampled until |z| <= limit standard deviations.
  double truncated_normal(double stddev, double limit = 2.0) {
    double z = normal();
    while (z < -limit || z > limit) z = normal();
    return z * stddev;
  }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
      std::swap(items[i], items[below(i + 1)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace polyg2p
