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
#include <string>
#include <vector>

#include "polyg2p/sample.hpp"

namespace polyg2p {

struct SynthSpec {
  std::size_t sample_count = 2400;
  std::size_t min_length = 8;
  std::size_t max_length = 20;
};

// Rule-following corpus of polyphonic readings. Every pronunciation is a
// deterministic function of the local context, so a perfect model reaches
// 100% accuracy:
//   - the character left of the target encodes its POS tag;
//   - POS-ruled characters read off that tag;
//   - neighbor-ruled characters read off the class of the character to
//     their right.
// Character frequencies are skewed so per-character and per-sample accuracy
// averages genuinely differ.
std::vector<Sample> make_synthetic_corpus(const SynthSpec& spec,
                                          std::uint64_t seed);

// The rule table as a function; generated samples satisfy it exactly.
// Throws std::invalid_argument for characters without a rule.
std::string expected_phoneme(char32_t target, char32_t left_neighbor,
                             char32_t right_neighbor);

// POS tag encoded by the marker character; empty if not a marker.
std::string marker_pos(char32_t left_neighbor);

std::string serialize_corpus_tsv(const std::vector<Sample>& samples);

}  // namespace polyg2p
