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

#include <string>
#include <unordered_map>
#include <vector>

#include "polyg2p/common.hpp"
#include "polyg2p/sample.hpp"

namespace polyg2p {

// Character-level vocabulary. The four specials hold fixed reserved ids;
// corpus characters follow in codepoint order.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr std::size_t kNumSpecials = 4;

  Vocab() = default;
  // tokens must start with the four special names in reserved order.
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  // Unknown characters map to kUnk.
  int id_of(char32_t c) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<char32_t, int> char_index_;
};

// Collects every character appearing in the training sentences.
// Deterministic and order-invariant over the sample list.
Vocab build_vocab(const std::vector<Sample>& samples);

}  // namespace polyg2p
