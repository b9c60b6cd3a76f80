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

#include "polyg2p/vocab.hpp"

#include <set>

namespace polyg2p {

namespace {
const char* kSpecialNames[Vocab::kNumSpecials] = {"[PAD]", "[UNK]", "[CLS]",
                                                  "[SEP]"};
}  // namespace

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumSpecials) {
    throw DataError("vocab must contain the four special tokens");
  }
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    if (tokens_[i] != kSpecialNames[i]) {
      throw DataError("vocab special token " + std::to_string(i) +
                      " must be " + kSpecialNames[i]);
    }
  }
  for (std::size_t i = kNumSpecials; i < tokens_.size(); ++i) {
    const std::u32string decoded = decode_utf8(tokens_[i]);
    if (decoded.size() != 1) {
      throw DataError("vocab token is not a single character: " + tokens_[i]);
    }
    auto [it, inserted] = char_index_.emplace(decoded[0], static_cast<int>(i));
    if (!inserted) throw DataError("duplicate vocab token: " + tokens_[i]);
  }
}

int Vocab::id_of(char32_t c) const {
  auto it = char_index_.find(c);
  return it == char_index_.end() ? kUnk : it->second;
}

Vocab build_vocab(const std::vector<Sample>& samples) {
  if (samples.empty()) throw DataError("empty corpus");
  std::set<char32_t> chars;
  for (const auto& s : samples) {
    for (char32_t c : s.sentence) chars.insert(c);
  }
  std::vector<std::string> tokens;
  tokens.reserve(Vocab::kNumSpecials + chars.size());
  for (std::size_t i = 0; i < Vocab::kNumSpecials; ++i) {
    tokens.emplace_back(kSpecialNames[i]);
  }
  for (char32_t c : chars) tokens.push_back(encode_utf8(c));
  return Vocab(std::move(tokens));
}

}  // namespace polyg2p
