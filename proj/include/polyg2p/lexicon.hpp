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
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "polyg2p/common.hpp"
#include "polyg2p/sample.hpp"

namespace polyg2p {

// The phoneme label set observed in training data. Ids are assigned in
// sorted label order so serialized models are stable across runs.
class PhonemeInventory {
 public:
  PhonemeInventory() = default;
  explicit PhonemeInventory(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t id) const { return labels_.at(id); }
  const std::vector<std::string>& labels() const { return labels_; }

  std::optional<int> find(const std::string& label) const;
  int require(const std::string& label) const;

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

// Per-character candidate phoneme sets; the source of the hard mask.
// Characters are also assigned dense ids (sorted codepoint order) used by
// the conditional weight layer's embedding tables.
class PolyphoneLexicon {
 public:
  PolyphoneLexicon() = default;
  explicit PolyphoneLexicon(std::map<char32_t, std::vector<int>> entries);

  std::size_t size() const { return chars_.size(); }
  bool contains(char32_t c) const { return char_index_.count(c) != 0; }
  std::optional<int> char_id(char32_t c) const;
  char32_t char_at(std::size_t id) const { return chars_.at(id); }
  const std::vector<char32_t>& chars() const { return chars_; }

  // Candidate phoneme ids, ascending. Throws LexiconError for unknown chars.
  const std::vector<int>& candidates(char32_t c) const;

  bool is_polyphonic(char32_t c) const { return candidates(c).size() >= 2; }

 private:
  std::vector<char32_t> chars_;
  std::vector<std::vector<int>> candidates_;
  std::unordered_map<char32_t, int> char_index_;
};

// The fixed 11-tag POS set. Tag order is part of the serialized model
// contract; do not reorder.
class PosTagSet {
 public:
  static constexpr std::size_t kNumTags = 11;

  PosTagSet();

  std::size_t size() const { return kNumTags; }
  const std::string& tag(std::size_t id) const { return tags_.at(id); }
  const std::vector<std::string>& tags() const { return tags_; }
  std::optional<int> find(const std::string& tag) const;

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> index_;
};

struct LexiconBuild {
  PhonemeInventory inventory;
  PolyphoneLexicon lexicon;
};

// Derives the phoneme inventory and per-character candidate sets from a
// training corpus. Deterministic: labels sorted lexicographically, characters
// by codepoint. Throws DataError("empty corpus") on an empty input.
LexiconBuild build_lexicon(const std::vector<Sample>& samples);

// Binary candidate mask of length n for the target character (1 on each
// candidate id, 0 elsewhere). Throws LexiconError("character not in lexicon")
// for unknown characters; callers wanting an unrestricted fallback build an
// all-ones mask explicitly.
std::vector<std::uint8_t> hard_mask(const PolyphoneLexicon& lexicon,
                                    char32_t target, std::size_t n);

// Text-table form used inside the model archive: one line per character,
// tab-separated candidate labels, UTF-8, sorted by codepoint.
std::string lexicon_to_table(const PolyphoneLexicon& lexicon,
                             const PhonemeInventory& inventory);
PolyphoneLexicon lexicon_from_table(const std::string& table,
                                    const PhonemeInventory& inventory);

}  // namespace polyg2p
