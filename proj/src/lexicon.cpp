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

#include "polyg2p/lexicon.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace polyg2p {

PhonemeInventory::PhonemeInventory(std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    auto [it, inserted] = index_.emplace(labels_[i], static_cast<int>(i));
    if (!inserted) {
      throw DataError("duplicate phoneme label: " + labels_[i]);
    }
  }
}

std::optional<int> PhonemeInventory::find(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int PhonemeInventory::require(const std::string& label) const {
  auto id = find(label);
  if (!id) throw DataError("phoneme label not in inventory: " + label);
  return *id;
}

PolyphoneLexicon::PolyphoneLexicon(std::map<char32_t, std::vector<int>> entries) {
  chars_.reserve(entries.size());
  candidates_.reserve(entries.size());
  for (auto& [c, ids] : entries) {
    if (ids.empty()) {
      throw DataError("lexicon entry with no candidates: " + encode_utf8(c));
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    char_index_.emplace(c, static_cast<int>(chars_.size()));
    chars_.push_back(c);
    candidates_.push_back(std::move(ids));
  }
}

std::optional<int> PolyphoneLexicon::char_id(char32_t c) const {
  auto it = char_index_.find(c);
  if (it == char_index_.end()) return std::nullopt;
  return it->second;
}

const std::vector<int>& PolyphoneLexicon::candidates(char32_t c) const {
  auto it = char_index_.find(c);
  if (it == char_index_.end()) {
    throw LexiconError("character not in lexicon: " + encode_utf8(c));
  }
  return candidates_[static_cast<std::size_t>(it->second)];
}

PosTagSet::PosTagSet()
    : tags_{"UNK", "A", "C", "D", "I", "N", "P", "T", "V", "DE", "SHI"} {
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    index_.emplace(tags_[i], static_cast<int>(i));
  }
}

std::optional<int> PosTagSet::find(const std::string& tag) const {
  auto it = index_.find(tag);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

LexiconBuild build_lexicon(const std::vector<Sample>& samples) {
  if (samples.empty()) throw DataError("empty corpus");

  std::set<std::string> label_set;
  for (const auto& s : samples) label_set.insert(s.phoneme_label);
  PhonemeInventory inventory(
      std::vector<std::string>(label_set.begin(), label_set.end()));

  std::map<char32_t, std::set<int>> grouped;
  for (const auto& s : samples) {
    grouped[s.target_char()].insert(inventory.require(s.phoneme_label));
  }
  std::map<char32_t, std::vector<int>> entries;
  for (auto& [c, ids] : grouped) {
    entries.emplace(c, std::vector<int>(ids.begin(), ids.end()));
  }
  return {std::move(inventory), PolyphoneLexicon(std::move(entries))};
}

std::vector<std::uint8_t> hard_mask(const PolyphoneLexicon& lexicon,
                                    char32_t target, std::size_t n) {
  std::vector<std::uint8_t> mask(n, 0);
  for (int id : lexicon.candidates(target)) {
    if (id < 0 || static_cast<std::size_t>(id) >= n) {
      throw LexiconError("candidate phoneme id out of range: " +
                         std::to_string(id));
    }
    mask[static_cast<std::size_t>(id)] = 1;
  }
  return mask;
}

std::string lexicon_to_table(const PolyphoneLexicon& lexicon,
                             const PhonemeInventory& inventory) {
  std::string out;
  for (std::size_t id = 0; id < lexicon.size(); ++id) {
    const char32_t c = lexicon.char_at(id);
    out += encode_utf8(c);
    for (int pid : lexicon.candidates(c)) {
      out += '\t';
      out += inventory.label(static_cast<std::size_t>(pid));
    }
    out += '\n';
  }
  return out;
}

PolyphoneLexicon lexicon_from_table(const std::string& table,
                                    const PhonemeInventory& inventory) {
  std::map<char32_t, std::vector<int>> entries;
  std::istringstream lines(table);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2) {
      throw ArchiveError("lexicon table line " + std::to_string(line_no) +
                         ": expected character and at least one label");
    }
    const std::u32string key = decode_utf8(fields[0]);
    if (key.size() != 1) {
      throw ArchiveError("lexicon table line " + std::to_string(line_no) +
                         ": key must be a single character");
    }
    std::vector<int> ids;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      ids.push_back(inventory.require(fields[i]));
    }
    entries.emplace(key[0], std::move(ids));
  }
  return PolyphoneLexicon(std::move(entries));
}

}  // namespace polyg2p
