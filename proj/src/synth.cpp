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

#include "polyg2p/synth.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <stdexcept>

#include "polyg2p/common.hpp"

namespace polyg2p {

namespace {

// Neutral context characters; they trigger no rule.
constexpr std::array<char32_t, 20> kFiller = {
    U'的', U'一', U'是', U'在', U'有', U'人', U'这', U'中', U'大', U'来',
    U'上', U'国', U'个', U'到', U'说', U'们', U'时', U'要', U'就', U'出'};

// Two classes of trigger characters for the neighbor rules.
constexpr std::array<char32_t, 3> kClassA = {U'山', U'水', U'火'};
constexpr std::array<char32_t, 3> kClassB = {U'木', U'金', U'土'};

// Left-neighbor markers encoding the target's POS tag.
struct PosMarker {
  char32_t marker;
  const char* tag;
};
constexpr std::array<PosMarker, 4> kPosMarkers = {
    PosMarker{U'其', "N"}, PosMarker{U'将', "V"}, PosMarker{U'很', "D"},
    PosMarker{U'最', "A"}};

enum class RuleKind { kPos, kNeighbor };

struct PolyphoneRule {
  char32_t target;
  RuleKind kind;
  // kPos: label_a when the tag is `pos_trigger`, label_b otherwise.
  // kNeighbor: label_a on class A, label_b on class B or (for two-way
  // rules with empty label_c) anything not in class A, label_c otherwise.
  const char* pos_trigger;
  const char* label_a;
  const char* label_b;
  const char* label_c;
  int weight;  // relative sampling frequency
};

constexpr std::array<PolyphoneRule, 10> kRules = {
    PolyphoneRule{U'为', RuleKind::kPos, "V", "wei2", "wei4", "", 22},
    PolyphoneRule{U'长', RuleKind::kPos, "V", "zhang3", "chang2", "", 18},
    PolyphoneRule{U'行', RuleKind::kNeighbor, "", "xing2", "hang2", "", 16},
    PolyphoneRule{U'重', RuleKind::kNeighbor, "", "chong2", "zhong4", "", 12},
    PolyphoneRule{U'差', RuleKind::kNeighbor, "", "cha4", "chai1", "ci1", 10},
    PolyphoneRule{U'还', RuleKind::kPos, "D", "hai2", "huan2", "", 9},
    PolyphoneRule{U'乐', RuleKind::kNeighbor, "", "le4", "yue4", "", 6},
    PolyphoneRule{U'都', RuleKind::kNeighbor, "", "dou1", "du1", "", 3},
    PolyphoneRule{U'没', RuleKind::kNeighbor, "", "mo4", "mei2", "", 2},
    PolyphoneRule{U'种', RuleKind::kPos, "V", "zhong4", "zhong3", "", 2}};

template <typename Array>
bool contains(const Array& arr, char32_t c) {
  return std::find(arr.begin(), arr.end(), c) != arr.end();
}

const PolyphoneRule* find_rule(char32_t target) {
  for (const auto& rule : kRules) {
    if (rule.target == target) return &rule;
  }
  return nullptr;
}

char32_t random_neutral(Rng& rng) {
  // Mostly filler, with markers and class characters mixed in away from the
  // target so their mere presence carries no signal.
  const std::uint64_t roll = rng.below(10);
  if (roll < 7) return kFiller[rng.below(kFiller.size())];
  if (roll < 8) return kClassA[rng.below(kClassA.size())];
  if (roll < 9) return kClassB[rng.below(kClassB.size())];
  return kPosMarkers[rng.below(kPosMarkers.size())].marker;
}

}  // namespace

std::string marker_pos(char32_t left_neighbor) {
  for (const auto& m : kPosMarkers) {
    if (m.marker == left_neighbor) return m.tag;
  }
  return "";
}

std::string expected_phoneme(char32_t target, char32_t left_neighbor,
                             char32_t right_neighbor) {
  const PolyphoneRule* rule = find_rule(target);
  if (rule == nullptr) {
    throw std::invalid_argument("no pronunciation rule for " +
                                encode_utf8(target));
  }
  if (rule->kind == RuleKind::kPos) {
    const std::string pos = marker_pos(left_neighbor);
    if (pos.empty()) {
      throw std::invalid_argument("left neighbor is not a POS marker");
    }
    return pos == rule->pos_trigger ? rule->label_a : rule->label_b;
  }
  if (contains(kClassA, right_neighbor)) return rule->label_a;
  if (rule->label_c[0] != '\0') {
    // Three-way rule: class B has its own reading.
    if (contains(kClassB, right_neighbor)) return rule->label_b;
    return rule->label_c;
  }
  return rule->label_b;
}

std::vector<Sample> make_synthetic_corpus(const SynthSpec& spec,
                                          std::uint64_t seed) {
  if (spec.sample_count == 0) throw DataError("sample_count must be positive");
  if (spec.min_length < 4 || spec.max_length < spec.min_length) {
    throw DataError("invalid sentence length range");
  }

  int total_weight = 0;
  for (const auto& rule : kRules) total_weight += rule.weight;

  Rng rng(seed);
  std::vector<Sample> samples;
  samples.reserve(spec.sample_count);
  for (std::size_t i = 0; i < spec.sample_count; ++i) {
    const std::size_t len =
        spec.min_length + rng.below(spec.max_length - spec.min_length + 1);

    // Weighted choice of the polyphonic character.
    std::uint64_t pick = rng.below(static_cast<std::uint64_t>(total_weight));
    const PolyphoneRule* rule = &kRules.back();
    for (const auto& r : kRules) {
      if (pick < static_cast<std::uint64_t>(r.weight)) {
        rule = &r;
        break;
      }
      pick -= static_cast<std::uint64_t>(r.weight);
    }

    std::u32string sentence(len, U' ');
    for (std::size_t k = 0; k < len; ++k) sentence[k] = random_neutral(rng);

    // Target needs a marker on its left and a free cell on its right.
    const std::size_t target = 1 + rng.below(len - 2);
    sentence[target] = rule->target;

    const auto& marker = kPosMarkers[rng.below(kPosMarkers.size())];
    sentence[target - 1] = marker.marker;

    if (rule->kind == RuleKind::kNeighbor) {
      const bool three_way = rule->label_c[0] != '\0';
      const std::uint64_t branch = rng.below(three_way ? 3 : 2);
      if (branch == 0) {
        sentence[target + 1] = kClassA[rng.below(kClassA.size())];
      } else if (three_way && branch == 1) {
        sentence[target + 1] = kClassB[rng.below(kClassB.size())];
      } else {
        // Anything outside the trigger classes; two-way rules also exclude
        // class B only when it would collide with a three-way reading.
        char32_t c;
        do {
          c = random_neutral(rng);
        } while (contains(kClassA, c) || (three_way && contains(kClassB, c)));
        sentence[target + 1] = c;
      }
    } else {
      // POS rules ignore the right neighbor; keep it class-free anyway so
      // neighbor classes stay exclusive to neighbor-ruled characters.
      char32_t c;
      do {
        c = random_neutral(rng);
      } while (contains(kClassA, c) || contains(kClassB, c));
      sentence[target + 1] = c;
    }

    Sample sample;
    sample.sentence = std::move(sentence);
    sample.target_index = target;
    sample.pos_tag = marker.tag;
    sample.phoneme_label = expected_phoneme(
        rule->target, sample.sentence[target - 1], sample.sentence[target + 1]);
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::string serialize_corpus_tsv(const std::vector<Sample>& samples) {
  std::ostringstream out;
  for (const Sample& s : samples) {
    out << encode_utf8(s.sentence) << '\t' << s.target_index << '\t'
        << s.phoneme_label;
    if (!s.pos_tag.empty()) out << '\t' << s.pos_tag;
    out << '\n';
  }
  return out.str();
}

}  // namespace polyg2p
