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

#include "polyg2p/common.hpp"
#include "polyg2p/lexicon.hpp"
#include "polyg2p/sample.hpp"
#include "polyg2p/vocab.hpp"

namespace polyg2p {

struct DataConfig {
  std::size_t window_size = 32;
  std::size_t split_ratio[3] = {10, 1, 1};
  std::uint64_t shuffle_seed = 13;
};

enum class DatasetFormat { kNative, kCpp };

DatasetFormat parse_format(const std::string& tag);

// Malformed lines are rejected and reported, never silently dropped.
struct LoadReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<std::string> messages;
};

struct LoadResult {
  std::vector<Sample> samples;
  LoadReport report;
};

// Native format: UTF-8 TSV, one sample per line:
//   sentence \t target_index \t phoneme_label [\t pos_tag]
// The cpp format reads a .sent file whose lines mark the target character by
// enclosing it in U+2581, paired with a .lb label file (same basename).
LoadResult load_dataset(const std::string& path, DatasetFormat format);

LoadResult parse_native_tsv(const std::string& text, const PosTagSet& tags);

// Window of length min(window_size, sentence length) around the target:
// ideal left span is (window_size-1)/2 characters, clamped at sentence
// boundaries with the surplus extended to the opposite side.
struct Window {
  std::u32string subtext;
  std::size_t target_index = 0;
};
Window truncate_window(const std::u32string& sentence, std::size_t target_index,
                       std::size_t window_size);

struct EncodeOptions {
  // When the target character is absent from the lexicon: false -> throw
  // LexiconError, true -> unrestricted all-ones candidate mask.
  bool fallback_unrestricted = false;
};

EncodedSample encode_sample(const Sample& sample, const Vocab& vocab,
                            const PolyphoneLexicon& lexicon,
                            const PhonemeInventory& inventory,
                            const PosTagSet& pos_tags, const DataConfig& config,
                            const EncodeOptions& options = {});

struct SplitResult {
  std::vector<Sample> train;
  std::vector<Sample> dev;
  std::vector<Sample> test;
};

// Shuffles each target-character stratum by seed and partitions it by the
// ratio; integer remainders are assigned train-first, then dev, then test.
SplitResult stratified_split(const std::vector<Sample>& samples,
                             const std::size_t ratio[3], std::uint64_t seed);

// One epoch: a seeded permutation of [0, count) cut into consecutive chunks
// of batch_size (last chunk may be short). Reproducible given (seed, epoch).
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed,
                                                    std::uint64_t epoch);

}  // namespace polyg2p
