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

namespace polyg2p {

// One annotated occurrence of a polyphonic character inside a sentence.
// pos_tag is empty when the dataset carries no POS column.
struct Sample {
  std::u32string sentence;
  std::size_t target_index = 0;
  std::string phoneme_label;
  std::string pos_tag;

  char32_t target_char() const { return sentence.at(target_index); }
};

// Tokenized, windowed form ready for the model. phoneme_id, pos_id and
// char_id are -1 when the corresponding label is unknown to the model
// (possible for held-out data; the training path rejects such samples).
struct EncodedSample {
  std::vector<int> token_ids;
  int target_position = 0;
  int phoneme_id = -1;
  int pos_id = -1;
  int char_id = -1;
  char32_t target_char = 0;
  std::vector<std::uint8_t> candidate_mask;
};

}  // namespace polyg2p
