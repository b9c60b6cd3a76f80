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

#include "polyg2p/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace polyg2p {

namespace {

constexpr char32_t kCppAnchor = 0x2581;  // U+2581, wraps the target character

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

bool parse_index(const std::string& text, std::size_t* out) {
  if (text.empty()) return false;
  std::size_t value = 0;
  auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return false;
  *out = value;
  return true;
}

void reject(LoadReport* report, std::size_t line_no, const std::string& why) {
  ++report->rejected;
  report->messages.push_back("line " + std::to_string(line_no) + ": " + why);
}

LoadResult load_cpp_pair(const std::string& sent_path) {
  std::string lb_path = sent_path;
  const std::size_t dot = lb_path.rfind('.');
  if (dot == std::string::npos || lb_path.substr(dot) != ".sent") {
    throw DataError("cpp format expects a .sent file: " + sent_path);
  }
  lb_path.replace(dot, std::string::npos, ".lb");

  const auto sent_lines = split_lines(read_file(sent_path));
  const auto lb_lines = split_lines(read_file(lb_path));
  if (sent_lines.size() != lb_lines.size()) {
    throw DataError("cpp format: " + sent_path + " has " +
                    std::to_string(sent_lines.size()) + " lines but " +
                    lb_path + " has " + std::to_string(lb_lines.size()));
  }

  LoadResult result;
  for (std::size_t i = 0; i < sent_lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (sent_lines[i].empty() && lb_lines[i].empty()) continue;
    std::u32string decoded;
    try {
      decoded = decode_utf8(sent_lines[i]);
    } catch (const DataError& e) {
      reject(&result.report, line_no, e.what());
      continue;
    }
    std::vector<std::size_t> anchors;
    for (std::size_t k = 0; k < decoded.size(); ++k) {
      if (decoded[k] == kCppAnchor) anchors.push_back(k);
    }
    if (anchors.size() != 2 || anchors[1] != anchors[0] + 2) {
      reject(&result.report, line_no,
             "expected exactly one character enclosed in anchor marks");
      continue;
    }
    if (lb_lines[i].empty()) {
      reject(&result.report, line_no, "empty label");
      continue;
    }
    Sample s;
    s.sentence = decoded.substr(0, anchors[0]) + decoded[anchors[0] + 1] +
                 decoded.substr(anchors[1] + 1);
    s.target_index = anchors[0];
    s.phoneme_label = lb_lines[i];
    result.samples.push_back(std::move(s));
    ++result.report.accepted;
  }
  return result;
}

}  // namespace

DatasetFormat parse_format(const std::string& tag) {
  if (tag == "native") return DatasetFormat::kNative;
  if (tag == "cpp") return DatasetFormat::kCpp;
  throw DataError("unknown dataset format: " + tag);
}

LoadResult parse_native_tsv(const std::string& text, const PosTagSet& tags) {
  LoadResult result;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string& line = lines[i];
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 3 || fields.size() > 4) {
      reject(&result.report, line_no,
             "expected 3 or 4 tab-separated fields, got " +
                 std::to_string(fields.size()));
      continue;
    }
    std::u32string sentence;
    try {
      sentence = decode_utf8(fields[0]);
    } catch (const DataError& e) {
      reject(&result.report, line_no, e.what());
      continue;
    }
    if (sentence.empty()) {
      reject(&result.report, line_no, "empty sentence");
      continue;
    }
    std::size_t target_index = 0;
    if (!parse_index(fields[1], &target_index)) {
      reject(&result.report, line_no, "target_index is not a number: " + fields[1]);
      continue;
    }
    if (target_index >= sentence.size()) {
      reject(&result.report, line_no,
             "target_index " + std::to_string(target_index) +
                 " out of range for sentence of length " +
                 std::to_string(sentence.size()));
      continue;
    }
    if (fields[2].empty()) {
      reject(&result.report, line_no, "empty phoneme label");
      continue;
    }
    Sample s;
    s.sentence = std::move(sentence);
    s.target_index = target_index;
    s.phoneme_label = fields[2];
    if (fields.size() == 4 && !fields[3].empty()) {
      if (!tags.find(fields[3])) {
        reject(&result.report, line_no, "unknown POS tag: " + fields[3]);
        continue;
      }
      s.pos_tag = fields[3];
    }
    result.samples.push_back(std::move(s));
    ++result.report.accepted;
  }
  return result;
}

LoadResult load_dataset(const std::string& path, DatasetFormat format) {
  switch (format) {
    case DatasetFormat::kNative: {
      static const PosTagSet tags;
      return parse_native_tsv(read_file(path), tags);
    }
    case DatasetFormat::kCpp:
      return load_cpp_pair(path);
  }
  throw DataError("unknown format tag");
}

Window truncate_window(const std::u32string& sentence, std::size_t target_index,
                       std::size_t window_size) {
  if (window_size == 0) throw DataError("window size must be >= 1");
  if (target_index >= sentence.size()) {
    throw DataError("target index out of range");
  }
  const std::size_t width = std::min(window_size, sentence.size());
  const std::size_t left_span = (window_size - 1) / 2;
  std::size_t start = target_index > left_span ? target_index - left_span : 0;
  start = std::min(start, sentence.size() - width);
  return {sentence.substr(start, width), target_index - start};
}

EncodedSample encode_sample(const Sample& sample, const Vocab& vocab,
                            const PolyphoneLexicon& lexicon,
                            const PhonemeInventory& inventory,
                            const PosTagSet& pos_tags, const DataConfig& config,
                            const EncodeOptions& options) {
  const char32_t target = sample.target_char();

  EncodedSample out;
  out.target_char = target;
  if (auto cid = lexicon.char_id(target)) {
    out.char_id = *cid;
    out.candidate_mask = hard_mask(lexicon, target, inventory.size());
  } else if (options.fallback_unrestricted) {
    out.candidate_mask.assign(inventory.size(), 1);
  } else {
    throw LexiconError("character not in lexicon: " + encode_utf8(target));
  }

  const Window window =
      truncate_window(sample.sentence, sample.target_index, config.window_size);
  out.token_ids.reserve(window.subtext.size() + 2);
  out.token_ids.push_back(Vocab::kCls);
  for (char32_t c : window.subtext) out.token_ids.push_back(vocab.id_of(c));
  out.token_ids.push_back(Vocab::kSep);
  out.target_position = static_cast<int>(window.target_index + 1);

  if (auto pid = inventory.find(sample.phoneme_label)) out.phoneme_id = *pid;
  if (!sample.pos_tag.empty()) {
    if (auto tid = pos_tags.find(sample.pos_tag)) out.pos_id = *tid;
  }
  return out;
}

SplitResult stratified_split(const std::vector<Sample>& samples,
                             const std::size_t ratio[3], std::uint64_t seed) {
  if (ratio[0] == 0 || ratio[1] == 0 || ratio[2] == 0) {
    throw DataError("split ratio entries must be positive");
  }
  std::map<char32_t, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    strata[samples[i].target_char()].push_back(i);
  }

  SplitResult result;
  const std::size_t total = ratio[0] + ratio[1] + ratio[2];
  for (auto& [c, indices] : strata) {
    Rng rng(mix64(seed, static_cast<std::uint64_t>(c)));
    rng.shuffle(indices);

    const std::size_t m = indices.size();
    std::size_t counts[3] = {m * ratio[0] / total, m * ratio[1] / total,
                             m * ratio[2] / total};
    std::size_t remainder = m - counts[0] - counts[1] - counts[2];
    for (std::size_t part = 0; remainder > 0; part = (part + 1) % 3) {
      ++counts[part];
      --remainder;
    }

    std::size_t cursor = 0;
    std::vector<Sample>* parts[3] = {&result.train, &result.dev, &result.test};
    for (std::size_t part = 0; part < 3; ++part) {
      for (std::size_t k = 0; k < counts[part]; ++k) {
        parts[part]->push_back(samples[indices[cursor++]]);
      }
    }
  }
  return result;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed,
                                                    std::uint64_t epoch) {
  if (batch_size == 0) throw DataError("batch size must be >= 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(mix64(seed, epoch));
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace polyg2p
