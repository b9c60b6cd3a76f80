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

#include "polyg2p/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "polyg2p/common.hpp"

namespace polyg2p {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("bad integer for " + key + ": '" + value + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("bad integer for " + key + ": '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("bad boolean for " + key + ": '" + value +
                    "' (use true or false)");
}

int parse_alpha(const std::string& key, const std::string& value) {
  const std::size_t v = parse_size(key, value);
  if (v > 1) throw ConfigError(key + " must be 0 or 1");
  return static_cast<int>(v);
}

void parse_ratio(const std::string& value, std::size_t out[3]) {
  std::istringstream in(value);
  std::string part;
  std::size_t parts[3];
  for (std::size_t i = 0; i < 3; ++i) {
    if (!std::getline(in, part, ':')) {
      throw ConfigError("split_ratio must be a:b:c, got '" + value + "'");
    }
    parts[i] = parse_size("split_ratio", trim(part));
    if (parts[i] == 0) throw ConfigError("split_ratio entries must be positive");
  }
  if (std::getline(in, part, ':')) {
    throw ConfigError("split_ratio must be a:b:c, got '" + value + "'");
  }
  for (std::size_t i = 0; i < 3; ++i) out[i] = parts[i];
}

}  // namespace

void RunConfig::validate() const {
  encoder.validate();
  // The head's corpus-derived sizes are unknown before model build; check
  // only the user-settable fields here.
  for (int a : {head.alpha_cross, head.alpha_char, head.alpha_pos}) {
    if (a != 0 && a != 1) throw ConfigError("alpha flags must be 0 or 1");
  }
  if (head.beta < 0.0) throw ConfigError("beta must be nonnegative");
  if (head.proj_depth == 0) throw ConfigError("proj_depth must be positive");
  train.validate();
  if (data.window_size == 0) throw ConfigError("window_size must be positive");
  if (encoder.max_positions < data.window_size + 2) {
    throw ConfigError("max_positions must cover window_size plus CLS/SEP");
  }
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section != "data" && section != "encoder" && section != "head" &&
          section != "train") {
        throw ConfigError("unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError("key '" + key + "' outside any section");
    }
    if (key.empty() || value.empty()) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": empty key or value");
    }

    if (section == "data") {
      if (key == "window_size") {
        config.data.window_size = parse_size(key, value);
      } else if (key == "split_ratio") {
        parse_ratio(value, config.data.split_ratio);
      } else if (key == "shuffle_seed") {
        config.data.shuffle_seed = parse_u64(key, value);
      } else {
        throw ConfigError("unknown key '" + key + "' in section [data]");
      }
    } else if (section == "encoder") {
      if (key == "num_layers") {
        config.encoder.num_layers = parse_size(key, value);
      } else if (key == "hidden_size") {
        config.encoder.hidden_size = parse_size(key, value);
      } else if (key == "num_heads") {
        config.encoder.num_heads = parse_size(key, value);
      } else if (key == "ff_size") {
        config.encoder.ff_size = parse_size(key, value);
      } else if (key == "max_positions") {
        config.encoder.max_positions = parse_size(key, value);
      } else if (key == "dropout_rate") {
        config.encoder.dropout_rate = parse_double(key, value);
      } else {
        throw ConfigError("unknown key '" + key + "' in section [encoder]");
      }
    } else if (section == "head") {
      if (key == "alpha_cross") {
        config.head.alpha_cross = parse_alpha(key, value);
      } else if (key == "alpha_char") {
        config.head.alpha_char = parse_alpha(key, value);
      } else if (key == "alpha_pos") {
        config.head.alpha_pos = parse_alpha(key, value);
      } else if (key == "beta") {
        config.head.beta = parse_double(key, value);
      } else if (key == "use_hard_mask") {
        config.head.use_hard_mask = parse_bool(key, value);
      } else if (key == "use_soft_weights") {
        config.head.use_soft_weights = parse_bool(key, value);
      } else if (key == "proj_depth") {
        config.head.proj_depth = parse_size(key, value);
      } else {
        throw ConfigError("unknown key '" + key + "' in section [head]");
      }
    } else {  // train
      if (key == "learning_rate") {
        config.train.learning_rate = parse_double(key, value);
      } else if (key == "batch_size") {
        config.train.batch_size = parse_size(key, value);
      } else if (key == "max_iterations") {
        config.train.max_iterations = parse_size(key, value);
      } else if (key == "validate_every") {
        config.train.validate_every = parse_size(key, value);
      } else if (key == "seed") {
        config.train.seed = parse_u64(key, value);
      } else if (key == "adam_beta1") {
        config.train.adam_beta1 = parse_double(key, value);
      } else if (key == "adam_beta2") {
        config.train.adam_beta2 = parse_double(key, value);
      } else if (key == "adam_epsilon") {
        config.train.adam_epsilon = parse_double(key, value);
      } else {
        throw ConfigError("unknown key '" + key + "' in section [train]");
      }
    }
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

std::string canonical_text(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "[data]\n"
      << "window_size = " << c.data.window_size << "\n"
      << "split_ratio = " << c.data.split_ratio[0] << ":"
      << c.data.split_ratio[1] << ":" << c.data.split_ratio[2] << "\n"
      << "shuffle_seed = " << c.data.shuffle_seed << "\n"
      << "[encoder]\n"
      << "num_layers = " << c.encoder.num_layers << "\n"
      << "hidden_size = " << c.encoder.hidden_size << "\n"
      << "num_heads = " << c.encoder.num_heads << "\n"
      << "ff_size = " << c.encoder.ff_size << "\n"
      << "max_positions = " << c.encoder.max_positions << "\n"
      << "dropout_rate = " << c.encoder.dropout_rate << "\n"
      << "[head]\n"
      << "alpha_cross = " << c.head.alpha_cross << "\n"
      << "alpha_char = " << c.head.alpha_char << "\n"
      << "alpha_pos = " << c.head.alpha_pos << "\n"
      << "beta = " << c.head.beta << "\n"
      << "use_hard_mask = " << (c.head.use_hard_mask ? "true" : "false") << "\n"
      << "use_soft_weights = " << (c.head.use_soft_weights ? "true" : "false")
      << "\n"
      << "proj_depth = " << c.head.proj_depth << "\n"
      << "[train]\n"
      << "learning_rate = " << c.train.learning_rate << "\n"
      << "batch_size = " << c.train.batch_size << "\n"
      << "max_iterations = " << c.train.max_iterations << "\n"
      << "validate_every = " << c.train.validate_every << "\n"
      << "seed = " << c.train.seed << "\n"
      << "adam_beta1 = " << c.train.adam_beta1 << "\n"
      << "adam_beta2 = " << c.train.adam_beta2 << "\n"
      << "adam_epsilon = " << c.train.adam_epsilon << "\n";
  return out.str();
}

std::uint64_t config_fingerprint(const RunConfig& config) {
  return fnv1a64(canonical_text(config));
}

}  // namespace polyg2p
