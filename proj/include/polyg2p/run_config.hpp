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

#include "polyg2p/dataset.hpp"
#include "polyg2p/encoder.hpp"
#include "polyg2p/head.hpp"
#include "polyg2p/training.hpp"

namespace polyg2p {

struct RunConfig {
  DataConfig data;
  EncoderConfig encoder;
  HeadConfig head;
  TrainConfig train;

  void validate() const;
};

// INI-style text: [data] / [encoder] / [head] / [train] sections, key = value
// lines, '#' comments. Unknown sections or keys are ConfigErrors naming the
// offender; silent typos must not change a run. split_ratio is "a:b:c".
RunConfig parse_run_config(const std::string& text);

RunConfig load_run_config(const std::string& path);

// Every setting in a fixed order; equal configs produce equal text. Basis of
// the config fingerprint stored in trained archives.
std::string canonical_text(const RunConfig& config);

std::uint64_t config_fingerprint(const RunConfig& config);

}  // namespace polyg2p
