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

#include "polyg2p/model.hpp"

namespace polyg2p {

// Single-file model container: magic, format version, JSON manifest
// (configs, vocabulary, phoneme inventory, POS tags, lexicon, fingerprint,
// tensor directory), raw little-endian float32 tensor payload, and a
// trailing checksum over manifest plus payload. Writes go through a
// temporary file renamed into place, so a crash never leaves a truncated
// archive at the target path.
inline constexpr std::uint32_t kArchiveVersion = 1;

void save_archive(Model<float>& model, const std::string& path);

// Round-trips bit-exactly with save_archive. Throws ArchiveError on bad
// magic, unsupported version, checksum mismatch, or a manifest that does
// not match the payload.
Model<float> load_archive(const std::string& path);

}  // namespace polyg2p
