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

#include "polyg2p/archive.hpp"

#include <unistd.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"

namespace polyg2p {

namespace {

static_assert(std::endian::native == std::endian::little,
              "archive payload assumes a little-endian host");

constexpr char kMagic[8] = {'P', 'G', '2', 'P', 'M', 'D', 'L', '\n'};

using nlohmann::json;

void append_u32(std::string* out, std::uint32_t v) {
  out->append(reinterpret_cast<const char*>(&v), sizeof(v));
}

void append_u64(std::string* out, std::uint64_t v) {
  out->append(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(const std::string& data, std::size_t* at) {
  if (*at + 4 > data.size()) throw ArchiveError("truncated archive");
  std::uint32_t v;
  std::memcpy(&v, data.data() + *at, 4);
  *at += 4;
  return v;
}

std::uint64_t read_u64(const std::string& data, std::size_t* at) {
  if (*at + 8 > data.size()) throw ArchiveError("truncated archive");
  std::uint64_t v;
  std::memcpy(&v, data.data() + *at, 8);
  *at += 8;
  return v;
}

std::string u64_hex(std::uint64_t v) {
  std::ostringstream out;
  out << "0x" << std::hex << v;
  return out.str();
}

std::uint64_t parse_u64_hex(const std::string& s) {
  return std::stoull(s, nullptr, 16);
}

json encoder_to_json(const EncoderConfig& c) {
  return json{{"num_layers", c.num_layers},
              {"hidden_size", c.hidden_size},
              {"num_heads", c.num_heads},
              {"ff_size", c.ff_size},
              {"max_positions", c.max_positions},
              {"dropout_rate", c.dropout_rate}};
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig c;
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.hidden_size = j.at("hidden_size").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.ff_size = j.at("ff_size").get<std::size_t>();
  c.max_positions = j.at("max_positions").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  return c;
}

json head_to_json(const HeadConfig& c) {
  return json{{"alpha_cross", c.alpha_cross},
              {"alpha_char", c.alpha_char},
              {"alpha_pos", c.alpha_pos},
              {"beta", c.beta},
              {"use_hard_mask", c.use_hard_mask},
              {"use_soft_weights", c.use_soft_weights},
              {"proj_depth", c.proj_depth},
              {"num_phonemes", c.num_phonemes},
              {"num_pos", c.num_pos},
              {"hidden_size", c.hidden_size}};
}

HeadConfig head_from_json(const json& j) {
  HeadConfig c;
  c.alpha_cross = j.at("alpha_cross").get<int>();
  c.alpha_char = j.at("alpha_char").get<int>();
  c.alpha_pos = j.at("alpha_pos").get<int>();
  c.beta = j.at("beta").get<double>();
  c.use_hard_mask = j.at("use_hard_mask").get<bool>();
  c.use_soft_weights = j.at("use_soft_weights").get<bool>();
  c.proj_depth = j.at("proj_depth").get<std::size_t>();
  c.num_phonemes = j.at("num_phonemes").get<std::size_t>();
  c.num_pos = j.at("num_pos").get<std::size_t>();
  c.hidden_size = j.at("hidden_size").get<std::size_t>();
  return c;
}

}  // namespace

void save_archive(Model<float>& model, const std::string& path) {
  json manifest;
  manifest["format"] = "polyg2p-model";
  manifest["version"] = kArchiveVersion;
  manifest["encoder"] = encoder_to_json(model.encoder_config);
  manifest["head"] = head_to_json(model.head_config);
  manifest["data"] = json{{"window_size", model.data_config.window_size},
                          {"split_ratio",
                           {model.data_config.split_ratio[0],
                            model.data_config.split_ratio[1],
                            model.data_config.split_ratio[2]}},
                          {"shuffle_seed", model.data_config.shuffle_seed}};
  manifest["vocab"] = model.vocab.tokens();
  manifest["phonemes"] = model.inventory.labels();
  manifest["pos_tags"] = model.pos_tags.tags();
  manifest["lexicon"] = lexicon_to_table(model.lexicon, model.inventory);
  manifest["fingerprint"] =
      json{{"config_hash", u64_hex(model.fingerprint.config_hash)},
           {"seed", model.fingerprint.seed}};

  std::string payload;
  json tensors = json::array();
  for (Param<float>* p : model.named_params()) {
    tensors.push_back(json{{"name", p->name},
                           {"rows", p->value.rows()},
                           {"cols", p->value.cols()},
                           {"dtype", "float32"}});
    payload.append(reinterpret_cast<const char*>(p->value.data()),
                   static_cast<std::size_t>(p->value.size()) * sizeof(float));
  }
  manifest["tensors"] = std::move(tensors);

  const std::string manifest_text = manifest.dump();
  std::uint64_t checksum = fnv1a64(manifest_text);
  checksum = fnv1a64(payload.data(), payload.size(), checksum);

  std::string blob;
  blob.append(kMagic, sizeof(kMagic));
  append_u32(&blob, kArchiveVersion);
  append_u64(&blob, manifest_text.size());
  blob += manifest_text;
  append_u64(&blob, payload.size());
  blob += payload;
  append_u64(&blob, checksum);

  const std::filesystem::path target(path);
  const std::filesystem::path tmp =
      target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArchiveError("cannot open " + tmp.string() + " for writing");
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw ArchiveError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw ArchiveError("cannot move archive into place: " + path);
  }
}

Model<float> load_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open archive: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string data = buffer.str();

  std::size_t at = 0;
  if (data.size() < sizeof(kMagic) ||
      std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ArchiveError("not a model archive: " + path);
  }
  at = sizeof(kMagic);
  const std::uint32_t version = read_u32(data, &at);
  if (version != kArchiveVersion) {
    throw ArchiveError("unsupported archive version " +
                       std::to_string(version) + " (expected " +
                       std::to_string(kArchiveVersion) + ")");
  }
  const std::uint64_t manifest_size = read_u64(data, &at);
  if (at + manifest_size > data.size()) throw ArchiveError("truncated archive");
  const std::string manifest_text = data.substr(at, manifest_size);
  at += manifest_size;
  const std::uint64_t payload_size = read_u64(data, &at);
  if (at + payload_size > data.size()) throw ArchiveError("truncated archive");
  const std::size_t payload_at = at;
  at += payload_size;
  const std::uint64_t stored_checksum = read_u64(data, &at);

  std::uint64_t checksum = fnv1a64(manifest_text);
  checksum = fnv1a64(data.data() + payload_at, payload_size, checksum);
  if (checksum != stored_checksum) {
    throw ArchiveError("checksum mismatch (corrupt archive): " + path);
  }

  json manifest;
  try {
    manifest = json::parse(manifest_text);
  } catch (const json::exception& e) {
    throw ArchiveError(std::string("bad archive manifest: ") + e.what());
  }

  Model<float> model;
  try {
    if (manifest.at("format").get<std::string>() != "polyg2p-model") {
      throw ArchiveError("bad archive format tag");
    }
    model.encoder_config = encoder_from_json(manifest.at("encoder"));
    model.head_config = head_from_json(manifest.at("head"));
    const json& dj = manifest.at("data");
    model.data_config.window_size = dj.at("window_size").get<std::size_t>();
    for (std::size_t i = 0; i < 3; ++i) {
      model.data_config.split_ratio[i] =
          dj.at("split_ratio").at(i).get<std::size_t>();
    }
    model.data_config.shuffle_seed = dj.at("shuffle_seed").get<std::uint64_t>();
    model.vocab = Vocab(manifest.at("vocab").get<std::vector<std::string>>());
    model.inventory = PhonemeInventory(
        manifest.at("phonemes").get<std::vector<std::string>>());
    const auto tags = manifest.at("pos_tags").get<std::vector<std::string>>();
    if (tags != model.pos_tags.tags()) {
      throw ArchiveError("archive POS tag set does not match this build");
    }
    model.lexicon = lexicon_from_table(
        manifest.at("lexicon").get<std::string>(), model.inventory);
    model.fingerprint.config_hash = parse_u64_hex(
        manifest.at("fingerprint").at("config_hash").get<std::string>());
    model.fingerprint.seed =
        manifest.at("fingerprint").at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ArchiveError(std::string("bad archive manifest: ") + e.what());
  }

  // Parameter tensors are rebuilt at their declared shapes, then filled
  // from the payload in manifest order.
  Rng rng(0);
  model.encoder =
      init_encoder<float>(model.encoder_config, model.vocab.size(), rng);
  model.head = init_head<float>(model.head_config, model.lexicon.size(), rng);

  std::vector<Param<float>*> params = model.named_params();
  const json& tensors = manifest.at("tensors");
  if (tensors.size() != params.size()) {
    throw ArchiveError("archive tensor count does not match the model");
  }
  std::size_t offset = payload_at;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& t = tensors.at(i);
    Param<float>* p = params[i];
    if (t.at("name").get<std::string>() != p->name) {
      throw ArchiveError("archive tensor order mismatch at " + p->name);
    }
    if (t.at("dtype").get<std::string>() != "float32") {
      throw ArchiveError("unsupported tensor dtype in " + p->name);
    }
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw ArchiveError("archive tensor shape mismatch at " + p->name);
    }
    const std::size_t bytes =
        static_cast<std::size_t>(p->value.size()) * sizeof(float);
    if (offset + bytes > payload_at + payload_size) {
      throw ArchiveError("archive payload too small");
    }
    std::memcpy(p->value.data(), data.data() + offset, bytes);
    offset += bytes;
  }
  if (offset != payload_at + payload_size) {
    throw ArchiveError("archive payload has trailing bytes");
  }
  return model;
}

}  // namespace polyg2p
