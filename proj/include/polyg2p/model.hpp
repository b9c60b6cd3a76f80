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

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "polyg2p/dataset.hpp"
#include "polyg2p/encoder.hpp"
#include "polyg2p/head.hpp"
#include "polyg2p/lexicon.hpp"
#include "polyg2p/vocab.hpp"

namespace polyg2p {

// Provenance of a trained model, carried through the archive.
struct TrainingFingerprint {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

template <typename S>
struct Model {
  EncoderConfig encoder_config;
  HeadConfig head_config;
  DataConfig data_config;
  Vocab vocab;
  PhonemeInventory inventory;
  PolyphoneLexicon lexicon;
  PosTagSet pos_tags;
  EncoderParams<S> encoder;
  HeadParams<S> head;
  TrainingFingerprint fingerprint;

  std::vector<Param<S>*> named_params() {
    std::vector<Param<S>*> out;
    encoder.collect(&out);
    head.collect(&out);
    return out;
  }

  void zero_grads() {
    for (Param<S>* p : named_params()) p->zero_grad();
  }
};

// Vocabulary, inventory and lexicon come from the training split only;
// dev/test characters absent from it are out-of-lexicon by design.
template <typename S>
Model<S> build_model(const std::vector<Sample>& train_samples,
                     const EncoderConfig& encoder_config, HeadConfig head_config,
                     const DataConfig& data_config, std::uint64_t init_seed) {
  encoder_config.validate();
  if (encoder_config.max_positions < data_config.window_size + 2) {
    throw ConfigError("max_positions must cover window_size plus CLS/SEP");
  }

  Model<S> model;
  model.encoder_config = encoder_config;
  model.data_config = data_config;
  model.vocab = build_vocab(train_samples);
  auto built = build_lexicon(train_samples);
  model.inventory = std::move(built.inventory);
  model.lexicon = std::move(built.lexicon);

  head_config.num_phonemes = model.inventory.size();
  head_config.num_pos = model.pos_tags.size();
  head_config.hidden_size = encoder_config.hidden_size;
  head_config.validate();
  model.head_config = head_config;

  Rng rng(init_seed);
  model.encoder = init_encoder<S>(encoder_config, model.vocab.size(), rng);
  model.head = init_head<S>(head_config, model.lexicon.size(), rng);
  return model;
}

template <typename S>
struct ForwardResult {
  typename Graph<S>::NodeRef total_loss{-1};
  S loss = S(0);
  S phoneme_loss = S(0);
  S pos_loss = S(0);
  std::vector<S> phoneme_probs;  // full inventory, zero off support
  std::vector<S> pos_probs;      // empty when the POS branch is off
};

// Builds the training loss L_total = L_phoneme + beta * L_pos on the tape.
// Teacher mode: the soft weights see the gold POS tag, never the predicted
// one. Caller runs g.backward(result.total_loss) for gradients.
template <typename S>
ForwardResult<S> forward_train(Graph<S>& g, Model<S>& model,
                               const EncodedSample& sample, bool training,
                               Rng* dropout_rng) {
  const HeadConfig& hc = model.head_config;
  if (sample.phoneme_id < 0) {
    throw DataError("training sample lacks a phoneme label id");
  }
  if (hc.trains_pos() && sample.pos_id < 0) {
    throw DataError("training sample lacks a POS tag id");
  }

  EncodeMode mode;
  mode.training = training;
  mode.dropout_rate = model.encoder_config.dropout_rate;
  mode.rng = dropout_rng;
  auto hidden = encode_graph(g, model.encoder, model.encoder_config,
                             sample.token_ids, mode);
  auto target = extract_target(g, hidden, sample.target_position);

  auto ph_logits =
      projection_graph(g, model.head.ph_weights, model.head.ph_biases, target);

  std::vector<std::uint8_t> mask = sample.candidate_mask;
  if (!hc.use_hard_mask) mask.assign(mask.size(), std::uint8_t{1});

  ForwardResult<S> result;
  typename Graph<S>::NodeRef ph_loss_node{-1};
  if (hc.use_soft_weights) {
    TargetContext ctx{sample.char_id, sample.pos_id};
    auto ws = soft_weights_graph(g, model.head, hc, ctx);
    ph_loss_node = g.weighted_ce(ph_logits, ws, mask, sample.phoneme_id);
    Mat<S> wc = conditional_weights(g.value(ws), mask);
    result.phoneme_probs = weighted_softmax(g.value(ph_logits), wc).probs;
  } else {
    ph_loss_node = g.weighted_ce(ph_logits, std::nullopt, mask, sample.phoneme_id);
    Mat<S> wc(1, static_cast<Eigen::Index>(mask.size()));
    for (Eigen::Index i = 0; i < wc.cols(); ++i) {
      wc(0, i) = mask[static_cast<std::size_t>(i)] ? S(1) : S(0);
    }
    result.phoneme_probs = weighted_softmax(g.value(ph_logits), wc).probs;
  }
  result.phoneme_loss = g.value(ph_loss_node)(0, 0);

  auto total = ph_loss_node;
  if (hc.trains_pos()) {
    auto pos_logit_node = projection_graph(g, model.head.pos_weights,
                                           model.head.pos_biases, target);
    result.pos_probs = plain_softmax(g.value(pos_logit_node));
    auto pos_loss_node = g.softmax_ce(pos_logit_node, sample.pos_id);
    result.pos_loss = g.value(pos_loss_node)(0, 0);
    if (hc.beta > 0.0) {
      total = g.axpy(ph_loss_node, pos_loss_node, static_cast<S>(hc.beta));
    }
  }
  result.total_loss = total;
  result.loss = g.value(total)(0, 0);
  return result;
}

struct PredictOptions {
  // Unknown target characters normally raise LexiconError; with the
  // fallback the full inventory becomes the candidate set instead.
  bool fallback_unrestricted = false;
};

struct Prediction {
  std::string phoneme_label;
  int phoneme_id = -1;
  std::string pos_tag;
  int pos_id = -1;
  // Candidate labels with their weighted-softmax probabilities,
  // inventory order.
  std::vector<std::pair<std::string, double>> distribution;
};

// Inference: encode the window, pick the POS tag by argmax (lowest index
// wins ties), condition the weights on that tag, then argmax the weighted
// softmax over candidates (again lowest index on ties).
template <typename S>
Prediction predict(Model<S>& model, const std::u32string& sentence,
                   std::size_t target_index, const PredictOptions& opts = {}) {
  const HeadConfig& hc = model.head_config;
  EncodeOptions enc_opts;
  enc_opts.fallback_unrestricted = opts.fallback_unrestricted;

  Sample raw;
  raw.sentence = sentence;
  raw.target_index = target_index;
  EncodedSample sample =
      encode_sample(raw, model.vocab, model.lexicon, model.inventory,
                    model.pos_tags, model.data_config, enc_opts);

  Mat<S> hidden =
      encode(model.encoder, model.encoder_config, sample.token_ids);
  Mat<S> target = extract_target(hidden, sample.target_position);

  Prediction pred;
  if (hc.trains_pos()) {
    std::vector<S> probs = plain_softmax(pos_logits(model.head, target));
    int best = 0;
    for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
      if (probs[static_cast<std::size_t>(i)] >
          probs[static_cast<std::size_t>(best)]) {
        best = i;
      }
    }
    pred.pos_id = best;
    pred.pos_tag = model.pos_tags.tag(static_cast<std::size_t>(best));
  }

  std::vector<std::uint8_t> mask = sample.candidate_mask;
  if (!hc.use_hard_mask) mask.assign(mask.size(), std::uint8_t{1});

  Mat<S> logits = phoneme_logits(model.head, target);
  Mat<S> wc;
  if (hc.use_soft_weights) {
    TargetContext ctx{sample.char_id, pred.pos_id};
    wc = conditional_weights(soft_weights(model.head, hc, ctx), mask);
  } else {
    wc.resize(1, static_cast<Eigen::Index>(mask.size()));
    for (Eigen::Index i = 0; i < wc.cols(); ++i) {
      wc(0, i) = mask[static_cast<std::size_t>(i)] ? S(1) : S(0);
    }
  }
  MaskedDistribution<S> dist = weighted_softmax(logits, wc);

  int best = -1;
  for (int i = 0; i < static_cast<int>(dist.probs.size()); ++i) {
    if (dist.probs[static_cast<std::size_t>(i)] <= S(0)) continue;
    if (best < 0 || dist.probs[static_cast<std::size_t>(i)] >
                        dist.probs[static_cast<std::size_t>(best)]) {
      best = i;
    }
    pred.distribution.emplace_back(
        model.inventory.label(static_cast<std::size_t>(i)),
        static_cast<double>(dist.probs[static_cast<std::size_t>(i)]));
  }
  pred.phoneme_id = best;
  pred.phoneme_label = model.inventory.label(static_cast<std::size_t>(best));
  return pred;
}

}  // namespace polyg2p
