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

#include <cmath>
#include <string>
#include <vector>

#include "polyg2p/autodiff.hpp"
#include "polyg2p/common.hpp"
#include "polyg2p/tensor.hpp"

namespace polyg2p {

struct EncoderConfig {
  std::size_t num_layers = 2;
  std::size_t hidden_size = 64;
  std::size_t num_heads = 2;
  std::size_t ff_size = 128;
  std::size_t max_positions = 64;
  double dropout_rate = 0.1;

  std::size_t head_size() const { return hidden_size / num_heads; }

  void validate() const {
    if (num_layers == 0 || hidden_size == 0 || num_heads == 0 || ff_size == 0 ||
        max_positions == 0) {
      throw ConfigError("encoder sizes must be positive");
    }
    if (hidden_size % num_heads != 0) {
      throw ConfigError("hidden_size must be divisible by num_heads");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
      throw ConfigError("dropout_rate must be in [0, 1)");
    }
  }
};

template <typename S>
struct EncoderLayerParams {
  Param<S> wq, wk, wv, wo;        // hidden x hidden
  Param<S> bq, bk, bv, bo;        // 1 x hidden
  Param<S> ln1_gamma, ln1_beta;   // 1 x hidden
  Param<S> ffn_w1, ffn_b1;        // hidden x ff, 1 x ff
  Param<S> ffn_w2, ffn_b2;        // ff x hidden, 1 x hidden
  Param<S> ln2_gamma, ln2_beta;
};

template <typename S>
struct EncoderParams {
  Param<S> token_embedding;     // vocab x hidden
  Param<S> position_embedding;  // max_positions x hidden
  std::vector<EncoderLayerParams<S>> layers;

  void collect(std::vector<Param<S>*>* out) {
    out->push_back(&token_embedding);
    out->push_back(&position_embedding);
    for (auto& layer : layers) {
      for (Param<S>* p :
           {&layer.wq, &layer.bq, &layer.wk, &layer.bk, &layer.wv, &layer.bv,
            &layer.wo, &layer.bo, &layer.ln1_gamma, &layer.ln1_beta,
            &layer.ffn_w1, &layer.ffn_b1, &layer.ffn_w2, &layer.ffn_b2,
            &layer.ln2_gamma, &layer.ln2_beta}) {
        out->push_back(p);
      }
    }
  }
};

// Truncated-normal(0.02) embeddings and projections, unit layer-norm scales.
template <typename S>
EncoderParams<S> init_encoder(const EncoderConfig& cfg, std::size_t vocab_size,
                              Rng& rng) {
  cfg.validate();
  const auto d = static_cast<Eigen::Index>(cfg.hidden_size);
  const auto ff = static_cast<Eigen::Index>(cfg.ff_size);

  EncoderParams<S> params;
  params.token_embedding = Param<S>("encoder.token_embedding",
                                    static_cast<Eigen::Index>(vocab_size), d);
  fill_truncated_normal(params.token_embedding.value, rng, 0.02);
  params.position_embedding =
      Param<S>("encoder.position_embedding",
               static_cast<Eigen::Index>(cfg.max_positions), d);
  fill_truncated_normal(params.position_embedding.value, rng, 0.02);

  params.layers.resize(cfg.num_layers);
  for (std::size_t i = 0; i < cfg.num_layers; ++i) {
    auto& layer = params.layers[i];
    const std::string prefix = "encoder.layer" + std::to_string(i) + ".";
    auto proj = [&](Param<S>* p, const char* name, Eigen::Index rows,
                    Eigen::Index cols) {
      *p = Param<S>(prefix + name, rows, cols);
      fill_truncated_normal(p->value, rng, 0.02);
    };
    auto zeros = [&](Param<S>* p, const char* name, Eigen::Index cols) {
      *p = Param<S>(prefix + name, 1, cols);
    };
    proj(&layer.wq, "attn.wq", d, d);
    proj(&layer.wk, "attn.wk", d, d);
    proj(&layer.wv, "attn.wv", d, d);
    proj(&layer.wo, "attn.wo", d, d);
    zeros(&layer.bq, "attn.bq", d);
    zeros(&layer.bk, "attn.bk", d);
    zeros(&layer.bv, "attn.bv", d);
    zeros(&layer.bo, "attn.bo", d);
    layer.ln1_gamma = Param<S>(prefix + "ln1.gamma", 1, d);
    layer.ln1_gamma.value.setOnes();
    zeros(&layer.ln1_beta, "ln1.beta", d);
    proj(&layer.ffn_w1, "ffn.w1", d, ff);
    zeros(&layer.ffn_b1, "ffn.b1", ff);
    proj(&layer.ffn_w2, "ffn.w2", ff, d);
    zeros(&layer.ffn_b2, "ffn.b2", d);
    layer.ln2_gamma = Param<S>(prefix + "ln2.gamma", 1, d);
    layer.ln2_gamma.value.setOnes();
    zeros(&layer.ln2_beta, "ln2.beta", d);
  }
  return params;
}

struct EncodeMode {
  bool training = false;
  double dropout_rate = 0.0;
  Rng* rng = nullptr;
};

// Pre-norm transformer encoder: token+position embeddings, then per block
//   x += attention(layer_norm(x));  x += feed_forward(layer_norm(x))
// No final layer norm, so zeroed projections leave the embeddings untouched.
template <typename S>
typename Graph<S>::NodeRef encode_graph(Graph<S>& g, EncoderParams<S>& params,
                                        const EncoderConfig& cfg,
                                        const std::vector<int>& token_ids,
                                        const EncodeMode& mode = {}) {
  if (token_ids.empty()) throw DataError("encode: empty token sequence");
  if (token_ids.size() > cfg.max_positions) {
    throw DataError("encode: sequence length " +
                    std::to_string(token_ids.size()) +
                    " exceeds max_positions " +
                    std::to_string(cfg.max_positions));
  }
  for (int id : token_ids) {
    if (id < 0 || id >= params.token_embedding.value.rows()) {
      throw DataError("encode: token id out of range: " + std::to_string(id));
    }
  }
  const bool drop = mode.training && mode.dropout_rate > 0.0;
  if (drop && mode.rng == nullptr) {
    throw std::invalid_argument("encode: dropout requires an rng");
  }

  std::vector<int> positions(token_ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    positions[i] = static_cast<int>(i);
  }

  auto x = g.add(g.gather(params.token_embedding, token_ids),
                 g.gather(params.position_embedding, positions));
  if (drop) x = g.dropout(x, mode.dropout_rate, *mode.rng);

  const auto head_size = static_cast<Eigen::Index>(cfg.head_size());
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(head_size)));

  for (auto& layer : params.layers) {
    auto normed =
        g.layer_norm(x, g.leaf(layer.ln1_gamma), g.leaf(layer.ln1_beta));
    auto q = g.add_bias(g.matmul(normed, g.leaf(layer.wq)), g.leaf(layer.bq));
    auto k = g.add_bias(g.matmul(normed, g.leaf(layer.wk)), g.leaf(layer.bk));
    auto v = g.add_bias(g.matmul(normed, g.leaf(layer.wv)), g.leaf(layer.bv));

    std::vector<typename Graph<S>::NodeRef> heads;
    heads.reserve(cfg.num_heads);
    for (std::size_t h = 0; h < cfg.num_heads; ++h) {
      const Eigen::Index begin = static_cast<Eigen::Index>(h) * head_size;
      auto qh = g.slice_cols(q, begin, head_size);
      auto kh = g.slice_cols(k, begin, head_size);
      auto vh = g.slice_cols(v, begin, head_size);
      auto attn = g.row_softmax(g.mul_scalar(g.matmul_nt(qh, kh), scale));
      heads.push_back(g.matmul(attn, vh));
    }
    auto context = cfg.num_heads == 1 ? heads[0] : g.concat_cols(heads);
    auto attn_out =
        g.add_bias(g.matmul(context, g.leaf(layer.wo)), g.leaf(layer.bo));
    if (drop) attn_out = g.dropout(attn_out, mode.dropout_rate, *mode.rng);
    x = g.add(x, attn_out);

    auto normed2 =
        g.layer_norm(x, g.leaf(layer.ln2_gamma), g.leaf(layer.ln2_beta));
    auto ff = g.add_bias(
        g.matmul(g.gelu(g.add_bias(g.matmul(normed2, g.leaf(layer.ffn_w1)),
                                   g.leaf(layer.ffn_b1))),
                 g.leaf(layer.ffn_w2)),
        g.leaf(layer.ffn_b2));
    if (drop) ff = g.dropout(ff, mode.dropout_rate, *mode.rng);
    x = g.add(x, ff);
  }
  return x;
}

// Inference convenience: hidden states as a plain matrix.
template <typename S>
Mat<S> encode(EncoderParams<S>& params, const EncoderConfig& cfg,
              const std::vector<int>& token_ids) {
  Graph<S> g;
  return g.value(encode_graph(g, params, cfg, token_ids));
}

// The contextual embedding of the target character: the top-layer hidden
// state at target_position. Positions 0 and last (CLS/SEP) are not targets.
template <typename S>
typename Graph<S>::NodeRef extract_target(Graph<S>& g,
                                          typename Graph<S>::NodeRef hidden,
                                          int target_position) {
  const Eigen::Index rows = g.value(hidden).rows();
  if (target_position < 1 || target_position > rows - 2) {
    throw DataError("target position out of range: " +
                    std::to_string(target_position));
  }
  return g.select_row(hidden, target_position);
}

template <typename S>
Mat<S> extract_target(const Mat<S>& hidden_states, int target_position) {
  if (target_position < 1 || target_position > hidden_states.rows() - 2) {
    throw DataError("target position out of range: " +
                    std::to_string(target_position));
  }
  return hidden_states.row(target_position);
}

}  // namespace polyg2p
