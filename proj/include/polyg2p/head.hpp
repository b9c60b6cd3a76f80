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
//
// Phoneme classification head. Full-inventory logits are reweighted by
// conditional weights before the softmax: a hard candidate mask zeroes
// phonemes the target character cannot produce, and a learnable soft
// weight (embeddings of the target character, its POS tag, and their
// cross product, squashed through a sigmoid) grades the survivors.

#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyg2p/autodiff.hpp"
#include "polyg2p/common.hpp"
#include "polyg2p/tensor.hpp"

namespace polyg2p {

struct HeadConfig {
  int alpha_cross = 1;   // cross char/POS embedding term on
  int alpha_char = 1;    // character embedding term on
  int alpha_pos = 0;     // POS embedding term on
  double beta = 0.1;     // weight of the auxiliary POS loss
  bool use_hard_mask = true;
  bool use_soft_weights = true;
  std::size_t proj_depth = 1;
  std::size_t num_phonemes = 0;  // filled when the model is built
  std::size_t num_pos = 11;
  std::size_t hidden_size = 0;

  bool needs_pos_context() const {
    return use_soft_weights && (alpha_cross != 0 || alpha_pos != 0);
  }
  bool trains_pos() const { return beta > 0.0 || needs_pos_context(); }

  void validate() const {
    for (int a : {alpha_cross, alpha_char, alpha_pos}) {
      if (a != 0 && a != 1) throw ConfigError("alpha flags must be 0 or 1");
    }
    if (beta < 0.0) throw ConfigError("beta must be nonnegative");
    if (proj_depth == 0) throw ConfigError("proj_depth must be positive");
    if (num_phonemes == 0) throw ConfigError("head has no phonemes");
    if (num_pos == 0) throw ConfigError("head has no POS tags");
    if (hidden_size == 0) throw ConfigError("head hidden_size unset");
  }
};

template <typename S>
struct HeadParams {
  // Projection chains from the target hidden state; GELU between layers.
  std::vector<Param<S>> ph_weights, ph_biases;
  std::vector<Param<S>> pos_weights, pos_biases;
  // Soft weight embedding tables, all mapping into phoneme space.
  Param<S> e_char;   // polyphonic chars x n
  Param<S> e_pos;    // num_pos x n
  Param<S> e_cross;  // (polyphonic chars * num_pos) x n
  Param<S> cw_bias;  // 1 x n

  void collect(std::vector<Param<S>*>* out) {
    for (std::size_t i = 0; i < ph_weights.size(); ++i) {
      out->push_back(&ph_weights[i]);
      out->push_back(&ph_biases[i]);
    }
    for (std::size_t i = 0; i < pos_weights.size(); ++i) {
      out->push_back(&pos_weights[i]);
      out->push_back(&pos_biases[i]);
    }
    out->push_back(&e_char);
    out->push_back(&e_pos);
    out->push_back(&e_cross);
    out->push_back(&cw_bias);
  }
};

// Projections start truncated-normal(0.02); the weight tables and bias start
// at zero, so an untrained head grades all candidates equally (sigmoid(0)).
template <typename S>
HeadParams<S> init_head(const HeadConfig& cfg, std::size_t num_chars,
                        Rng& rng) {
  cfg.validate();
  if (num_chars == 0) throw ConfigError("head has no polyphonic characters");
  const auto d = static_cast<Eigen::Index>(cfg.hidden_size);
  const auto n = static_cast<Eigen::Index>(cfg.num_phonemes);
  const auto p = static_cast<Eigen::Index>(cfg.num_pos);

  HeadParams<S> params;
  auto build_chain = [&](std::vector<Param<S>>* ws, std::vector<Param<S>>* bs,
                         const std::string& prefix, Eigen::Index out_dim) {
    for (std::size_t i = 0; i < cfg.proj_depth; ++i) {
      const bool last = i + 1 == cfg.proj_depth;
      const Eigen::Index cols = last ? out_dim : d;
      const std::string tag = prefix + std::to_string(i);
      ws->emplace_back(tag + ".weight", d, cols);
      fill_truncated_normal(ws->back().value, rng, 0.02);
      bs->emplace_back(tag + ".bias", 1, cols);
    }
  };
  build_chain(&params.ph_weights, &params.ph_biases, "head.phoneme_proj", n);
  build_chain(&params.pos_weights, &params.pos_biases, "head.pos_proj", p);

  params.e_char = Param<S>("head.e_char", static_cast<Eigen::Index>(num_chars), n);
  params.e_pos = Param<S>("head.e_pos", p, n);
  params.e_cross =
      Param<S>("head.e_cross", static_cast<Eigen::Index>(num_chars) * p, n);
  params.cw_bias = Param<S>("head.cw_bias", 1, n);
  return params;
}

// Identity of the target at classification time. char_id < 0 means the
// character is unknown to the model; char-dependent weight terms then
// contribute nothing.
struct TargetContext {
  int char_id = -1;
  int pos_id = -1;
};

inline int cross_index(const HeadConfig& cfg, const TargetContext& ctx) {
  return ctx.char_id * static_cast<int>(cfg.num_pos) + ctx.pos_id;
}

namespace detail {
inline void check_pos(const HeadConfig& cfg, const TargetContext& ctx) {
  if (ctx.pos_id < 0 || ctx.pos_id >= static_cast<int>(cfg.num_pos)) {
    throw std::invalid_argument("soft weights need a valid POS id");
  }
}
}  // namespace detail

// w_s = alpha_cross * E_cross[char, pos] + alpha_char * E_char[char]
//     + alpha_pos * E_pos[pos] + b
template <typename S>
Mat<S> soft_weights(const HeadParams<S>& params, const HeadConfig& cfg,
                    const TargetContext& ctx) {
  Mat<S> ws = params.cw_bias.value;
  const bool have_char = ctx.char_id >= 0;
  if (have_char && ctx.char_id >= params.e_char.value.rows()) {
    throw std::invalid_argument("soft weights: char id out of range");
  }
  if (cfg.alpha_cross != 0 && have_char) {
    detail::check_pos(cfg, ctx);
    ws += params.e_cross.value.row(cross_index(cfg, ctx));
  }
  if (cfg.alpha_char != 0 && have_char) {
    ws += params.e_char.value.row(ctx.char_id);
  }
  if (cfg.alpha_pos != 0) {
    detail::check_pos(cfg, ctx);
    ws += params.e_pos.value.row(ctx.pos_id);
  }
  return ws;
}

// w_c = w_hard ⊙ sigmoid(w_soft), elementwise over the inventory.
template <typename S>
Mat<S> conditional_weights(const Mat<S>& ws,
                           const std::vector<std::uint8_t>& mask) {
  if (ws.rows() != 1 || ws.cols() != static_cast<Eigen::Index>(mask.size())) {
    throw std::invalid_argument("conditional weights: size mismatch");
  }
  Mat<S> wc(1, ws.cols());
  for (Eigen::Index i = 0; i < ws.cols(); ++i) {
    wc(0, i) = mask[static_cast<std::size_t>(i)]
                   ? stable_sigmoid(ws(0, i))
                   : S(0);
  }
  return wc;
}

template <typename S>
struct MaskedDistribution {
  std::vector<S> probs;      // zero off support
  std::vector<S> log_probs;  // -inf off support
};

// y_i = w_i exp(z_i) / sum_j w_j exp(z_j), computed in log space. Weights
// must be nonnegative with at least one positive entry.
template <typename S>
MaskedDistribution<S> weighted_softmax(const Mat<S>& logits,
                                       const Mat<S>& weights) {
  if (logits.rows() != 1 || weights.rows() != 1 ||
      logits.cols() != weights.cols()) {
    throw std::invalid_argument("weighted softmax: size mismatch");
  }
  const Eigen::Index n = logits.cols();
  constexpr S kNegInf = -std::numeric_limits<S>::infinity();
  std::vector<S> z(static_cast<std::size_t>(n), kNegInf);
  S zmax = kNegInf;
  bool any = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const S w = weights(0, i);
    if (w < S(0)) {
      throw std::invalid_argument("weighted softmax: negative weight");
    }
    if (w > S(0)) {
      any = true;
      z[static_cast<std::size_t>(i)] =
          logits(0, i) + std::log(w);
      zmax = std::max(zmax, z[static_cast<std::size_t>(i)]);
    }
  }
  if (!any) throw DataError("weighted softmax: all weights zero");

  S denom = S(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S zi = z[static_cast<std::size_t>(i)];
    if (zi != kNegInf) denom += std::exp(zi - zmax);
  }
  const S lse = zmax + std::log(denom);

  MaskedDistribution<S> dist;
  dist.probs.assign(static_cast<std::size_t>(n), S(0));
  dist.log_probs.assign(static_cast<std::size_t>(n), kNegInf);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S zi = z[static_cast<std::size_t>(i)];
    if (zi == kNegInf) continue;
    dist.log_probs[static_cast<std::size_t>(i)] = zi - lse;
    dist.probs[static_cast<std::size_t>(i)] = std::exp(zi - lse);
  }
  return dist;
}

// Cross entropy against the gold phoneme: -log y_gold.
template <typename S>
S phoneme_loss(const MaskedDistribution<S>& dist, int gold) {
  if (gold < 0 || gold >= static_cast<int>(dist.log_probs.size())) {
    throw std::invalid_argument("phoneme loss: gold id out of range");
  }
  const S lp = dist.log_probs[static_cast<std::size_t>(gold)];
  if (lp == -std::numeric_limits<S>::infinity()) {
    throw DataError("gold phoneme outside candidate support");
  }
  return -lp;
}

// Affine chain with GELU between layers; shared by both head branches.
template <typename S>
Mat<S> apply_projection(const std::vector<Param<S>>& weights,
                        const std::vector<Param<S>>& biases,
                        const Mat<S>& input) {
  Mat<S> x = input;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    Mat<S> y = x * weights[i].value;
    y.row(0) += biases[i].value.row(0);
    if (i + 1 < weights.size()) {
      for (Eigen::Index c = 0; c < y.cols(); ++c) {
        y(0, c) = gelu_scalar(y(0, c));
      }
    }
    x = std::move(y);
  }
  return x;
}

template <typename S>
Mat<S> phoneme_logits(const HeadParams<S>& params, const Mat<S>& target_state) {
  return apply_projection(params.ph_weights, params.ph_biases, target_state);
}

template <typename S>
Mat<S> pos_logits(const HeadParams<S>& params, const Mat<S>& target_state) {
  return apply_projection(params.pos_weights, params.pos_biases, target_state);
}

template <typename S>
std::vector<S> plain_softmax(const Mat<S>& logits) {
  const Eigen::Index n = logits.cols();
  const S m = logits.row(0).maxCoeff();
  S denom = S(0);
  std::vector<S> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = std::exp(logits(0, i) - m);
    denom += out[static_cast<std::size_t>(i)];
  }
  for (auto& v : out) v /= denom;
  return out;
}

template <typename S>
S pos_loss(const std::vector<S>& pos_probs, int gold) {
  if (gold < 0 || gold >= static_cast<int>(pos_probs.size())) {
    throw std::invalid_argument("pos loss: gold id out of range");
  }
  return -std::log(pos_probs[static_cast<std::size_t>(gold)]);
}

// Graph node for w_s; mirrors soft_weights term for term.
template <typename S>
typename Graph<S>::NodeRef soft_weights_graph(Graph<S>& g, HeadParams<S>& params,
                                              const HeadConfig& cfg,
                                              const TargetContext& ctx) {
  auto ws = g.leaf(params.cw_bias);
  const bool have_char = ctx.char_id >= 0;
  if (cfg.alpha_cross != 0 && have_char) {
    detail::check_pos(cfg, ctx);
    ws = g.add(ws, g.gather(params.e_cross, {cross_index(cfg, ctx)}));
  }
  if (cfg.alpha_char != 0 && have_char) {
    ws = g.add(ws, g.gather(params.e_char, {ctx.char_id}));
  }
  if (cfg.alpha_pos != 0) {
    detail::check_pos(cfg, ctx);
    ws = g.add(ws, g.gather(params.e_pos, {ctx.pos_id}));
  }
  return ws;
}

template <typename S>
typename Graph<S>::NodeRef projection_graph(Graph<S>& g,
                                            std::vector<Param<S>>& weights,
                                            std::vector<Param<S>>& biases,
                                            typename Graph<S>::NodeRef input) {
  auto x = input;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    x = g.add_bias(g.matmul(x, g.leaf(weights[i])), g.leaf(biases[i]));
    if (i + 1 < weights.size()) x = g.gelu(x);
  }
  return x;
}

}  // namespace polyg2p
