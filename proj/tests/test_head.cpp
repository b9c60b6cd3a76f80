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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracle.hpp"
#include "polyg2p/head.hpp"

using namespace polyg2p;

namespace {

constexpr std::size_t kChars = 3;
constexpr std::size_t kPos = 4;
constexpr std::size_t kPhonemes = 6;

HeadConfig small_config() {
  HeadConfig cfg;
  cfg.num_phonemes = kPhonemes;
  cfg.num_pos = kPos;
  cfg.hidden_size = 8;
  return cfg;
}

HeadParams<double> random_head(const HeadConfig& cfg, Rng& rng) {
  auto params = init_head<double>(cfg, kChars, rng);
  fill_truncated_normal(params.e_char.value, rng, 1.0);
  fill_truncated_normal(params.e_pos.value, rng, 1.0);
  fill_truncated_normal(params.e_cross.value, rng, 1.0);
  fill_truncated_normal(params.cw_bias.value, rng, 1.0);
  return params;
}

std::vector<std::vector<double>> table_of(const Mat<double>& m) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      rows[static_cast<std::size_t>(r)].push_back(m(r, c));
    }
  }
  return rows;
}

std::vector<double> row_of(const Mat<double>& m) {
  std::vector<double> v;
  for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(0, c));
  return v;
}

Mat<double> row_matrix(const std::vector<double>& v) {
  Mat<double> m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    m(0, static_cast<Eigen::Index>(i)) = v[i];
  }
  return m;
}

}  // namespace

TEST_CASE("soft weights match the entry-wise oracle for every alpha combo") {
  HeadConfig cfg = small_config();
  Rng rng(31);
  auto params = random_head(cfg, rng);
  const auto e_cross = table_of(params.e_cross.value);
  const auto e_char = table_of(params.e_char.value);
  const auto e_pos = table_of(params.e_pos.value);
  const auto bias = row_of(params.cw_bias.value);

  for (int a_cross : {0, 1}) {
    for (int a_char : {0, 1}) {
      for (int a_pos : {0, 1}) {
        cfg.alpha_cross = a_cross;
        cfg.alpha_char = a_char;
        cfg.alpha_pos = a_pos;
        for (int trial = 0; trial < 125; ++trial) {
          TargetContext ctx;
          ctx.char_id = static_cast<int>(rng.below(kChars));
          ctx.pos_id = static_cast<int>(rng.below(kPos));
          const Mat<double> ws = soft_weights(params, cfg, ctx);
          const std::vector<double> expect =
              oracle::soft_weights(e_cross, e_char, e_pos, bias, a_cross,
                                   a_char, a_pos, ctx.char_id, ctx.pos_id,
                                   kPos);
          for (std::size_t i = 0; i < kPhonemes; ++i) {
            CHECK(ws(0, static_cast<Eigen::Index>(i)) ==
                  doctest::Approx(expect[i]).epsilon(1e-12));
          }
        }
      }
    }
  }
}

TEST_CASE("untrained tables grade every candidate 0.5") {
  HeadConfig cfg = small_config();
  Rng rng(32);
  auto params = init_head<double>(cfg, kChars, rng);
  TargetContext ctx{1, 2};
  Mat<double> ws = soft_weights(params, cfg, ctx);
  CHECK(ws.cwiseAbs().maxCoeff() == 0.0);
  Mat<double> wc = conditional_weights(ws, std::vector<std::uint8_t>(kPhonemes, 1));
  for (Eigen::Index i = 0; i < wc.cols(); ++i) {
    CHECK(wc(0, i) == 0.5);
  }
}

TEST_CASE("with all alphas off the soft weight is the bias alone") {
  HeadConfig cfg = small_config();
  cfg.alpha_cross = 0;
  cfg.alpha_char = 0;
  cfg.alpha_pos = 0;
  Rng rng(33);
  auto params = random_head(cfg, rng);
  Mat<double> a = soft_weights(params, cfg, TargetContext{0, 0});
  Mat<double> b = soft_weights(params, cfg, TargetContext{2, 3});
  CHECK((a - params.cw_bias.value).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unknown characters drop the char-dependent terms") {
  HeadConfig cfg = small_config();
  Rng rng(34);
  auto params = random_head(cfg, rng);

  // alphas (1,1,0): both remaining terms need the char, so bias survives.
  TargetContext unknown{-1, -1};
  Mat<double> ws = soft_weights(params, cfg, unknown);
  CHECK((ws - params.cw_bias.value).cwiseAbs().maxCoeff() == 0.0);

  // The POS-only term still applies when enabled.
  cfg.alpha_pos = 1;
  unknown.pos_id = 2;
  Mat<double> with_pos = soft_weights(params, cfg, unknown);
  Mat<double> expect = params.cw_bias.value + params.e_pos.value.row(2);
  CHECK((with_pos - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("soft weight context validation") {
  HeadConfig cfg = small_config();
  Rng rng(35);
  auto params = random_head(cfg, rng);
  CHECK_THROWS_AS((void)soft_weights(params, cfg, TargetContext{7, 0}),
                  std::invalid_argument);
  // alpha_cross needs a POS id once the char is known.
  CHECK_THROWS_AS((void)soft_weights(params, cfg, TargetContext{1, -1}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)soft_weights(params, cfg, TargetContext{1, 4}),
                  std::invalid_argument);
}

TEST_CASE("sigmoid fixture: w_s = (2, -2)") {
  Mat<double> ws = row_matrix({2.0, -2.0});
  Mat<double> wc = conditional_weights(ws, {1, 1});
  CHECK(wc(0, 0) == doctest::Approx(0.8807970779778823).epsilon(1e-12));
  CHECK(wc(0, 1) == doctest::Approx(0.1192029220221176).epsilon(1e-12));
  CHECK(wc(0, 0) + wc(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hard mask annihilates soft weights elementwise") {
  Rng rng(36);
  for (int trial = 0; trial < 200; ++trial) {
    Mat<double> ws(1, 5);
    std::vector<std::uint8_t> mask(5);
    for (Eigen::Index i = 0; i < 5; ++i) {
      ws(0, i) = 10.0 * (rng.uniform() - 0.5);
      mask[static_cast<std::size_t>(i)] = rng.uniform() < 0.5 ? 0 : 1;
    }
    Mat<double> wc = conditional_weights(ws, mask);
    for (Eigen::Index i = 0; i < 5; ++i) {
      if (mask[static_cast<std::size_t>(i)]) {
        CHECK(wc(0, i) ==
              doctest::Approx(oracle::sigmoid(ws(0, i))).epsilon(1e-12));
      } else {
        CHECK(wc(0, i) == 0.0);
      }
    }
  }
  CHECK_THROWS_AS(
      (void)conditional_weights(Mat<double>(Mat<double>::Zero(1, 5)),
                                std::vector<std::uint8_t>(4, 1)),
      std::invalid_argument);
}

TEST_CASE("weighted softmax fixture: weights (1/2, 1/2), logits (ln 2, 0)") {
  auto dist = weighted_softmax(row_matrix({std::log(2.0), 0.0}),
                               row_matrix({0.5, 0.5}));
  CHECK(dist.probs[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(dist.probs[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("uniform weights over k candidates cost ln k") {
  auto dist = weighted_softmax(Mat<double>(Mat<double>::Zero(1, 4)),
                               Mat<double>(Mat<double>::Ones(1, 4)));
  for (double p : dist.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(phoneme_loss(dist, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("a dominant logit drives the loss to zero") {
  auto dist = weighted_softmax(row_matrix({30.0, 0.0}), row_matrix({1.0, 1.0}));
  CHECK(phoneme_loss(dist, 0) < 1e-12);
  CHECK(dist.probs[0] > 1.0 - 1e-12);
}

TEST_CASE("weighted softmax matches the ratio-form oracle") {
  Rng rng(37);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    Mat<double> logits(1, static_cast<Eigen::Index>(n));
    Mat<double> weights(1, static_cast<Eigen::Index>(n));
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      logits(0, static_cast<Eigen::Index>(i)) = 6.0 * (rng.uniform() - 0.5);
      const bool on = rng.uniform() < 0.7;
      weights(0, static_cast<Eigen::Index>(i)) = on ? rng.uniform() + 0.01 : 0.0;
      any = any || on;
    }
    if (!any) weights(0, 0) = 0.5;
    auto dist = weighted_softmax(logits, weights);
    const auto expect =
        oracle::weighted_softmax(row_of(logits), row_of(weights));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(dist.probs[i] == doctest::Approx(expect[i]).epsilon(1e-12));
      if (weights(0, static_cast<Eigen::Index>(i)) == 0.0) {
        CHECK(dist.probs[i] == 0.0);
        CHECK(dist.log_probs[i] == -std::numeric_limits<double>::infinity());
      } else {
        CHECK(std::exp(dist.log_probs[i]) ==
              doctest::Approx(dist.probs[i]).epsilon(1e-12));
      }
      sum += dist.probs[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("weighted softmax is invariant to weight scale and logit shift") {
  Rng rng(38);
  for (int trial = 0; trial < 200; ++trial) {
    Mat<double> logits(1, 5);
    Mat<double> weights(1, 5);
    for (Eigen::Index i = 0; i < 5; ++i) {
      logits(0, i) = 8.0 * (rng.uniform() - 0.5);
      weights(0, i) = i == 2 ? 0.0 : rng.uniform() + 0.05;
    }
    auto base = weighted_softmax(logits, weights);
    auto scaled = weighted_softmax(logits, Mat<double>(weights * 37.5));
    Mat<double> shifted = logits;
    shifted.array() += 123.0;
    auto moved = weighted_softmax(shifted, weights);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(scaled.probs[i] == doctest::Approx(base.probs[i]).epsilon(1e-9));
      CHECK(moved.probs[i] == doctest::Approx(base.probs[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("equal weights reduce the weighted softmax to a masked softmax") {
  Rng rng(39);
  Mat<double> logits(1, 6);
  for (Eigen::Index i = 0; i < 6; ++i) {
    logits(0, i) = 4.0 * (rng.uniform() - 0.5);
  }
  Mat<double> weights = row_matrix({0.3, 0.0, 0.3, 0.3, 0.0, 0.3});
  auto dist = weighted_softmax(logits, weights);

  // Plain softmax over the support indices only.
  std::vector<std::size_t> support = {0, 2, 3, 5};
  double denom = 0.0;
  for (std::size_t i : support) {
    denom += std::exp(logits(0, static_cast<Eigen::Index>(i)));
  }
  for (std::size_t i : support) {
    CHECK(dist.probs[i] ==
          doctest::Approx(std::exp(logits(0, static_cast<Eigen::Index>(i))) /
                          denom)
              .epsilon(1e-12));
  }
}

TEST_CASE("weighted softmax argmax agrees with the reweighted logits") {
  Rng rng(40);
  for (int trial = 0; trial < 300; ++trial) {
    Mat<double> logits(1, 7);
    Mat<double> weights(1, 7);
    for (Eigen::Index i = 0; i < 7; ++i) {
      logits(0, i) = 5.0 * (rng.uniform() - 0.5);
      weights(0, i) = rng.uniform() < 0.4 ? 0.0 : rng.uniform() + 0.01;
    }
    weights(0, 3) = 0.5;  // keep the support non-empty
    auto dist = weighted_softmax(logits, weights);
    std::size_t best = 0;
    double best_z = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < 7; ++i) {
      if (weights(0, i) == 0.0) continue;
      const double zi = logits(0, i) + std::log(weights(0, i));
      if (zi > best_z) {
        best_z = zi;
        best = static_cast<std::size_t>(i);
      }
    }
    std::size_t arg = 0;
    for (std::size_t i = 1; i < 7; ++i) {
      if (dist.probs[i] > dist.probs[arg]) arg = i;
    }
    CHECK(arg == best);
  }
}

TEST_CASE("weighted softmax error taxonomy") {
  Mat<double> logits = Mat<double>::Zero(1, 3);
  CHECK_THROWS_WITH_AS(
      (void)weighted_softmax(logits, Mat<double>(Mat<double>::Zero(1, 3))),
      "weighted softmax: all weights zero", DataError);
  CHECK_THROWS_AS((void)weighted_softmax(logits, row_matrix({1.0, -0.1, 0.2})),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      (void)weighted_softmax(logits, Mat<double>(Mat<double>::Ones(1, 4))),
      std::invalid_argument);

  auto dist = weighted_softmax(logits, row_matrix({1.0, 0.0, 1.0}));
  CHECK_THROWS_WITH_AS((void)phoneme_loss(dist, 1),
                       "gold phoneme outside candidate support", DataError);
  CHECK_THROWS_AS((void)phoneme_loss(dist, 3), std::invalid_argument);
  CHECK_THROWS_AS((void)phoneme_loss(dist, -1), std::invalid_argument);
}

TEST_CASE("graph soft weights mirror the plain computation") {
  HeadConfig cfg = small_config();
  Rng rng(41);
  auto params = random_head(cfg, rng);
  for (int a_cross : {0, 1}) {
    for (int a_char : {0, 1}) {
      for (int a_pos : {0, 1}) {
        cfg.alpha_cross = a_cross;
        cfg.alpha_char = a_char;
        cfg.alpha_pos = a_pos;
        TargetContext ctx{2, 1};
        Graph<double> g;
        auto node = soft_weights_graph(g, params, cfg, ctx);
        Mat<double> plain = soft_weights(params, cfg, ctx);
        CHECK((g.value(node) - plain).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }
}

TEST_CASE("graph soft weights route gradient into the selected rows only") {
  HeadConfig cfg = small_config();
  Rng rng(42);
  auto params = random_head(cfg, rng);
  for (Param<double>* p :
       {&params.e_cross, &params.e_char, &params.e_pos, &params.cw_bias}) {
    p->zero_grad();
  }
  TargetContext ctx{1, 3};
  Graph<double> g;
  auto ws = soft_weights_graph(g, params, cfg, ctx);
  g.backward(g.matmul(ws, g.constant(Mat<double>::Ones(kPhonemes, 1))));

  const int cross_row = cross_index(cfg, ctx);
  for (Eigen::Index r = 0; r < params.e_cross.value.rows(); ++r) {
    const double mag = params.e_cross.grad.row(r).cwiseAbs().maxCoeff();
    CHECK(mag == (r == cross_row ? 1.0 : 0.0));
  }
  for (Eigen::Index r = 0; r < params.e_char.value.rows(); ++r) {
    const double mag = params.e_char.grad.row(r).cwiseAbs().maxCoeff();
    CHECK(mag == (r == ctx.char_id ? 1.0 : 0.0));
  }
  // alpha_pos defaults to 0: no gradient reaches the POS table.
  CHECK(params.e_pos.grad.cwiseAbs().maxCoeff() == 0.0);
  CHECK(params.cw_bias.grad.cwiseAbs().maxCoeff() == 1.0);
}

TEST_CASE("projection chain and its graph form agree") {
  HeadConfig cfg = small_config();
  cfg.proj_depth = 2;
  Rng rng(43);
  auto params = init_head<double>(cfg, kChars, rng);
  REQUIRE(params.ph_weights.size() == 2);
  CHECK(params.ph_weights[0].value.cols() ==
        static_cast<Eigen::Index>(cfg.hidden_size));
  CHECK(params.ph_weights[1].value.cols() ==
        static_cast<Eigen::Index>(kPhonemes));

  Mat<double> state(1, static_cast<Eigen::Index>(cfg.hidden_size));
  for (Eigen::Index i = 0; i < state.cols(); ++i) {
    state(0, i) = 0.3 * static_cast<double>(i) - 1.0;
  }
  Mat<double> plain = phoneme_logits(params, state);
  Graph<double> g;
  auto node = projection_graph(g, params.ph_weights, params.ph_biases,
                               g.constant(state));
  CHECK(g.value(node).cols() == static_cast<Eigen::Index>(kPhonemes));
  CHECK((g.value(node) - plain).cwiseAbs().maxCoeff() < 1e-14);

  Mat<double> pos = pos_logits(params, state);
  CHECK(pos.cols() == static_cast<Eigen::Index>(kPos));
  auto probs = plain_softmax(pos);
  double sum = 0.0;
  for (double p : probs) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pos_loss(probs, 0) > 0.0);
  CHECK_THROWS_AS((void)pos_loss(probs, static_cast<int>(kPos)),
                  std::invalid_argument);
}

TEST_CASE("head config mode predicates") {
  HeadConfig cfg = small_config();
  CHECK(cfg.needs_pos_context());  // alpha_cross on
  CHECK(cfg.trains_pos());

  cfg.alpha_cross = 0;
  CHECK_FALSE(cfg.needs_pos_context());  // char-only soft weights
  CHECK(cfg.trains_pos());               // beta still positive

  cfg.beta = 0.0;
  CHECK_FALSE(cfg.trains_pos());

  cfg.alpha_pos = 1;
  CHECK(cfg.needs_pos_context());
  CHECK(cfg.trains_pos());

  cfg.use_soft_weights = false;
  CHECK_FALSE(cfg.needs_pos_context());
  CHECK_FALSE(cfg.trains_pos());
  cfg.beta = 0.1;
  CHECK(cfg.trains_pos());
}

TEST_CASE("head config validation") {
  HeadConfig cfg = small_config();
  cfg.alpha_char = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.beta = -0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.num_phonemes = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.proj_depth = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  Rng rng(44);
  CHECK_THROWS_AS((void)init_head<double>(small_config(), 0, rng), ConfigError);
}

TEST_CASE("init_head shapes and zero tables") {
  HeadConfig cfg = small_config();
  Rng rng(45);
  auto params = init_head<double>(cfg, kChars, rng);
  CHECK(params.e_char.value.rows() == static_cast<Eigen::Index>(kChars));
  CHECK(params.e_char.value.cols() == static_cast<Eigen::Index>(kPhonemes));
  CHECK(params.e_pos.value.rows() == static_cast<Eigen::Index>(kPos));
  CHECK(params.e_cross.value.rows() ==
        static_cast<Eigen::Index>(kChars * kPos));
  CHECK(params.e_char.value.cwiseAbs().maxCoeff() == 0.0);
  CHECK(params.e_pos.value.cwiseAbs().maxCoeff() == 0.0);
  CHECK(params.e_cross.value.cwiseAbs().maxCoeff() == 0.0);
  CHECK(params.cw_bias.value.cwiseAbs().maxCoeff() == 0.0);
  CHECK(params.ph_weights[0].name == "head.phoneme_proj0.weight");
  CHECK(params.pos_biases[0].name == "head.pos_proj0.bias");

  std::vector<Param<double>*> all;
  params.collect(&all);
  CHECK(all.size() == 2 + 2 + 4);
}
