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
#include <limits>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "doctest.h"
#include "polyg2p/synth.hpp"
#include "polyg2p/training.hpp"

using namespace polyg2p;

namespace {

Sample make(const std::u32string& sentence, std::size_t index,
            const std::string& label, const std::string& pos = "") {
  Sample s;
  s.sentence = sentence;
  s.target_index = index;
  s.phoneme_label = label;
  s.pos_tag = pos;
  return s;
}

std::vector<Sample> tiny_corpus(std::size_t count, std::uint64_t seed) {
  SynthSpec spec;
  spec.sample_count = count;
  return make_synthetic_corpus(spec, seed);
}

EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.num_layers = 1;
  cfg.hidden_size = 16;
  cfg.num_heads = 2;
  cfg.ff_size = 32;
  cfg.max_positions = 34;  // window 32 plus CLS/SEP
  cfg.dropout_rate = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("train config validation and the published protocol") {
  TrainConfig tc;
  CHECK_NOTHROW(tc.validate());
  tc.validate_every = tc.max_iterations + 1;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc = TrainConfig{};
  tc.learning_rate = 0.0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc = TrainConfig{};
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc = TrainConfig{};
  tc.adam_beta2 = 1.0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);

  tc = TrainConfig{};
  tc.apply_paper_protocol();
  CHECK(tc.learning_rate == 5e-5);
  CHECK(tc.batch_size == 256);
  CHECK(tc.max_iterations == 10000);
  CHECK(tc.validate_every == 200);
}

TEST_CASE("adam's first step magnitude is close to the learning rate") {
  Param<double> p("p", 1, 2);
  p.value << 5.0, -3.0;
  p.grad << 123.0, -0.5;
  TrainConfig tc;
  tc.learning_rate = 0.01;
  AdamOptimizer<double> opt({&p}, tc);
  opt.step();
  CHECK(opt.steps() == 1);
  // Adam normalizes by the gradient magnitude, so step one moves by ~lr
  // regardless of gradient scale, in the direction opposite the gradient.
  CHECK(5.0 - p.value(0, 0) == doctest::Approx(0.01).epsilon(1e-3));
  CHECK(p.value(0, 1) - (-3.0) == doctest::Approx(0.01).epsilon(1e-3));
}

TEST_CASE("a small model overfits a rule-driven corpus and keeps the best "
          "checkpoint") {
  auto corpus = tiny_corpus(64, 5);
  auto model =
      build_model<float>(corpus, tiny_encoder(), HeadConfig{}, DataConfig{}, 7);
  TrainConfig tc;
  tc.learning_rate = 3e-3;
  tc.batch_size = 16;
  tc.max_iterations = 240;
  tc.validate_every = 40;
  TrainResult result = train(model, corpus, corpus, tc);

  CHECK(result.best_dev_accuracy >= 0.9);
  CHECK(result.history.size() == 6);

  // The returned model is the best checkpoint: rescoring reproduces it.
  EvalReport replay = evaluate(model, corpus);
  CHECK(replay.accuracy == result.best_dev_accuracy);

  // Ties resolve to the earliest validation.
  for (const HistoryRecord& rec : result.history) {
    if (rec.dev_accuracy == result.best_dev_accuracy) {
      CHECK(rec.iteration == result.best_iteration);
      break;
    }
  }
}

TEST_CASE("training is bitwise reproducible for a fixed seed") {
  auto corpus = tiny_corpus(48, 6);
  EncoderConfig enc = tiny_encoder();
  enc.dropout_rate = 0.1;  // exercise the seeded dropout path
  TrainConfig tc;
  tc.batch_size = 16;
  tc.max_iterations = 30;
  tc.validate_every = 10;
  tc.seed = 77;

  auto run = [&]() {
    auto model =
        build_model<float>(corpus, enc, HeadConfig{}, DataConfig{}, 21);
    TrainResult r = train(model, corpus, corpus, tc);
    return std::make_pair(r, model.encoder.token_embedding.value);
  };
  auto [ra, wa] = run();
  auto [rb, wb] = run();

  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].iteration == rb.history[i].iteration);
    CHECK(ra.history[i].mean_train_loss == rb.history[i].mean_train_loss);
    CHECK(ra.history[i].dev_accuracy == rb.history[i].dev_accuracy);
  }
  CHECK(ra.best_iteration == rb.best_iteration);
  CHECK((wa - wb).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("validation schedule follows validate_every exactly") {
  auto corpus = tiny_corpus(32, 7);
  TrainConfig tc;
  tc.batch_size = 8;

  SUBCASE("one validation when validate_every equals max_iterations") {
    tc.max_iterations = 5;
    tc.validate_every = 5;
    auto model = build_model<float>(corpus, tiny_encoder(), HeadConfig{},
                                    DataConfig{}, 3);
    TrainResult r = train(model, corpus, corpus, tc);
    REQUIRE(r.history.size() == 1);
    CHECK(r.history[0].iteration == 5);
  }

  SUBCASE("no validation lands on a non-multiple final iteration") {
    tc.max_iterations = 10;
    tc.validate_every = 3;
    auto model = build_model<float>(corpus, tiny_encoder(), HeadConfig{},
                                    DataConfig{}, 3);
    TrainResult r = train(model, corpus, corpus, tc);
    REQUIRE(r.history.size() == 3);
    CHECK(r.history[0].iteration == 3);
    CHECK(r.history[1].iteration == 6);
    CHECK(r.history[2].iteration == 9);
  }
}

TEST_CASE("the validation hook sees every record with a sound improved flag") {
  auto corpus = tiny_corpus(32, 8);
  auto model =
      build_model<float>(corpus, tiny_encoder(), HeadConfig{}, DataConfig{}, 3);
  TrainConfig tc;
  tc.batch_size = 8;
  tc.max_iterations = 20;
  tc.validate_every = 4;

  std::vector<HistoryRecord> seen;
  std::vector<bool> flags;
  TrainResult r = train(model, corpus, corpus, tc,
                        [&](const HistoryRecord& rec, bool improved) {
                          seen.push_back(rec);
                          flags.push_back(improved);
                        });
  REQUIRE(seen.size() == r.history.size());
  double best = -1.0;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    CHECK(seen[i].iteration == r.history[i].iteration);
    CHECK(flags[i] == (seen[i].dev_accuracy > best));
    best = std::max(best, seen[i].dev_accuracy);
  }
}

TEST_CASE("a poisoned parameter aborts training with a located error") {
  auto corpus = tiny_corpus(16, 9);
  auto model =
      build_model<float>(corpus, tiny_encoder(), HeadConfig{}, DataConfig{}, 3);
  model.encoder.token_embedding.value.setConstant(
      std::numeric_limits<float>::quiet_NaN());
  TrainConfig tc;
  tc.batch_size = 4;
  tc.max_iterations = 10;
  tc.validate_every = 5;
  try {
    (void)train(model, corpus, corpus, tc);
    FAIL("expected TrainError");
  } catch (const TrainError& e) {
    CHECK(std::string(e.what()).find("non-finite loss at iteration 1") !=
          std::string::npos);
  }
}

TEST_CASE("train rejects empty splits") {
  auto corpus = tiny_corpus(16, 10);
  auto model =
      build_model<float>(corpus, tiny_encoder(), HeadConfig{}, DataConfig{}, 3);
  TrainConfig tc;
  CHECK_THROWS_AS((void)train(model, std::vector<Sample>{}, corpus, tc),
                  DataError);
  CHECK_THROWS_AS((void)train(model, corpus, std::vector<Sample>{}, tc),
                  DataError);
}

namespace {

// Train corpus with one monophonic and one polyphonic character; evaluation
// fixtures then force exact correct/wrong patterns.
struct MetricFixture {
  Model<float> model;
  std::string hit;   // what the untrained model predicts for 乙
  std::string miss;  // the other candidate

  MetricFixture()
      : model(build_model<float>(
            {make(U"x甲y", 1, "a1", "N"), make(U"x乙y", 1, "b1", "N"),
             make(U"y乙x", 1, "b2", "V")},
            tiny_encoder(), HeadConfig{}, DataConfig{}, 11)) {
    hit = predict(model, U"x乙y", 1).phoneme_label;
    miss = hit == "b1" ? "b2" : "b1";
  }
};

}  // namespace

TEST_CASE_FIXTURE(MetricFixture,
                  "per-sample and per-character accuracies can agree") {
  // 2/2 on 甲 plus 1/2 on 乙: both metrics come to 0.75.
  std::vector<Sample> eval = {
      make(U"x甲y", 1, "a1"),
      make(U"y甲x", 1, "a1"),
      make(U"x乙y", 1, hit),
      make(U"x乙y", 1, miss),
  };
  EvalReport r = evaluate(model, eval);
  CHECK(r.total == 4);
  CHECK(r.correct == 3);
  CHECK(r.accuracy == 0.75);
  CHECK(r.averaged_accuracy_by_characters == 0.75);
}

TEST_CASE_FIXTURE(MetricFixture,
                  "per-character averaging weighs rare characters equally") {
  // 99/100 on 甲 plus 0/1 on 乙: sample mean 99/101, character mean 0.495.
  std::vector<Sample> eval;
  for (int i = 0; i < 99; ++i) eval.push_back(make(U"x甲y", 1, "a1"));
  eval.push_back(make(U"x甲y", 1, "zz9"));  // label no model can emit
  eval.push_back(make(U"x乙y", 1, miss));

  EvalReport r = evaluate(model, eval);
  CHECK(r.total == 101);
  CHECK(r.correct == 99);
  CHECK(r.accuracy == doctest::Approx(99.0 / 101.0).epsilon(1e-12));
  CHECK(r.averaged_accuracy_by_characters ==
        doctest::Approx(0.495).epsilon(1e-12));
  REQUIRE(r.per_character.size() == 2);
  CHECK(r.per_character.at(U'甲').total == 100);
  CHECK(r.per_character.at(U'甲').correct == 99);
  CHECK(r.per_character.at(U'乙').total == 1);
  CHECK(r.per_character.at(U'乙').correct == 0);
}

TEST_CASE_FIXTURE(MetricFixture, "unknown characters count as wrong") {
  std::vector<Sample> eval = {
      make(U"x戊y", 1, "a1"),  // 戊 never appeared in training
      make(U"x甲y", 1, "a1"),
  };
  EvalReport r = evaluate(model, eval);
  CHECK(r.unknown_char == 1);
  CHECK(r.total == 2);
  CHECK(r.correct == 1);
  CHECK(r.accuracy == 0.5);
  CHECK(r.per_character.at(U'戊').correct == 0);
}

TEST_CASE_FIXTURE(MetricFixture, "evaluate is deterministic and total") {
  std::vector<Sample> eval = {make(U"x甲y", 1, "a1"), make(U"x乙y", 1, hit)};
  EvalReport a = evaluate(model, eval);
  EvalReport b = evaluate(model, eval);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.averaged_accuracy_by_characters == b.averaged_accuracy_by_characters);
  CHECK_THROWS_WITH_AS((void)evaluate(model, std::vector<Sample>{}),
                       "evaluate: empty dataset", DataError);
}

TEST_CASE("beta couples or decouples the POS branch from the gradients") {
  auto corpus = tiny_corpus(32, 12);

  auto run_forward = [&](double beta) {
    HeadConfig hc;
    hc.beta = beta;
    auto model =
        build_model<double>(corpus, tiny_encoder(), hc, DataConfig{}, 3);
    EncodedSample enc =
        encode_sample(corpus[0], model.vocab, model.lexicon, model.inventory,
                      model.pos_tags, model.data_config);
    model.zero_grads();
    Graph<double> g;
    auto fwd = forward_train(g, model, enc, false, nullptr);
    g.backward(fwd.total_loss);
    double pos_grad = 0.0;
    for (const auto& p : model.head.pos_weights) {
      pos_grad = std::max(pos_grad, p.grad.cwiseAbs().maxCoeff());
    }
    const double ph_grad = model.head.ph_weights[0].grad.cwiseAbs().maxCoeff();
    const double e_pos_grad = model.head.e_pos.grad.cwiseAbs().maxCoeff();
    return std::make_tuple(fwd, pos_grad, ph_grad, e_pos_grad);
  };

  // beta 0 with the cross term on: the POS head is evaluated (the weights
  // need a POS id at inference) yet contributes nothing to the gradient.
  auto [fwd0, pos0, ph0, epos0] = run_forward(0.0);
  CHECK(pos0 == 0.0);
  CHECK(ph0 > 0.0);
  CHECK(epos0 == 0.0);  // alpha_pos = 0 keeps the table frozen
  CHECK(!fwd0.pos_probs.empty());
  CHECK(fwd0.loss == fwd0.phoneme_loss);

  auto [fwd1, pos1, ph1, epos1] = run_forward(0.1);
  CHECK(pos1 > 0.0);
  CHECK(ph1 > 0.0);
  CHECK(epos1 == 0.0);
  CHECK(fwd1.loss ==
        doctest::Approx(fwd1.phoneme_loss + 0.1 * fwd1.pos_loss)
            .epsilon(1e-12));
}

TEST_CASE("teacher mode conditions the soft weights on the gold POS tag") {
  auto corpus = tiny_corpus(32, 13);
  auto model = build_model<double>(corpus, tiny_encoder(), HeadConfig{},
                                   DataConfig{}, 3);
  EncodedSample enc =
      encode_sample(corpus[0], model.vocab, model.lexicon, model.inventory,
                    model.pos_tags, model.data_config);
  REQUIRE(enc.pos_id >= 0);
  model.zero_grads();
  Graph<double> g;
  auto fwd = forward_train(g, model, enc, false, nullptr);
  g.backward(fwd.total_loss);

  const int gold_row =
      enc.char_id * static_cast<int>(model.pos_tags.size()) + enc.pos_id;
  for (Eigen::Index r = 0; r < model.head.e_cross.value.rows(); ++r) {
    const double mag = model.head.e_cross.grad.row(r).cwiseAbs().maxCoeff();
    if (r == gold_row) {
      CHECK(mag > 0.0);
    } else {
      CHECK(mag == 0.0);
    }
  }
}

TEST_CASE("forward_train rejects unlabeled training samples") {
  auto corpus = tiny_corpus(16, 14);
  auto model = build_model<double>(corpus, tiny_encoder(), HeadConfig{},
                                   DataConfig{}, 3);
  EncodedSample enc =
      encode_sample(corpus[0], model.vocab, model.lexicon, model.inventory,
                    model.pos_tags, model.data_config);
  Graph<double> g;
  EncodedSample no_label = enc;
  no_label.phoneme_id = -1;
  CHECK_THROWS_AS((void)forward_train(g, model, no_label, false, nullptr),
                  DataError);
  EncodedSample no_pos = enc;
  no_pos.pos_id = -1;
  Graph<double> g2;
  CHECK_THROWS_AS((void)forward_train(g2, model, no_pos, false, nullptr),
                  DataError);
}

TEST_CASE("the finite-difference detector accepts the tape and flags "
          "sabotage") {
  auto corpus = tiny_corpus(24, 15);
  EncoderConfig enc_cfg;
  enc_cfg.num_layers = 1;
  enc_cfg.hidden_size = 8;
  enc_cfg.num_heads = 2;
  enc_cfg.ff_size = 16;
  enc_cfg.max_positions = 34;
  enc_cfg.dropout_rate = 0.0;
  auto model =
      build_model<double>(corpus, enc_cfg, HeadConfig{}, DataConfig{}, 3);
  std::vector<EncodedSample> encoded;
  for (std::size_t i = 0; i < 4; ++i) {
    encoded.push_back(encode_sample(corpus[i], model.vocab, model.lexicon,
                                    model.inventory, model.pos_tags,
                                    model.data_config));
  }

  GradCheckReport report = gradient_check(model, encoded);
  CHECK(report.passed);
  CHECK(report.max_error <= 1e-4);
  CHECK(report.entries.size() == model.named_params().size());

  // The e_pos table is frozen under alpha_pos = 0: its error is exactly 0.
  bool saw_e_pos = false;
  for (const auto& entry : report.entries) {
    if (entry.tensor == "head.e_pos") {
      saw_e_pos = true;
      CHECK(entry.max_error == 0.0);
    }
  }
  CHECK(saw_e_pos);

  // Negative control: a planted analytic error must trip the comparator.
  NamedGrads analytic = analytic_gradients(model, encoded);
  NamedGrads fd = fd_gradients(model, encoded);
  double clean = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    clean = std::max(clean,
                     max_relative_error(analytic[i].second, fd[i].second));
  }
  CHECK(clean <= 1e-4);
  analytic[0].second(0, 0) += 0.1;
  CHECK(max_relative_error(analytic[0].second, fd[0].second) > 1e-4);
}

TEST_CASE("contribution grid rows mirror the component knockouts") {
  HeadConfig base;
  auto cells = contribution_grid(base);
  REQUIRE(cells.size() == 4);

  CHECK(cells[0].name == "full");
  CHECK(cells[0].use_soft_weights);
  CHECK(cells[0].use_hard_mask);
  CHECK(cells[0].beta == 0.1);
  CHECK(cells[0].alpha_cross == 1);
  CHECK(cells[0].alpha_char == 1);
  CHECK(cells[0].alpha_pos == 0);

  CHECK(cells[1].name == "no_soft_weights");
  CHECK_FALSE(cells[1].use_soft_weights);
  CHECK(cells[1].use_hard_mask);
  CHECK(cells[1].beta == 0.1);  // the POS task survives this knockout

  CHECK(cells[2].name == "hard_mask_only");
  CHECK_FALSE(cells[2].use_soft_weights);
  CHECK(cells[2].use_hard_mask);
  CHECK(cells[2].beta == 0.0);

  CHECK(cells[3].name == "baseline");
  CHECK_FALSE(cells[3].use_soft_weights);
  CHECK_FALSE(cells[3].use_hard_mask);
  CHECK(cells[3].beta == 0.0);
}

TEST_CASE("alpha grid covers all eight term combinations") {
  auto cells = alpha_grid(0.25);
  REQUIRE(cells.size() == 8);
  CHECK(cells[0].name == "alphas_111");
  CHECK(cells[7].name == "alphas_000");
  std::set<std::string> names;
  for (const auto& cell : cells) {
    names.insert(std::to_string(cell.alpha_cross) +
                 std::to_string(cell.alpha_char) +
                 std::to_string(cell.alpha_pos));
    CHECK(cell.beta == 0.25);
    CHECK(cell.use_soft_weights);
    CHECK(cell.use_hard_mask);
  }
  CHECK(names.size() == 8);

  auto betas = beta_grid({0.01, 0.1, 1.0});
  REQUIRE(betas.size() == 3);
  CHECK(betas[0].beta == 0.01);
  CHECK(betas[2].beta == 1.0);
}

TEST_CASE("ablation runs share splits within a seed and are reproducible") {
  auto corpus = tiny_corpus(120, 16);
  HeadConfig base;
  auto cells = contribution_grid(base);
  cells = {cells[0], cells[3]};  // full and baseline keep the test quick
  TrainConfig tc;
  tc.batch_size = 16;
  tc.max_iterations = 6;
  tc.validate_every = 3;

  std::size_t callbacks = 0;
  auto run = [&]() {
    return ablation_run<float>(
        corpus, tiny_encoder(), base, DataConfig{}, tc, cells, {1, 2},
        [&](const AblationResult&) { ++callbacks; });
  };
  auto results = run();
  REQUIRE(results.size() == 4);
  CHECK(callbacks == 4);
  CHECK(results[0].seed == 1);
  CHECK(results[0].cell.name == "full");
  CHECK(results[1].seed == 1);
  CHECK(results[1].cell.name == "baseline");
  CHECK(results[2].seed == 2);
  CHECK(results[3].cell.name == "baseline");
  for (const auto& r : results) {
    CHECK(r.dev_report.total > 0);
    CHECK(r.test_report.total > 0);
  }

  auto again = run();
  for (std::size_t i = 0; i < results.size(); ++i) {
    CHECK(results[i].dev_report.accuracy == again[i].dev_report.accuracy);
    CHECK(results[i].test_report.accuracy == again[i].test_report.accuracy);
  }

  CHECK_THROWS_AS((void)ablation_run<float>(corpus, tiny_encoder(), base,
                                            DataConfig{}, tc, {}, {1}),
                  ConfigError);
  CHECK_THROWS_AS((void)ablation_run<float>(corpus, tiny_encoder(), base,
                                            DataConfig{}, tc, cells, {}),
                  ConfigError);
}
