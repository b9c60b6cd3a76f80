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
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "polyg2p/model.hpp"

namespace polyg2p {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_iterations = 2000;
  std::size_t validate_every = 100;
  std::uint64_t seed = 42;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const {
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (max_iterations == 0) throw ConfigError("max_iterations must be positive");
    if (validate_every == 0) throw ConfigError("validate_every must be positive");
    if (validate_every > max_iterations) {
      throw ConfigError("validate_every must not exceed max_iterations");
    }
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 ||
        adam_beta2 >= 1.0) {
      throw ConfigError("adam betas must be in [0, 1)");
    }
    if (adam_epsilon <= 0.0) throw ConfigError("adam_epsilon must be positive");
  }

  // Published training protocol for the full-size setup.
  void apply_paper_protocol() {
    learning_rate = 5e-5;
    batch_size = 256;
    max_iterations = 10000;
    validate_every = 200;
  }
};

template <typename S>
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Param<S>*> params, const TrainConfig& cfg)
      : params_(std::move(params)),
        lr_(cfg.learning_rate),
        beta1_(cfg.adam_beta1),
        beta2_(cfg.adam_beta2),
        eps_(cfg.adam_epsilon) {
    states_.reserve(params_.size());
    for (Param<S>* p : params_) {
      states_.push_back(
          {Mat<S>::Zero(p->value.rows(), p->value.cols()),
           Mat<S>::Zero(p->value.rows(), p->value.cols())});
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const S alpha = static_cast<S>(lr_ * std::sqrt(bc2) / bc1);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param<S>& p = *params_[i];
      State& s = states_[i];
      s.m = static_cast<S>(beta1_) * s.m + static_cast<S>(1.0 - beta1_) * p.grad;
      s.v = static_cast<S>(beta2_) * s.v +
            static_cast<S>(1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
      p.value.array() -=
          alpha * s.m.array() / (s.v.array().sqrt() + static_cast<S>(eps_));
    }
  }

  std::size_t steps() const { return t_; }

 private:
  struct State {
    Mat<S> m, v;
  };
  std::vector<Param<S>*> params_;
  std::vector<State> states_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct HistoryRecord {
  std::size_t iteration = 0;
  double mean_train_loss = 0.0;
  double dev_accuracy = 0.0;
  double dev_pos_accuracy = 0.0;
};

struct TrainResult {
  std::size_t best_iteration = 0;
  double best_dev_accuracy = 0.0;
  std::vector<HistoryRecord> history;
};

struct CharAccuracy {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

struct EvalReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t pos_total = 0;
  std::size_t pos_correct = 0;
  std::size_t unknown_char = 0;
  std::map<char32_t, CharAccuracy> per_character;
  double accuracy = 0.0;
  // Mean of per-character accuracies; every polyphonic character counts
  // equally regardless of frequency.
  double averaged_accuracy_by_characters = 0.0;
  double pos_accuracy = 0.0;
};

// Scores samples through the inference path. Samples whose target character
// is outside the lexicon count as wrong (and as unknown_char).
template <typename S>
EvalReport evaluate(Model<S>& model, const std::vector<Sample>& samples) {
  if (samples.empty()) throw DataError("evaluate: empty dataset");
  EvalReport report;
  for (const Sample& sample : samples) {
    ++report.total;
    auto& slot = report.per_character[sample.target_char()];
    ++slot.total;
    Prediction pred;
    try {
      pred = predict(model, sample.sentence, sample.target_index);
    } catch (const LexiconError&) {
      ++report.unknown_char;
      continue;
    }
    if (pred.phoneme_label == sample.phoneme_label) {
      ++report.correct;
      ++slot.correct;
    }
    if (!sample.pos_tag.empty() && pred.pos_id >= 0) {
      ++report.pos_total;
      if (pred.pos_tag == sample.pos_tag) ++report.pos_correct;
    }
  }
  report.accuracy =
      static_cast<double>(report.correct) / static_cast<double>(report.total);
  double sum = 0.0;
  for (const auto& [ch, acc] : report.per_character) sum += acc.accuracy();
  report.averaged_accuracy_by_characters =
      report.per_character.empty()
          ? 0.0
          : sum / static_cast<double>(report.per_character.size());
  report.pos_accuracy =
      report.pos_total == 0
          ? 0.0
          : static_cast<double>(report.pos_correct) /
                static_cast<double>(report.pos_total);
  return report;
}

using ValidationHook =
    std::function<void(const HistoryRecord&, bool improved)>;

// Minibatch training with Adam. Gradients are averaged over the batch. Every
// validate_every iterations the dev set is scored through the inference
// path; the best dev accuracy checkpoint (earliest on ties) is restored into
// the model before returning. A non-finite loss aborts with TrainError.
template <typename S>
TrainResult train(Model<S>& model, const std::vector<Sample>& train_samples,
                  const std::vector<Sample>& dev_samples,
                  const TrainConfig& cfg, const ValidationHook& hook = {}) {
  cfg.validate();
  if (train_samples.empty()) throw DataError("train: empty training set");
  if (dev_samples.empty()) throw DataError("train: empty dev set");

  std::vector<EncodedSample> encoded;
  encoded.reserve(train_samples.size());
  for (const Sample& s : train_samples) {
    encoded.push_back(encode_sample(s, model.vocab, model.lexicon,
                                    model.inventory, model.pos_tags,
                                    model.data_config));
  }

  std::vector<Param<S>*> params = model.named_params();
  AdamOptimizer<S> optimizer(params, cfg);
  Rng dropout_rng(mix64(cfg.seed, 0x5eed));

  TrainResult result;
  result.best_dev_accuracy = -1.0;
  std::vector<Mat<S>> best_snapshot;

  std::size_t iteration = 0;
  std::size_t epoch = 0;
  double loss_accum = 0.0;
  std::size_t loss_count = 0;

  while (iteration < cfg.max_iterations) {
    auto batches =
        epoch_batches(encoded.size(), cfg.batch_size, cfg.seed, epoch);
    ++epoch;
    for (const auto& batch : batches) {
      if (iteration >= cfg.max_iterations) break;
      ++iteration;
      model.zero_grads();
      double batch_loss = 0.0;
      for (std::size_t idx : batch) {
        Graph<S> g;
        auto fwd = forward_train(g, model, encoded[idx], true, &dropout_rng);
        if (!std::isfinite(static_cast<double>(fwd.loss))) {
          throw TrainError("non-finite loss at iteration " +
                           std::to_string(iteration) + ", sample " +
                           std::to_string(idx));
        }
        batch_loss += static_cast<double>(fwd.loss);
        g.backward(fwd.total_loss);
      }
      const S inv = static_cast<S>(1.0 / static_cast<double>(batch.size()));
      for (Param<S>* p : params) p->grad *= inv;
      optimizer.step();

      loss_accum += batch_loss / static_cast<double>(batch.size());
      ++loss_count;

      if (iteration % cfg.validate_every == 0) {
        EvalReport dev = evaluate(model, dev_samples);
        HistoryRecord record;
        record.iteration = iteration;
        record.mean_train_loss =
            loss_accum / static_cast<double>(loss_count);
        record.dev_accuracy = dev.accuracy;
        record.dev_pos_accuracy = dev.pos_accuracy;
        loss_accum = 0.0;
        loss_count = 0;

        const bool improved = dev.accuracy > result.best_dev_accuracy;
        if (improved) {
          result.best_dev_accuracy = dev.accuracy;
          result.best_iteration = iteration;
          best_snapshot.clear();
          for (Param<S>* p : params) best_snapshot.push_back(p->value);
        }
        result.history.push_back(record);
        if (hook) hook(record, improved);
      }
    }
  }

  if (!best_snapshot.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i]->value = best_snapshot[i];
    }
  }
  return result;
}

// ---- finite-difference gradient verification ----

using NamedGrads = std::vector<std::pair<std::string, Mat<double>>>;

// d/dtheta of the summed training loss over the given samples, from the tape.
inline NamedGrads analytic_gradients(Model<double>& model,
                                     const std::vector<EncodedSample>& samples) {
  model.zero_grads();
  for (const EncodedSample& s : samples) {
    Graph<double> g;
    auto fwd = forward_train(g, model, s, false, nullptr);
    g.backward(fwd.total_loss);
  }
  NamedGrads out;
  for (Param<double>* p : model.named_params()) {
    out.emplace_back(p->name, p->grad);
  }
  return out;
}

inline double summed_loss(Model<double>& model,
                          const std::vector<EncodedSample>& samples) {
  double total = 0.0;
  for (const EncodedSample& s : samples) {
    Graph<double> g;
    total += forward_train(g, model, s, false, nullptr).loss;
  }
  return total;
}

// Central differences with a step scaled to each parameter's magnitude.
inline NamedGrads fd_gradients(Model<double>& model,
                               const std::vector<EncodedSample>& samples,
                               double step_scale = 1e-5) {
  NamedGrads out;
  for (Param<double>* p : model.named_params()) {
    Mat<double> grad(p->value.rows(), p->value.cols());
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        const double original = p->value(r, c);
        const double h = step_scale * std::max(1.0, std::abs(original));
        p->value(r, c) = original + h;
        const double up = summed_loss(model, samples);
        p->value(r, c) = original - h;
        const double down = summed_loss(model, samples);
        p->value(r, c) = original;
        grad(r, c) = (up - down) / (2.0 * h);
      }
    }
    out.emplace_back(p->name, std::move(grad));
  }
  return out;
}

inline double max_relative_error(const Mat<double>& analytic,
                                 const Mat<double>& fd) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
    for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
      const double a = analytic(r, c);
      const double f = fd(r, c);
      const double err =
          std::abs(a - f) / std::max(1e-4, std::abs(a) + std::abs(f));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

struct GradCheckReport {
  struct Entry {
    std::string tensor;
    double max_error = 0.0;
  };
  std::vector<Entry> entries;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

inline GradCheckReport gradient_check(Model<double>& model,
                                      const std::vector<EncodedSample>& samples,
                                      double tolerance = 1e-4) {
  NamedGrads analytic = analytic_gradients(model, samples);
  NamedGrads fd = fd_gradients(model, samples);
  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double err = max_relative_error(analytic[i].second, fd[i].second);
    report.entries.push_back({analytic[i].first, err});
    report.max_error = std::max(report.max_error, err);
  }
  report.passed = report.max_error <= tolerance;
  return report;
}

// ---- ablation grids ----

struct AblationCell {
  std::string name;
  int alpha_cross = 1;
  int alpha_char = 1;
  int alpha_pos = 0;
  double beta = 0.1;
  bool use_soft_weights = true;
  bool use_hard_mask = true;
};

struct AblationResult {
  AblationCell cell;
  std::uint64_t seed = 0;
  TrainResult train;
  EvalReport dev_report;
  EvalReport test_report;
};

// Component knockout rows: full model, no learnable weight, and no masking.
std::vector<AblationCell> contribution_grid(const HeadConfig& base);
// All on/off combinations of the three weight-input terms.
std::vector<AblationCell> alpha_grid(double beta);
std::vector<AblationCell> beta_grid(const std::vector<double>& betas);

// Trains one model per (cell, seed) pair. All cells within one seed share
// the same split and the same init seed, so rows differ only in the head
// configuration.
template <typename S>
std::vector<AblationResult> ablation_run(
    const std::vector<Sample>& corpus, const EncoderConfig& encoder_config,
    const HeadConfig& head_base, const DataConfig& data_config,
    const TrainConfig& train_base, const std::vector<AblationCell>& cells,
    const std::vector<std::uint64_t>& seeds,
    const std::function<void(const AblationResult&)>& on_cell = {}) {
  if (cells.empty()) throw ConfigError("ablation: no cells");
  if (seeds.empty()) throw ConfigError("ablation: no seeds");
  std::vector<AblationResult> results;
  for (std::uint64_t seed : seeds) {
    DataConfig dc = data_config;
    dc.shuffle_seed = seed;
    SplitResult split = stratified_split(corpus, dc.split_ratio, seed);
    for (const AblationCell& cell : cells) {
      HeadConfig hc = head_base;
      hc.alpha_cross = cell.alpha_cross;
      hc.alpha_char = cell.alpha_char;
      hc.alpha_pos = cell.alpha_pos;
      hc.beta = cell.beta;
      hc.use_soft_weights = cell.use_soft_weights;
      hc.use_hard_mask = cell.use_hard_mask;
      TrainConfig tc = train_base;
      tc.seed = seed;

      Model<S> model =
          build_model<S>(split.train, encoder_config, hc, dc, seed);
      AblationResult result;
      result.cell = cell;
      result.seed = seed;
      result.train = train(model, split.train, split.dev, tc);
      result.dev_report = evaluate(model, split.dev);
      result.test_report = evaluate(model, split.test);
      if (on_cell) on_cell(result);
      results.push_back(std::move(result));
    }
  }
  return results;
}

}  // namespace polyg2p
