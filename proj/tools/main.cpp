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
// Command-line frontend: train / eval / predict / ablate / gradcheck /
// make-synth. Exit codes: 0 ok, 1 internal failure, 2 configuration error,
// 3 data error, 4 training abort, 5 unknown target character.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "polyg2p/archive.hpp"
#include "polyg2p/run_config.hpp"
#include "polyg2p/synth.hpp"
#include "polyg2p/training.hpp"

namespace {

using nlohmann::json;
using namespace polyg2p;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTrain = 4;
constexpr int kExitUnknownChar = 5;

struct CommonOpts {
  std::string config_path;
  std::string format = "native";
  std::optional<std::uint64_t> seed;
  bool paper_protocol = false;
  bool as_json = false;
};

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig config;
  if (!opts.config_path.empty()) config = load_run_config(opts.config_path);
  if (opts.paper_protocol) config.train.apply_paper_protocol();
  if (opts.seed) config.train.seed = *opts.seed;
  config.validate();
  return config;
}

std::vector<Sample> load_samples(const std::string& path,
                                 const std::string& format) {
  LoadResult loaded = load_dataset(path, parse_format(format));
  if (loaded.report.rejected > 0) {
    std::cerr << "warning: rejected " << loaded.report.rejected
              << " malformed line(s) in " << path << "\n";
    for (std::size_t i = 0; i < loaded.report.messages.size() && i < 5; ++i) {
      std::cerr << "  " << loaded.report.messages[i] << "\n";
    }
  }
  if (loaded.samples.empty()) throw DataError("no samples loaded from " + path);
  return loaded.samples;
}

json report_to_json(const EvalReport& report) {
  json per_char = json::object();
  for (const auto& [c, acc] : report.per_character) {
    per_char[encode_utf8(c)] =
        json{{"total", acc.total}, {"correct", acc.correct},
             {"accuracy", acc.accuracy()}};
  }
  return json{{"samples", report.total},
              {"correct", report.correct},
              {"accuracy", report.accuracy},
              {"averaged_accuracy_by_characters",
               report.averaged_accuracy_by_characters},
              {"pos_accuracy", report.pos_accuracy},
              {"pos_samples", report.pos_total},
              {"unknown_char", report.unknown_char},
              {"per_character", per_char}};
}

void print_report(const EvalReport& report, bool as_json) {
  if (as_json) {
    std::cout << report_to_json(report).dump(2) << "\n";
    return;
  }
  std::printf("samples: %zu\n", report.total);
  std::printf("accuracy: %.4f\n", report.accuracy);
  std::printf("averaged_accuracy_by_characters: %.4f\n",
              report.averaged_accuracy_by_characters);
  if (report.pos_total > 0) {
    std::printf("pos_accuracy: %.4f\n", report.pos_accuracy);
  }
  if (report.unknown_char > 0) {
    std::printf("unknown_char: %zu\n", report.unknown_char);
  }
  std::printf("per-character:\n");
  for (const auto& [c, acc] : report.per_character) {
    std::printf("  %s  %zu/%zu  %.4f\n", encode_utf8(c).c_str(), acc.correct,
                acc.total, acc.accuracy());
  }
}

int cmd_train(const CommonOpts& opts, const std::string& data_path,
              const std::string& out_path, const std::string& history_path) {
  RunConfig config = resolve_config(opts);
  std::vector<Sample> corpus = load_samples(data_path, opts.format);
  SplitResult split =
      stratified_split(corpus, config.data.split_ratio, config.data.shuffle_seed);

  Model<float> model = build_model<float>(split.train, config.encoder,
                                          config.head, config.data,
                                          config.train.seed);
  model.fingerprint.config_hash = config_fingerprint(config);
  model.fingerprint.seed = config.train.seed;

  std::ofstream history;
  if (!history_path.empty()) {
    history.open(history_path, std::ios::trunc);
    if (!history) throw DataError("cannot open history file: " + history_path);
  }

  std::cerr << "train: " << split.train.size() << " samples, dev "
            << split.dev.size() << ", test " << split.test.size() << "\n";
  TrainResult result = train(
      model, split.train, split.dev, config.train,
      [&](const HistoryRecord& rec, bool improved) {
        std::cerr << "iter " << rec.iteration << " loss "
                  << rec.mean_train_loss << " dev_acc " << rec.dev_accuracy
                  << (improved ? " *" : "") << "\n";
        if (history) {
          history << json{{"iteration", rec.iteration},
                          {"mean_train_loss", rec.mean_train_loss},
                          {"dev_accuracy", rec.dev_accuracy},
                          {"dev_pos_accuracy", rec.dev_pos_accuracy},
                          {"improved", improved}}
                         .dump()
                  << "\n";
        }
      });

  save_archive(model, out_path);
  std::cerr << "best iteration " << result.best_iteration << " dev_acc "
            << result.best_dev_accuracy << "\n";
  std::cerr << "saved " << out_path << "\n";

  EvalReport dev_report = evaluate(model, split.dev);
  print_report(dev_report, opts.as_json);
  return kExitOk;
}

int cmd_eval(const CommonOpts& opts, const std::string& model_path,
             const std::string& data_path) {
  Model<float> model = load_archive(model_path);
  std::vector<Sample> samples = load_samples(data_path, opts.format);
  EvalReport report = evaluate(model, samples);
  print_report(report, opts.as_json);
  return kExitOk;
}

int cmd_predict(const CommonOpts& opts, const std::string& model_path,
                const std::string& text, std::size_t index,
                bool fallback_unrestricted) {
  Model<float> model = load_archive(model_path);
  const std::u32string sentence = decode_utf8(text);
  if (index >= sentence.size()) {
    throw DataError("index " + std::to_string(index) +
                    " out of range for a sentence of " +
                    std::to_string(sentence.size()) + " characters");
  }
  PredictOptions popts;
  popts.fallback_unrestricted = fallback_unrestricted;
  Prediction pred = predict(model, sentence, index, popts);

  if (opts.as_json) {
    json dist = json::object();
    for (const auto& [label, prob] : pred.distribution) dist[label] = prob;
    std::cout << json{{"phoneme", pred.phoneme_label},
                      {"pos", pred.pos_tag},
                      {"distribution", dist}}
                     .dump(2)
              << "\n";
    return kExitOk;
  }
  std::printf("phoneme: %s\n", pred.phoneme_label.c_str());
  if (!pred.pos_tag.empty()) std::printf("pos: %s\n", pred.pos_tag.c_str());
  std::printf("candidates:\n");
  for (const auto& [label, prob] : pred.distribution) {
    std::printf("  %-12s %.6f\n", label.c_str(), prob);
  }
  return kExitOk;
}

int cmd_ablate(const CommonOpts& opts, const std::string& data_path,
               const std::string& grid_name,
               const std::vector<std::uint64_t>& seeds) {
  RunConfig config = resolve_config(opts);
  std::vector<Sample> corpus = load_samples(data_path, opts.format);

  std::vector<AblationCell> cells;
  if (grid_name == "contribution") {
    cells = contribution_grid(config.head);
  } else if (grid_name == "alphas") {
    cells = alpha_grid(config.head.beta);
  } else if (grid_name == "beta") {
    cells = beta_grid({0.01, 0.1, 1.0});
  } else {
    throw ConfigError("unknown ablation grid: " + grid_name);
  }

  json rows = json::array();
  auto on_cell = [&](const AblationResult& r) {
    std::cerr << "cell " << r.cell.name << " seed " << r.seed << " dev "
              << r.dev_report.accuracy << " test " << r.test_report.accuracy
              << "\n";
    rows.push_back(json{{"cell", r.cell.name},
                        {"seed", r.seed},
                        {"alpha_cross", r.cell.alpha_cross},
                        {"alpha_char", r.cell.alpha_char},
                        {"alpha_pos", r.cell.alpha_pos},
                        {"beta", r.cell.beta},
                        {"use_soft_weights", r.cell.use_soft_weights},
                        {"use_hard_mask", r.cell.use_hard_mask},
                        {"dev_accuracy", r.dev_report.accuracy},
                        {"dev_avg_accuracy",
                         r.dev_report.averaged_accuracy_by_characters},
                        {"dev_pos_accuracy", r.dev_report.pos_accuracy},
                        {"test_accuracy", r.test_report.accuracy}});
  };
  ablation_run<float>(corpus, config.encoder, config.head, config.data,
                      config.train, cells, seeds, on_cell);

  if (opts.as_json) {
    std::cout << rows.dump(2) << "\n";
    return kExitOk;
  }
  std::printf("%-18s %6s %10s %10s %10s %10s\n", "cell", "seed", "dev", "avg",
              "pos", "test");
  for (const auto& row : rows) {
    std::printf("%-18s %6llu %10.4f %10.4f %10.4f %10.4f\n",
                row.at("cell").get<std::string>().c_str(),
                static_cast<unsigned long long>(
                    row.at("seed").get<std::uint64_t>()),
                row.at("dev_accuracy").get<double>(),
                row.at("dev_avg_accuracy").get<double>(),
                row.at("dev_pos_accuracy").get<double>(),
                row.at("test_accuracy").get<double>());
  }
  return kExitOk;
}

int cmd_gradcheck(const CommonOpts& opts, double tolerance) {
  const std::uint64_t seed = opts.seed.value_or(7);

  SynthSpec spec;
  spec.sample_count = 64;
  std::vector<Sample> corpus = make_synthetic_corpus(spec, seed);

  EncoderConfig ec;
  ec.num_layers = 1;
  ec.hidden_size = 8;
  ec.num_heads = 2;
  ec.ff_size = 16;
  ec.max_positions = 34;
  ec.dropout_rate = 0.0;
  HeadConfig hc;
  DataConfig dc;

  Model<double> model = build_model<double>(corpus, ec, hc, dc, seed);
  std::vector<EncodedSample> samples;
  for (std::size_t i = 0; i < 5; ++i) {
    samples.push_back(encode_sample(corpus[i], model.vocab, model.lexicon,
                                    model.inventory, model.pos_tags, dc));
  }
  GradCheckReport report = gradient_check(model, samples, tolerance);

  if (opts.as_json) {
    json entries = json::array();
    for (const auto& e : report.entries) {
      entries.push_back(json{{"tensor", e.tensor}, {"max_error", e.max_error}});
    }
    std::cout << json{{"entries", entries},
                      {"max_error", report.max_error},
                      {"tolerance", report.tolerance},
                      {"passed", report.passed}}
                     .dump(2)
              << "\n";
  } else {
    for (const auto& e : report.entries) {
      std::printf("%-40s %.3e\n", e.tensor.c_str(), e.max_error);
    }
    std::printf("max relative error %.3e (tolerance %.1e): %s\n",
                report.max_error, report.tolerance,
                report.passed ? "PASS" : "FAIL");
  }
  return report.passed ? kExitOk : kExitInternal;
}

int cmd_make_synth(const std::string& out_path, std::size_t count,
                   std::uint64_t seed) {
  SynthSpec spec;
  spec.sample_count = count;
  std::vector<Sample> corpus = make_synthetic_corpus(spec, seed);
  std::ofstream out(out_path, std::ios::trunc | std::ios::binary);
  if (!out) throw DataError("cannot open output file: " + out_path);
  out << serialize_corpus_tsv(corpus);
  if (!out) throw DataError("write failed: " + out_path);
  std::cerr << "wrote " << corpus.size() << " samples to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polyphone grapheme-to-phoneme trainer and predictor"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string data_path, model_path, out_path, history_path, text, grid_name;
  std::size_t index = 0;
  std::size_t synth_count = 2400;
  std::uint64_t synth_seed = 13;
  bool fallback_unrestricted = false;
  double tolerance = 1e-4;
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  auto add_common = [&](CLI::App* cmd, bool with_format) {
    cmd->add_option("--config", opts.config_path, "Run configuration file");
    cmd->add_option("--seed", opts.seed, "Override the training seed");
    cmd->add_flag("--paper-protocol", opts.paper_protocol,
                  "Use the published full-scale training constants");
    cmd->add_flag("--json", opts.as_json, "Machine-readable output");
    if (with_format) {
      cmd->add_option("--format", opts.format, "Dataset format")
          ->check(CLI::IsMember({"native", "cpp"}));
    }
  };

  CLI::App* train_cmd =
      app.add_subcommand("train", "Train a model and write an archive");
  train_cmd->add_option("--data", data_path, "Training corpus")->required();
  train_cmd->add_option("--out", out_path, "Output model archive")->required();
  train_cmd->add_option("--history", history_path,
                        "Validation history JSONL file");
  add_common(train_cmd, true);

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Evaluate an archive on a dataset");
  eval_cmd->add_option("--model", model_path, "Model archive")->required();
  eval_cmd->add_option("--data", data_path, "Evaluation dataset")->required();
  add_common(eval_cmd, true);

  CLI::App* predict_cmd =
      app.add_subcommand("predict", "Predict one polyphone's pronunciation");
  predict_cmd->add_option("--model", model_path, "Model archive")->required();
  predict_cmd->add_option("--text", text, "Input sentence (UTF-8)")->required();
  predict_cmd->add_option("--index", index, "Target character index")
      ->required();
  predict_cmd->add_flag("--fallback-unrestricted", fallback_unrestricted,
                        "Score out-of-lexicon characters over the full "
                        "inventory instead of failing");
  add_common(predict_cmd, false);

  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "Train and score an ablation grid");
  ablate_cmd->add_option("--data", data_path, "Corpus to split and train on")
      ->required();
  ablate_cmd->add_option("--grid", grid_name, "contribution | alphas | beta")
      ->required();
  ablate_cmd->add_option("--seeds", seeds, "Seeds, one run per seed");
  add_common(ablate_cmd, true);

  CLI::App* gradcheck_cmd = app.add_subcommand(
      "gradcheck", "Verify analytic gradients against finite differences");
  gradcheck_cmd->add_option("--tolerance", tolerance,
                            "Max relative error allowed");
  add_common(gradcheck_cmd, false);

  CLI::App* synth_cmd = app.add_subcommand(
      "make-synth", "Generate the rule-following synthetic corpus");
  synth_cmd->add_option("--out", out_path, "Output TSV path")->required();
  synth_cmd->add_option("--count", synth_count, "Number of samples");
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (train_cmd->parsed()) {
      return cmd_train(opts, data_path, out_path, history_path);
    }
    if (eval_cmd->parsed()) return cmd_eval(opts, model_path, data_path);
    if (predict_cmd->parsed()) {
      return cmd_predict(opts, model_path, text, index, fallback_unrestricted);
    }
    if (ablate_cmd->parsed()) {
      return cmd_ablate(opts, data_path, grid_name, seeds);
    }
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(opts, tolerance);
    if (synth_cmd->parsed()) {
      return cmd_make_synth(out_path, synth_count, synth_seed);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const LexiconError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnknownChar;
  } catch (const TrainError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitTrain;
  } catch (const ArchiveError& e) {
    std::cerr << "archive error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
