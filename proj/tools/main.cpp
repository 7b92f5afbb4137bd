// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors
//
// Command-line entry point: dataset generation, labeling, training
// protocols, evaluation, the ablation grid and the distance utility.
//
// Exit codes: 0 success, 2 usage/validation, 3 missing or incompatible
// artifacts. Diagnostics go to stderr, data to stdout.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fh/config.hpp"
#include "fh/errors.hpp"
#include "fh/fdk.hpp"
#include "fh/fsn.hpp"
#include "fh/harness.hpp"
#include "fh/scoring.hpp"
#include "fh/synthdata.hpp"
#include "fh/trajgeo.hpp"

namespace {

namespace fs = std::filesystem;
using fh::config::RunConfig;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitArtifact = 3;

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string outdir;
};

void add_config_options(CLI::App* cmd, ConfigArgs* args) {
  cmd->add_option("--config", args->config_path, "run configuration file");
  cmd->add_option("--set", args->overrides, "override as section.key=value (repeatable)");
  cmd->add_option("--seed", args->seed, "master seed")->each([args](const std::string&) {
    args->seed_set = true;
  });
  cmd->add_option("--out-dir", args->outdir, "output directory");
}

RunConfig build_config(const ConfigArgs& args) {
  RunConfig config =
      args.config_path.empty() ? RunConfig{} : RunConfig::from_file(args.config_path);
  for (const std::string& assignment : args.overrides) config.apply_override(assignment);
  if (args.seed_set) config.seed = args.seed;
  if (!args.outdir.empty()) config.outdir = args.outdir;
  config.validate();
  return config;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw fh::ArtifactError("cannot open for writing: " + path);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw fh::ArtifactError("write failed: " + path);
}

fh::trajgeo::Trajectory read_trajectory_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw fh::ArtifactError("cannot open trajectory file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw fh::ParseError(path, 1, e.what());
  }
  fh::trajgeo::Trajectory t;
  const nlohmann::json* points = &j;
  if (j.is_object()) {
    if (j.contains("dt")) t.dt = j.at("dt").get<double>();
    points = &j.at("points");
  }
  for (const auto& p : *points) {
    if (!p.is_array() || p.size() != 2)
      throw fh::ParseError(path, 1, "each point must be a [x, y] pair");
    t.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  if (t.points.empty()) throw fh::ParseError(path, 1, "trajectory file holds no points");
  return t;
}

// Loads the per-horizon collector checkpoints written by `train --protocol it`.
fh::harness::ItResult load_collectors(const RunConfig& config, const std::string& dir) {
  fh::harness::ItResult collectors;
  for (int f : config.model.horizons.values()) {
    fh::fsn::FsnConfig single = config.model;
    single.horizons = fh::trajgeo::HorizonSet({f});
    single.lambda = 0.0;
    const std::string path = dir + "/it-" + std::to_string(f) + ".ckpt";
    if (!fs::exists(path))
      throw fh::ArtifactError("missing collector checkpoint for horizon " + std::to_string(f) +
                              ": " + path);
    collectors.models.push_back(fh::fsn::FsnModel::load(path, single));
  }
  return collectors;
}

int cmd_generate(const ConfigArgs& config_args, std::int64_t n, const std::string& out) {
  if (n < 0) {
    std::cerr << "generate: --n must be non-negative\n";
    return kExitUsage;
  }
  RunConfig config = build_config(config_args);
  const std::vector<fh::synthdata::Sample> samples = fh::synthdata::generate(
      static_cast<std::size_t>(n), config.generator, config.sub_seed("dataset"));
  try {
    fh::synthdata::write_jsonl(samples, out);
  } catch (const fh::ArtifactError& e) {
    std::cerr << "generate: " << e.what() << "\n";
    return kExitUsage;  // unwritable output path is a validation failure
  }
  std::map<std::string, std::size_t> kind_counts;
  for (const fh::synthdata::Sample& s : samples) kind_counts[to_string(s.kind)] += 1;
  std::cout << "wrote " << samples.size() << " samples to " << out << "\n";
  for (const auto& [kind, count] : kind_counts) std::cout << kind << ": " << count << "\n";
  return kExitOk;
}

int cmd_label(const ConfigArgs& config_args, const std::string& dataset, const std::string& out,
              bool oracle, const std::string& collector_dir) {
  RunConfig config = build_config(config_args);
  if (oracle) config.oracle_labels = true;
  std::vector<fh::synthdata::Sample> samples;
  if (!dataset.empty()) {
    samples = fh::synthdata::read_jsonl(dataset);
  } else {
    samples = fh::synthdata::generate(config.train_size + config.val_size, config.generator,
                                      config.sub_seed("dataset"));
  }
  fh::harness::ItResult collectors;
  const fh::harness::ItResult* collectors_ptr = nullptr;
  if (!config.oracle_labels) {
    const std::string dir = collector_dir.empty() ? config.outdir : collector_dir;
    collectors = load_collectors(config, dir);
    collectors_ptr = &collectors;
  }
  const fh::scoring::LabelDataset labels =
      fh::harness::label_split(config, samples, collectors_ptr);
  try {
    fh::scoring::write_labels_jsonl(out, labels);
  } catch (const fh::ArtifactError& e) {
    std::cerr << "label: " << e.what() << "\n";
    return kExitUsage;
  }
  std::cerr << "class distribution over " << labels.labels.size() << " agents:\n";
  for (const auto& [horizon, count] : labels.class_counts)
    std::cerr << "  f=" << horizon << ": " << count << "\n";
  return kExitOk;
}

int cmd_train(const ConfigArgs& config_args, const std::string& protocol_flag) {
  RunConfig config = build_config(config_args);
  if (!protocol_flag.empty()) config.protocol = protocol_flag;
  config.validate();
  fs::create_directories(config.outdir);
  const auto started = std::chrono::steady_clock::now();
  const fh::harness::Split split = fh::harness::prepare_split(config);
  std::vector<std::string> artifacts;

  auto elapsed = [&started]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  if (config.protocol == "it") {
    const fh::harness::ItResult result = fh::harness::run_it(split, config);
    for (std::size_t h = 0; h < result.models.size(); ++h) {
      const int f = config.model.horizons[static_cast<std::size_t>(h)];
      const std::string ckpt = config.outdir + "/it-" + std::to_string(f) + ".ckpt";
      result.models[h].save(ckpt);
      write_text(config.outdir + "/it-" + std::to_string(f) + "-log.csv",
                 result.logs[h].to_csv());
      artifacts.push_back(ckpt);
    }
    write_text(config.outdir + "/it-metrics.csv", result.table.to_csv());
    artifacts.push_back(config.outdir + "/it-metrics.csv");
    fh::harness::write_manifest(config.outdir + "/manifest-it.json", config, artifacts, elapsed());
    std::cout << result.table.to_csv();
    return kExitOk;
  }
  if (config.protocol == "ir") {
    const fh::harness::IrResult result = fh::harness::run_ir(split, config);
    const std::string ckpt = config.outdir + "/ir.ckpt";
    result.model.save(ckpt);
    write_text(config.outdir + "/ir-log.csv", result.log.to_csv());
    write_text(config.outdir + "/ir-metrics.csv", result.table.to_csv());
    artifacts = {ckpt, config.outdir + "/ir-metrics.csv"};
    fh::harness::write_manifest(config.outdir + "/manifest-ir.json", config, artifacts, elapsed());
    std::cout << result.table.to_csv();
    return kExitOk;
  }
  if (config.protocol == "apm" || config.protocol == "fsn") {
    fh::harness::ItResult collectors;
    const fh::harness::ItResult* collectors_ptr = nullptr;
    if (!config.oracle_labels) {
      collectors = fh::harness::run_it(split, config);
      for (std::size_t h = 0; h < collectors.models.size(); ++h) {
        const int f = config.model.horizons[static_cast<std::size_t>(h)];
        const std::string ckpt = config.outdir + "/it-" + std::to_string(f) + ".ckpt";
        collectors.models[h].save(ckpt);
        artifacts.push_back(ckpt);
      }
      collectors_ptr = &collectors;
    }
    if (config.protocol == "apm") {
      const fh::scoring::LabelDataset train_labels =
          fh::harness::label_split(config, split.train, collectors_ptr);
      const fh::scoring::LabelDataset val_labels =
          fh::harness::label_split(config, split.val, collectors_ptr);
      fh::fsn::FsnModel model = fh::fsn::FsnModel::init(config.model, config.sub_seed("init-fsn"));
      fh::fsn::TrainOptions options;
      options.optim = config.optim;
      options.epochs = config.epochs;
      options.batch_size = config.batch_size;
      options.shuffle_seed = config.sub_seed("shuffle-apm");
      const fh::fsn::TrainLog log = fh::fsn::train_apm(
          model, split.train, train_labels.labels, split.val, val_labels.labels, options);
      const std::string ckpt = config.outdir + "/apm.ckpt";
      model.save(ckpt);
      write_text(config.outdir + "/apm-log.csv", log.to_csv());
      artifacts.push_back(ckpt);
      fh::harness::write_manifest(config.outdir + "/manifest-apm.json", config, artifacts,
                                  elapsed());
      std::cout << log.to_csv();
      return kExitOk;
    }
    const fh::harness::FsnResult result = fh::harness::run_fsn(split, config, collectors_ptr);
    const std::string ckpt = config.outdir + "/fsn.ckpt";
    result.model.save(ckpt);
    write_text(config.outdir + "/apm-log.csv", result.apm_log.to_csv());
    write_text(config.outdir + "/fsn-log.csv", result.fsn_log.to_csv());
    write_text(config.outdir + "/fsn-metrics.csv", result.table.to_csv());
    std::string histogram = "horizon,count\n";
    for (const auto& [f, count] : result.horizon_histogram)
      histogram += std::to_string(f) + "," + std::to_string(count) + "\n";
    write_text(config.outdir + "/fsn-histogram.csv", histogram);
    fh::scoring::write_labels_jsonl(config.outdir + "/labels.jsonl", result.train_labels);
    artifacts.insert(artifacts.end(), {ckpt, config.outdir + "/fsn-metrics.csv",
                                       config.outdir + "/labels.jsonl"});
    fh::harness::write_manifest(config.outdir + "/manifest-fsn.json", config, artifacts,
                                elapsed());
    std::cout << result.table.to_csv();
    return kExitOk;
  }
  std::cerr << "train: unknown protocol " << config.protocol << "\n";
  return kExitUsage;
}

int cmd_eval(const ConfigArgs& config_args, const std::string& checkpoint,
             const std::string& dataset, bool truncate, const std::string& method_flag,
             const std::string& out, const std::string& plot) {
  RunConfig config = build_config(config_args);
  // Truncated evaluation targets a single-horizon checkpoint trained at the
  // largest horizon; per-horizon evaluation targets the full decoder bank.
  fh::fsn::FsnConfig model_config = config.model;
  if (truncate) {
    model_config.horizons = fh::trajgeo::HorizonSet({config.model.horizons.max()});
    model_config.lambda = 0.0;
  }
  const fh::fsn::FsnModel model = fh::fsn::FsnModel::load(checkpoint, model_config);
  std::vector<fh::synthdata::Sample> samples;
  if (!dataset.empty()) {
    samples = fh::synthdata::read_jsonl(dataset);
  } else {
    samples = fh::harness::prepare_split(config).val;
  }
  std::vector<fh::trajgeo::Trajectory> futures;
  for (const fh::synthdata::Sample& s : samples) futures.push_back(s.future);

  const std::string method = method_flag.empty() ? (truncate ? "ir" : "fsn") : method_flag;
  const std::vector<std::map<int, fh::trajgeo::ModeSet>> predictions =
      truncate ? fh::harness::predict_truncated(model, samples, config.model.horizons)
               : fh::harness::predict_all_horizons(model, samples, config.model.horizons);
  const fh::harness::MetricsTable table = fh::harness::evaluate(
      predictions, futures, config.model.horizons, config.miss_threshold, method);
  const std::string csv = table.to_csv();
  std::cout << csv;
  if (!out.empty()) write_text(out, csv);
  if (!plot.empty()) {
    std::string plot_csv = "horizon,min_fde,min_ade,miss_rate\n";
    char buffer[128];
    for (const fh::harness::MetricsRow& r : table.rows) {
      std::snprintf(buffer, sizeof(buffer), "%d,%.9g,%.9g,%.9g\n", r.horizon, r.min_fde, r.min_ade,
                    r.miss_rate);
      plot_csv += buffer;
    }
    write_text(plot, plot_csv);
  }
  return kExitOk;
}

int cmd_frechet(const ConfigArgs& config_args, const std::string& a_path,
                const std::string& b_path) {
  RunConfig config = build_config(config_args);
  fh::trajgeo::Trajectory a;
  fh::trajgeo::Trajectory b;
  try {
    a = read_trajectory_file(a_path);
    b = read_trajectory_file(b_path);
  } catch (const fh::ArtifactError& e) {
    std::cerr << "frechet: " << e.what() << "\n";
    return kExitUsage;
  }
  fh::fdk::FdkParams params = config.model.fdk;
  params.epsilon = 0.0;
  const double exact = fh::trajgeo::discrete_frechet(a, b);
  const double smooth = fh::fdk::fdk_distance(a, b, params);
  char buffer[256];
  std::snprintf(buffer, sizeof(buffer),
                "discrete_frechet=%.12g fdk_distance=%.12g beta=%g gamma=%g delta=%g\n", exact,
                smooth, params.beta, params.gamma, params.delta);
  std::cout << buffer;
  return kExitOk;
}

int cmd_ablate(const ConfigArgs& config_args) {
  RunConfig config = build_config(config_args);
  fs::create_directories(config.outdir);
  const auto started = std::chrono::steady_clock::now();
  const fh::harness::Split split = fh::harness::prepare_split(config);
  const fh::harness::AblationResult result = fh::harness::ablation_scores(split, config);
  const std::string csv = result.to_csv();
  std::cout << csv;
  write_text(config.outdir + "/ablation.csv", csv);
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const std::string name = fh::scoring::to_string(result.rows[i].kernel) +
                             std::string(result.rows[i].kl_enabled ? "-kl" : "-nokl");
    write_text(config.outdir + "/ablation-" + name + "-log.csv", result.logs[i].to_csv());
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  fh::harness::write_manifest(config.outdir + "/manifest-ablate.json", config,
                              {config.outdir + "/ablation.csv"}, wall);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive-horizon trajectory prediction workbench"};
  app.require_subcommand(1);

  ConfigArgs generate_config;
  std::int64_t generate_n = 100;
  std::string generate_out = "dataset.jsonl";
  CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset");
  add_config_options(generate, &generate_config);
  generate->add_option("--n", generate_n, "sample count");
  generate->add_option("--out", generate_out, "output JSONL path (.gz accepted)");

  ConfigArgs label_config;
  std::string label_dataset;
  std::string label_out = "labels.jsonl";
  std::string label_collector_dir;
  bool label_oracle = false;
  CLI::App* label = app.add_subcommand("label", "score fixed-horizon predictions into labels");
  add_config_options(label, &label_config);
  label->add_option("--dataset", label_dataset, "dataset JSONL (default: generate from config)");
  label->add_option("--out", label_out, "labels JSONL path");
  label->add_option("--collector-dir", label_collector_dir,
                    "directory holding it-<f>.ckpt collector checkpoints");
  label->add_flag("--oracle", label_oracle, "use the noise oracle instead of collectors");

  ConfigArgs train_config;
  std::string train_protocol;
  CLI::App* train = app.add_subcommand("train", "run a training protocol");
  add_config_options(train, &train_config);
  train->add_option("--protocol", train_protocol, "one of it|ir|fsn|apm");

  ConfigArgs eval_config;
  std::string eval_checkpoint;
  std::string eval_dataset;
  std::string eval_method;
  std::string eval_out;
  std::string eval_plot;
  bool eval_truncate = false;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_config_options(eval, &eval_config);
  eval->add_option("--checkpoint", eval_checkpoint, "model checkpoint")->required();
  eval->add_option("--dataset", eval_dataset, "dataset JSONL (default: config val split)");
  eval->add_option("--method", eval_method, "method name for the report rows");
  eval->add_option("--out", eval_out, "also write the CSV here");
  eval->add_option("--plot", eval_plot, "write horizon-vs-metric CSV here");
  eval->add_flag("--truncate", eval_truncate,
                 "decode at the largest horizon and truncate to each horizon");

  ConfigArgs frechet_config;
  std::string frechet_a;
  std::string frechet_b;
  CLI::App* frechet = app.add_subcommand("frechet", "exact and smoothed distance of two curves");
  add_config_options(frechet, &frechet_config);
  frechet->add_option("a", frechet_a, "first trajectory JSON file")->required();
  frechet->add_option("b", frechet_b, "second trajectory JSON file")->required();

  ConfigArgs ablate_config;
  CLI::App* ablate = app.add_subcommand("ablate", "score-kernel x distillation ablation grid");
  add_config_options(ablate, &ablate_config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(generate_config, generate_n, generate_out);
    if (label->parsed())
      return cmd_label(label_config, label_dataset, label_out, label_oracle, label_collector_dir);
    if (train->parsed()) return cmd_train(train_config, train_protocol);
    if (eval->parsed())
      return cmd_eval(eval_config, eval_checkpoint, eval_dataset, eval_truncate, eval_method,
                      eval_out, eval_plot);
    if (frechet->parsed()) return cmd_frechet(frechet_config, frechet_a, frechet_b);
    if (ablate->parsed()) return cmd_ablate(ablate_config);
  } catch (const fh::ArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitArtifact;
  } catch (const fh::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fh::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fh::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}
