// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors

#include "fh/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "fh/errors.hpp"

namespace fh::harness {

namespace {

std::size_t eval_thread_count() {
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FLEXIHORIZON_THREADS")) {
    try {
      const unsigned long cap = std::stoul(env);
      if (cap >= 1) threads = std::min<std::size_t>(threads, cap);
    } catch (const std::exception&) {
      // unparsable cap: ignore and keep the hardware default
    }
  }
  return threads;
}

// Deterministic parallel map: slot i written only by the worker that owns it.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t threads = std::min(eval_thread_count(), std::max<std::size_t>(n, 1));
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([t, threads, n, &fn] {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    });
  }
  for (std::thread& th : pool) th.join();
}

fsn::TrainOptions train_options(const RunConfig& config, const std::string& stage,
                                bool train_encoder, bool balanced = false) {
  fsn::TrainOptions options;
  options.optim = config.optim;
  options.epochs = config.epochs;
  options.batch_size = config.batch_size;
  options.shuffle_seed = config.sub_seed("shuffle-" + stage);
  options.train_encoder = train_encoder;
  options.balanced_classes = balanced;
  return options;
}

std::vector<scoring::HorizonLabel> fixed_labels(std::size_t count, int horizon,
                                                const HorizonSet& horizons) {
  std::vector<scoring::HorizonLabel> labels(count);
  for (std::size_t i = 0; i < count; ++i) {
    labels[i].agent_id = "fixed-" + std::to_string(i);
    labels[i].f_gt = horizon;
    labels[i].q = 0.0;
    labels[i].one_hot.assign(horizons.size(), 0.0);
    labels[i].one_hot[horizons.index_of(horizon)] = 1.0;
  }
  return labels;
}

std::vector<Trajectory> future_of(std::span<const Sample> samples) {
  std::vector<Trajectory> futures;
  futures.reserve(samples.size());
  for (const Sample& s : samples) futures.push_back(s.future);
  return futures;
}

ModeSet truncate_modes(const ModeSet& modes, std::size_t steps) {
  ModeSet out;
  out.probs = modes.probs;
  for (const Trajectory& t : modes.trajectories) out.trajectories.push_back(t.prefix(steps));
  return out;
}

}  // namespace

std::string MetricsTable::to_csv() const {
  std::vector<MetricsRow> sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(), [](const MetricsRow& a, const MetricsRow& b) {
    if (a.method != b.method) return a.method < b.method;
    return a.horizon < b.horizon;
  });
  std::ostringstream out;
  out << "method,horizon,min_fde,min_ade,miss_rate\n";
  char buffer[160];
  for (const MetricsRow& r : sorted) {
    std::snprintf(buffer, sizeof(buffer), "%s,%d,%.9g,%.9g,%.9g\n", r.method.c_str(), r.horizon,
                  r.min_fde, r.min_ade, r.miss_rate);
    out << buffer;
  }
  return out.str();
}

void MetricsTable::append(const MetricsTable& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

Split split_dataset(std::vector<Sample> samples, std::size_t val_size, std::uint64_t seed) {
  if (val_size > samples.size()) throw InvalidInput("validation size exceeds dataset size");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng() % i]);
  Split split;
  split.train.reserve(samples.size() - val_size);
  split.val.reserve(val_size);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < val_size) split.val.push_back(std::move(samples[order[i]]));
    else split.train.push_back(std::move(samples[order[i]]));
  }
  return split;
}

Split prepare_split(const RunConfig& config) {
  std::vector<Sample> samples;
  if (!config.dataset_path.empty()) {
    samples = synthdata::read_jsonl(config.dataset_path);
    if (samples.size() < config.train_size + config.val_size)
      throw ArtifactError("dataset smaller than the configured train+val size");
    samples.resize(config.train_size + config.val_size);
  } else {
    samples = synthdata::generate(config.train_size + config.val_size, config.generator,
                                  config.sub_seed("dataset"));
  }
  return split_dataset(std::move(samples), config.val_size, config.sub_seed("split"));
}

MetricsTable evaluate(std::span<const std::map<int, ModeSet>> per_agent_predictions,
                      std::span<const Trajectory> futures, const HorizonSet& horizons,
                      double miss_threshold, const std::string& method) {
  if (per_agent_predictions.size() != futures.size())
    throw InvalidInput("evaluate: agent count mismatch");
  MetricsTable table;
  for (int f : horizons.values()) {
    const std::size_t steps = static_cast<std::size_t>(f);
    double sum_ade = 0.0, sum_fde = 0.0;
    std::size_t missed = 0;
    for (std::size_t i = 0; i < per_agent_predictions.size(); ++i) {
      auto it = per_agent_predictions[i].find(f);
      if (it == per_agent_predictions[i].end())
        throw InvalidInput("missing predictions for horizon " + std::to_string(f));
      const Trajectory gt = futures[i].prefix(steps);
      const trajgeo::BestModeMetrics m = trajgeo::best_mode_metrics(it->second, gt);
      sum_ade += m.min_ade;
      sum_fde += m.min_fde;
      if (m.min_fde > miss_threshold) ++missed;
    }
    const double n = static_cast<double>(per_agent_predictions.size());
    MetricsRow row;
    row.method = method;
    row.horizon = f;
    row.min_ade = per_agent_predictions.empty() ? 0.0 : sum_ade / n;
    row.min_fde = per_agent_predictions.empty() ? 0.0 : sum_fde / n;
    row.miss_rate = per_agent_predictions.empty() ? 0.0 : static_cast<double>(missed) / n;
    table.rows.push_back(row);
  }
  return table;
}

std::vector<std::map<int, ModeSet>> predict_all_horizons(const fsn::FsnModel& model,
                                                         std::span<const Sample> samples,
                                                         const HorizonSet& horizons) {
  std::vector<std::map<int, ModeSet>> predictions(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const fsn::EncoderLatent latent = fsn::encode(samples[i].history, model);
    for (int f : horizons.values())
      predictions[i].emplace(f, fsn::decode(latent, f, model).modes);
  });
  return predictions;
}

std::vector<std::map<int, ModeSet>> predict_truncated(const fsn::FsnModel& model,
                                                      std::span<const Sample> samples,
                                                      const HorizonSet& horizons) {
  const int top = model.config.horizons.max();
  std::vector<std::map<int, ModeSet>> predictions(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const fsn::EncoderLatent latent = fsn::encode(samples[i].history, model);
    const ModeSet full = fsn::decode(latent, top, model).modes;
    for (int f : horizons.values())
      predictions[i].emplace(f, truncate_modes(full, static_cast<std::size_t>(f)));
  });
  return predictions;
}

namespace {

// Single-horizon supervised model: the shared training loop with the bank
// reduced to {horizon} and distillation off.
std::pair<fsn::FsnModel, fsn::TrainLog> train_single_horizon(const Split& split,
                                                             const RunConfig& config, int horizon,
                                                             const std::string& stage) {
  fsn::FsnConfig model_config = config.model;
  model_config.horizons = HorizonSet({horizon});
  model_config.lambda = 0.0;
  fsn::FsnModel model = fsn::FsnModel::init(model_config, config.sub_seed("init-" + stage));
  const std::vector<scoring::HorizonLabel> labels =
      fixed_labels(split.train.size(), horizon, model_config.horizons);
  fsn::TrainLog log = fsn::train_fsn(model, split.train, labels, train_options(config, stage, true));
  return {std::move(model), std::move(log)};
}

}  // namespace

ItResult run_it(const Split& split, const RunConfig& config) {
  if (split.train.empty() || split.val.empty()) throw InvalidInput("empty dataset split");
  ItResult result;
  const std::vector<Trajectory> futures = future_of(split.val);
  for (int f : config.model.horizons.values()) {
    auto [model, log] = train_single_horizon(split, config, f, "it-" + std::to_string(f));
    const HorizonSet single({f});
    const std::vector<std::map<int, ModeSet>> preds =
        predict_all_horizons(model, split.val, single);
    MetricsTable rows = evaluate(preds, futures, single, config.miss_threshold, "it");
    result.table.append(rows);
    result.models.push_back(std::move(model));
    result.logs.push_back(std::move(log));
  }
  return result;
}

IrResult run_ir(const Split& split, const RunConfig& config) {
  if (split.train.empty() || split.val.empty()) throw InvalidInput("empty dataset split");
  const int top = config.model.horizons.max();
  auto [model, log] = train_single_horizon(split, config, top, "ir");
  const std::vector<Trajectory> futures = future_of(split.val);
  // The single-horizon bank only knows f = top; truncate its output manually.
  std::vector<std::map<int, ModeSet>> predictions(split.val.size());
  parallel_for(split.val.size(), [&](std::size_t i) {
    const fsn::EncoderLatent latent = fsn::encode(split.val[i].history, model);
    const ModeSet full = fsn::decode(latent, top, model).modes;
    for (int f : config.model.horizons.values())
      predictions[i].emplace(f, truncate_modes(full, static_cast<std::size_t>(f)));
  });
  IrResult result{std::move(model), std::move(log), {}};
  result.table = evaluate(predictions, futures, config.model.horizons, config.miss_threshold, "ir");
  return result;
}

std::vector<std::map<int, ModeSet>> collect_label_predictions(const RunConfig& config,
                                                              std::span<const Sample> samples,
                                                              const ItResult* collectors) {
  std::vector<std::map<int, ModeSet>> predictions(samples.size());
  if (!config.oracle_labels && collectors == nullptr)
    throw InvalidInput("label collection needs collector models or oracle mode");
  if (config.oracle_labels) {
    const std::uint64_t base_seed = config.sub_seed("oracle");
    parallel_for(samples.size(), [&](std::size_t i) {
      predictions[i] = synthdata::oracle_predictor(samples[i], config.model.horizons,
                                                   config.label_modes, config.oracle_noise,
                                                   base_seed + i);
    });
    return predictions;
  }
  if (collectors->models.size() != config.model.horizons.size())
    throw InvalidInput("collector count does not match the horizon set");
  parallel_for(samples.size(), [&](std::size_t i) {
    for (std::size_t h = 0; h < config.model.horizons.size(); ++h) {
      const int f = config.model.horizons[h];
      const fsn::EncoderLatent latent = fsn::encode(samples[i].history, collectors->models[h]);
      predictions[i].emplace(f, fsn::decode(latent, f, collectors->models[h]).modes);
    }
  });
  return predictions;
}

scoring::LabelDataset label_split(const RunConfig& config, std::span<const Sample> samples,
                                  const ItResult* collectors) {
  const std::vector<std::map<int, ModeSet>> predictions =
      collect_label_predictions(config, samples, collectors);
  std::vector<Trajectory> futures = future_of(samples);
  std::vector<std::string> ids;
  ids.reserve(samples.size());
  for (const Sample& s : samples) ids.push_back(s.agent_id);
  fdk::FdkParams params = config.model.fdk;
  params.epsilon = 0.0;  // distance interpretation
  return scoring::label_dataset(predictions, futures, ids, params, config.model.horizons,
                                config.score_kernel);
}

FsnResult run_fsn(const Split& split, const RunConfig& config, const ItResult* collectors) {
  if (split.train.empty() || split.val.empty()) throw InvalidInput("empty dataset split");
  FsnResult result;
  result.train_labels = label_split(config, split.train, collectors);
  const scoring::LabelDataset val_labels = label_split(config, split.val, collectors);

  fsn::FsnModel model = fsn::FsnModel::init(config.model, config.sub_seed("init-fsn"));
  result.apm_log = fsn::train_apm(model, split.train, result.train_labels.labels, split.val,
                                  val_labels.labels, train_options(config, "apm", true));
  fsn::TrainOptions fsn_options = train_options(config, "fsn", !config.freeze_encoder,
                                                config.balanced_classes);
  fsn_options.dense_horizons = config.dense_horizons;
  result.fsn_log = fsn::train_fsn(model, split.train, result.train_labels.labels, fsn_options);

  const std::vector<Trajectory> futures = future_of(split.val);
  const std::vector<std::map<int, ModeSet>> preds =
      predict_all_horizons(model, split.val, config.model.horizons);
  result.table = evaluate(preds, futures, config.model.horizons, config.miss_threshold, "fsn");

  // Adaptive row: every agent decoded at its APM-selected horizon.
  for (int f : config.model.horizons.values()) result.horizon_histogram[f] = 0;
  std::vector<int> selected(split.val.size(), 0);
  parallel_for(split.val.size(), [&](std::size_t i) {
    const fsn::EncoderLatent latent = fsn::encode(split.val[i].history, model);
    selected[i] = fsn::apm_forward(latent, model).f_pred;
  });
  double sum_ade = 0.0, sum_fde = 0.0;
  std::size_t missed = 0;
  for (std::size_t i = 0; i < split.val.size(); ++i) {
    result.horizon_histogram[selected[i]] += 1;
    const std::size_t steps = static_cast<std::size_t>(selected[i]);
    const trajgeo::BestModeMetrics m =
        trajgeo::best_mode_metrics(preds[i].at(selected[i]), futures[i].prefix(steps));
    sum_ade += m.min_ade;
    sum_fde += m.min_fde;
    if (m.min_fde > config.miss_threshold) ++missed;
  }
  const double n = static_cast<double>(split.val.size());
  MetricsRow adaptive;
  adaptive.method = "fsn-adaptive";
  adaptive.horizon = 0;
  adaptive.min_ade = sum_ade / n;
  adaptive.min_fde = sum_fde / n;
  adaptive.miss_rate = static_cast<double>(missed) / n;
  result.table.rows.push_back(adaptive);
  result.model = std::move(model);
  return result;
}

std::string AblationResult::to_csv() const {
  std::ostringstream out;
  out << "score_kernel,kl,min_fde,min_ade,miss_rate\n";
  char buffer[160];
  for (const AblationRow& row : rows) {
    std::snprintf(buffer, sizeof(buffer), "%s,%s,%.9g,%.9g,%.9g\n",
                  scoring::to_string(row.kernel).c_str(), row.kl_enabled ? "on" : "off",
                  row.metrics.min_fde, row.metrics.min_ade, row.metrics.miss_rate);
    out << buffer;
  }
  return out.str();
}

AblationResult ablation_scores(const Split& split, const RunConfig& config) {
  const std::pair<scoring::ScoreKernel, bool> grid[4] = {
      {scoring::ScoreKernel::kFde, false},
      {scoring::ScoreKernel::kAde, false},
      {scoring::ScoreKernel::kFdk, false},
      {scoring::ScoreKernel::kFdk, true},
  };
  AblationResult result;
  const int top = config.model.horizons.max();
  const HorizonSet top_only({top});
  const std::vector<Trajectory> futures = future_of(split.val);
  for (const auto& [kernel, kl_enabled] : grid) {
    RunConfig variant = config;
    variant.score_kernel = kernel;
    variant.oracle_labels = true;  // kernels compared on identical collected predictions
    variant.model.lambda = kl_enabled ? config.model.lambda : 0.0;
    FsnResult fsn_result = run_fsn(split, variant, nullptr);
    AblationRow row;
    row.kernel = kernel;
    row.kl_enabled = kl_enabled;
    for (const MetricsRow& r : fsn_result.table.rows)
      if (r.method == "fsn" && r.horizon == top) row.metrics = r;
    result.rows.push_back(row);
    result.logs.push_back(std::move(fsn_result.fsn_log));
  }
  return result;
}

void write_manifest(const std::string& path, const RunConfig& config,
                    const std::vector<std::string>& artifacts, double wall_clock_seconds) {
  nlohmann::json manifest;
  manifest["config"] = config.to_json();
  manifest["seeds"] = {{"master", config.seed},
                       {"dataset", config.sub_seed("dataset")},
                       {"split", config.sub_seed("split")},
                       {"init-fsn", config.sub_seed("init-fsn")}};
  manifest["artifacts"] = artifacts;
  manifest["wall_clock_seconds"] = wall_clock_seconds;
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ArtifactError("cannot write manifest: " + path);
  f << manifest.dump(2) << '\n';
}

}  // namespace fh::harness
