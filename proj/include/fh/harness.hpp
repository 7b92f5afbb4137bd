// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors
//
// Experiment protocols: per-horizon isolated training (IT), intercepted
// results (IR), the full adaptive pipeline, per-horizon evaluation and the
// score-kernel/distillation ablation grid.

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "fh/config.hpp"
#include "fh/fsn.hpp"
#include "fh/scoring.hpp"
#include "fh/synthdata.hpp"
#include "fh/trajgeo.hpp"

namespace fh::harness {

using config::RunConfig;
using synthdata::Sample;
using trajgeo::HorizonSet;
using trajgeo::ModeSet;
using trajgeo::Trajectory;

struct MetricsRow {
  std::string method;
  int horizon = 0;  // 0 marks the adaptive row
  double min_fde = 0.0;
  double min_ade = 0.0;
  double miss_rate = 0.0;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
  /// "method,horizon,min_fde,min_ade,miss_rate" with one row per line;
  /// rows ordered by (method, horizon).
  std::string to_csv() const;
  void append(const MetricsTable& other);
};

/// Seeded 80/20-style split; records nothing itself, callers persist the
/// manifest.
struct Split {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

Split split_dataset(std::vector<Sample> samples, std::size_t val_size, std::uint64_t seed);

/// Builds the full dataset for a config: loads dataset_path when set,
/// otherwise generates train_size + val_size samples from the generator.
Split prepare_split(const RunConfig& config);

/// Metric rows over explicit per-agent per-horizon predictions.
MetricsTable evaluate(std::span<const std::map<int, ModeSet>> per_agent_predictions,
                      std::span<const Trajectory> futures, const HorizonSet& horizons,
                      double miss_threshold, const std::string& method);

/// Per-horizon predictions for every sample: the model decoded at each
/// horizon (exclusive sub-network activation). Parallelizes over agents,
/// capped by FLEXIHORIZON_THREADS.
std::vector<std::map<int, ModeSet>> predict_all_horizons(const fsn::FsnModel& model,
                                                         std::span<const Sample> samples,
                                                         const HorizonSet& horizons);

/// Predictions at the largest horizon truncated to each requested horizon.
std::vector<std::map<int, ModeSet>> predict_truncated(const fsn::FsnModel& model,
                                                      std::span<const Sample> samples,
                                                      const HorizonSet& horizons);

struct ItResult {
  std::vector<fsn::FsnModel> models;  // one per horizon
  std::vector<fsn::TrainLog> logs;
  MetricsTable table;
};

/// Trains one single-horizon model per configured horizon and evaluates each
/// at its own horizon.
ItResult run_it(const Split& split, const RunConfig& config);

struct IrResult {
  fsn::FsnModel model;
  fsn::TrainLog log;
  MetricsTable table;
};

/// Trains once at the largest horizon; per-horizon rows truncate the
/// predictions to their first f steps.
IrResult run_ir(const Split& split, const RunConfig& config);

/// Fixed-horizon prediction collection used for labeling: IT collector models
/// when available, otherwise the noise oracle.
std::vector<std::map<int, ModeSet>> collect_label_predictions(const RunConfig& config,
                                                              std::span<const Sample> samples,
                                                              const ItResult* collectors);

scoring::LabelDataset label_split(const RunConfig& config, std::span<const Sample> samples,
                                  const ItResult* collectors);

struct FsnResult {
  fsn::FsnModel model;
  fsn::TrainLog apm_log;
  fsn::TrainLog fsn_log;
  scoring::LabelDataset train_labels;
  MetricsTable table;                       // per-horizon rows + adaptive row
  std::map<int, std::size_t> horizon_histogram;  // APM selections on the val split
};

/// Full pipeline: label (via collectors or oracle), pre-train the horizon
/// classifier, train the decoder bank, evaluate per-horizon and adaptively.
FsnResult run_fsn(const Split& split, const RunConfig& config, const ItResult* collectors);

struct AblationRow {
  scoring::ScoreKernel kernel = scoring::ScoreKernel::kFdk;
  bool kl_enabled = false;
  MetricsRow metrics;  // at the largest horizon
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<fsn::TrainLog> logs;  // aligned with rows
  std::string to_csv() const;
};

/// The four-configuration grid: score kernel {fde, ade, fdk} without
/// distillation plus fdk with distillation.
AblationResult ablation_scores(const Split& split, const RunConfig& config);

/// Run manifest: effective config, seeds, artifact paths, wall clock.
void write_manifest(const std::string& path, const RunConfig& config,
                    const std::vector<std::string>& artifacts, double wall_clock_seconds);

}  // namespace fh::harness
