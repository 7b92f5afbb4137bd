// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors
//
// Horizon-normalized scoring of per-horizon predictions, optimal-horizon
// labeling and label-dataset construction.

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "fh/fdk.hpp"
#include "fh/trajgeo.hpp"

namespace fh::scoring {

using trajgeo::HorizonSet;
using trajgeo::ModeSet;
using trajgeo::Trajectory;

/// Distance measure used inside the score q = d/f. kFdk is the smooth kernel
/// default; kFrechetExact swaps in the exact discrete Fréchet distance; kAde
/// and kFde support the score-variant ablation.
enum class ScoreKernel { kFdk, kFrechetExact, kAde, kFde };

ScoreKernel score_kernel_from_string(const std::string& name);
std::string to_string(ScoreKernel kernel);

struct ScoreEntry {
  int horizon = 0;
  double distance = 0.0;  // d_f, best over modes
  double score = 0.0;     // q_f = d_f / f
};

/// All per-horizon entries for one agent.
struct ScoreTable {
  std::vector<ScoreEntry> entries;
};

struct HorizonLabel {
  std::string agent_id;
  int f_gt = 0;       // optimal step count
  double q = 0.0;     // best score
  std::vector<double> one_hot;  // indicator over the horizon classes
};

/// d / f.
double step_score(double distance, int f);

/// Scores predictions at every configured horizon against the ground truth
/// truncated to that horizon; d_f is the min over modes; the label horizon is
/// the score argmin with ties broken toward the smallest f.
std::pair<HorizonLabel, ScoreTable> best_horizon(
    const std::map<int, ModeSet>& preds_per_horizon, const Trajectory& gt,
    const fdk::FdkParams& params, const HorizonSet& horizons,
    ScoreKernel kernel = ScoreKernel::kFdk, const std::string& agent_id = "");

struct LabelDataset {
  std::vector<HorizonLabel> labels;
  std::vector<ScoreTable> tables;          // aligned with labels
  std::map<int, std::size_t> class_counts;  // labels per horizon
};

/// One label per agent via best_horizon; every agent must supply predictions
/// for every configured horizon.
LabelDataset label_dataset(std::span<const std::map<int, ModeSet>> fixed_horizon_predictions,
                           std::span<const Trajectory> gts, std::span<const std::string> agent_ids,
                           const fdk::FdkParams& params, const HorizonSet& horizons,
                           ScoreKernel kernel = ScoreKernel::kFdk);

/// JSONL persistence: one record per agent
/// {"agent_id":..., "f_gt":..., "scores":[{"f":..,"d":..,"q":..},...]}.
void write_labels_jsonl(const std::string& path, const LabelDataset& dataset);
LabelDataset read_labels_jsonl(const std::string& path, const HorizonSet& horizons);

}  // namespace fh::scoring
