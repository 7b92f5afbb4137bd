// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors

#include "fh/scoring.hpp"

#include <fstream>
#include <limits>

#include <json.hpp>

#include "fh/errors.hpp"

namespace fh::scoring {

ScoreKernel score_kernel_from_string(const std::string& name) {
  if (name == "fdk") return ScoreKernel::kFdk;
  if (name == "frechet") return ScoreKernel::kFrechetExact;
  if (name == "ade") return ScoreKernel::kAde;
  if (name == "fde") return ScoreKernel::kFde;
  throw ConfigError("unknown score kernel: " + name);
}

std::string to_string(ScoreKernel kernel) {
  switch (kernel) {
    case ScoreKernel::kFdk: return "fdk";
    case ScoreKernel::kFrechetExact: return "frechet";
    case ScoreKernel::kAde: return "ade";
    case ScoreKernel::kFde: return "fde";
  }
  return "fdk";
}

double step_score(double distance, int f) {
  if (f < 1) throw InvalidInput("step count must be >= 1");
  if (distance < 0.0) throw InvalidInput("distance must be non-negative");
  return distance / static_cast<double>(f);
}

namespace {

double kernel_distance(const Trajectory& pred, const Trajectory& gt, const fdk::FdkParams& params,
                       ScoreKernel kernel) {
  switch (kernel) {
    case ScoreKernel::kFdk: return fdk::fdk_distance(pred, gt, params);
    case ScoreKernel::kFrechetExact: return trajgeo::discrete_frechet(pred, gt);
    case ScoreKernel::kAde: return trajgeo::ade(pred, gt);
    case ScoreKernel::kFde: return trajgeo::fde(pred, gt);
  }
  throw InvalidInput("unknown score kernel");
}

}  // namespace

std::pair<HorizonLabel, ScoreTable> best_horizon(
    const std::map<int, ModeSet>& preds_per_horizon, const Trajectory& gt,
    const fdk::FdkParams& params, const HorizonSet& horizons, ScoreKernel kernel,
    const std::string& agent_id) {
  ScoreTable table;
  int best_f = 0;
  double best_q = std::numeric_limits<double>::infinity();
  for (int f : horizons.values()) {
    auto it = preds_per_horizon.find(f);
    if (it == preds_per_horizon.end())
      throw InvalidInput("missing predictions for horizon " + std::to_string(f));
    if (static_cast<std::size_t>(f) > gt.size())
      throw InvalidInput("horizon " + std::to_string(f) + " exceeds ground-truth length");
    const Trajectory gt_f = gt.prefix(static_cast<std::size_t>(f));
    double d = std::numeric_limits<double>::infinity();
    for (const Trajectory& mode : it->second.trajectories) {
      if (mode.size() != static_cast<std::size_t>(f))
        throw InvalidInput("mode length does not match horizon " + std::to_string(f));
      d = std::min(d, kernel_distance(mode, gt_f, params, kernel));
    }
    const double q = step_score(d, f);
    table.entries.push_back({f, d, q});
    if (q < best_q) {  // strict: ties keep the smallest f
      best_q = q;
      best_f = f;
    }
  }
  HorizonLabel label;
  label.agent_id = agent_id;
  label.f_gt = best_f;
  label.q = best_q;
  label.one_hot.assign(horizons.size(), 0.0);
  label.one_hot[horizons.index_of(best_f)] = 1.0;
  return {std::move(label), std::move(table)};
}

LabelDataset label_dataset(std::span<const std::map<int, ModeSet>> fixed_horizon_predictions,
                           std::span<const Trajectory> gts, std::span<const std::string> agent_ids,
                           const fdk::FdkParams& params, const HorizonSet& horizons,
                           ScoreKernel kernel) {
  if (fixed_horizon_predictions.size() != gts.size() || gts.size() != agent_ids.size())
    throw InvalidInput("label_dataset: agent count mismatch");
  LabelDataset out;
  for (int f : horizons.values()) out.class_counts[f] = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    auto [label, table] =
        best_horizon(fixed_horizon_predictions[i], gts[i], params, horizons, kernel, agent_ids[i]);
    out.class_counts[label.f_gt] += 1;
    out.labels.push_back(std::move(label));
    out.tables.push_back(std::move(table));
  }
  return out;
}

void write_labels_jsonl(const std::string& path, const LabelDataset& dataset) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ArtifactError("cannot open labels file for writing: " + path);
  for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
    const HorizonLabel& label = dataset.labels[i];
    nlohmann::json scores = nlohmann::json::array();
    for (const ScoreEntry& e : dataset.tables[i].entries)
      scores.push_back({{"f", e.horizon}, {"d", e.distance}, {"q", e.score}});
    nlohmann::json rec = {
        {"agent_id", label.agent_id}, {"f_gt", label.f_gt}, {"scores", std::move(scores)}};
    f << rec.dump() << '\n';
  }
  if (!f) throw ArtifactError("labels write failed: " + path);
}

LabelDataset read_labels_jsonl(const std::string& path, const HorizonSet& horizons) {
  std::ifstream f(path);
  if (!f) throw ArtifactError("cannot open labels file: " + path);
  LabelDataset out;
  for (int h : horizons.values()) out.class_counts[h] = 0;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(f, line)) {
    ++line_number;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, line_number, e.what());
    }
    try {
      HorizonLabel label;
      label.agent_id = rec.at("agent_id").get<std::string>();
      label.f_gt = rec.at("f_gt").get<int>();
      ScoreTable table;
      for (const auto& s : rec.at("scores")) {
        ScoreEntry e;
        e.horizon = s.at("f").get<int>();
        e.distance = s.at("d").get<double>();
        e.score = s.at("q").get<double>();
        table.entries.push_back(e);
      }
      label.one_hot.assign(horizons.size(), 0.0);
      label.one_hot[horizons.index_of(label.f_gt)] = 1.0;
      for (const ScoreEntry& e : table.entries)
        if (e.horizon == label.f_gt) label.q = e.score;
      out.class_counts[label.f_gt] += 1;
      out.labels.push_back(std::move(label));
      out.tables.push_back(std::move(table));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, line_number, e.what());
    } catch (const InvalidInput& e) {
      throw ParseError(path, line_number, e.what());
    }
  }
  return out;
}

}  // namespace fh::scoring
