// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors
//
// Deterministic synthetic trajectory scenarios and JSONL dataset persistence.
// Scenario kinds are constructed so that the optimal prediction horizon
// varies: maneuvers that start `onset` steps into the future make long
// extrapolation poor, while steady motion favors long horizons.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fh/trajgeo.hpp"

namespace fh::synthdata {

using trajgeo::HorizonSet;
using trajgeo::ModeSet;
using trajgeo::Trajectory;

enum class ScenarioKind {
  kConstantVelocity,
  kConstantTurn,
  kLaneChange,
  kStopAndGo,
  kLateManeuver,
};

ScenarioKind scenario_kind_from_string(const std::string& name);
std::string to_string(ScenarioKind kind);

struct Scenario {
  ScenarioKind kind = ScenarioKind::kConstantVelocity;
  double speed = 8.0;          // m/s, >= 0
  double turn_rate = 0.0;      // rad/s
  std::size_t onset = 15;      // maneuver start, counted in future steps
  double noise_sigma = 0.05;   // meters, applied to history positions only
  std::uint64_t seed = 0;
};

struct Sample {
  std::string agent_id;
  ScenarioKind kind = ScenarioKind::kConstantVelocity;
  Trajectory history;  // T points
  Trajectory future;   // F points, noise-free regression target
};

struct GeneratorConfig {
  std::size_t history_len = 20;  // T
  std::size_t future_len = 30;   // F
  double dt = 0.1;
  double noise_sigma = 0.05;
  /// Mixture weights over the five scenario kinds, in enum order.
  std::vector<double> mixture = {0.25, 0.15, 0.15, 0.15, 0.30};
};

/// Simulates one scenario; pure function of its arguments.
Sample simulate(const Scenario& scenario, const GeneratorConfig& config,
                const std::string& agent_id);

/// n samples drawn from the configured mixture; pure function of (config, seed).
std::vector<Sample> generate(std::size_t n, const GeneratorConfig& config, std::uint64_t seed);

/// Fixed-horizon stand-in predictor for fast labeling pipelines: the ground
/// truth future truncated to each horizon, corrupted with noise that grows
/// with the step index.
std::map<int, ModeSet> oracle_predictor(const Sample& sample, const HorizonSet& horizons,
                                        std::size_t num_modes, double noise_scale,
                                        std::uint64_t seed);

/// One JSON record per line:
/// {"agent_id":..,"kind":..,"dt":..,"history":[[x,y]..],"future":[[x,y]..]}.
/// Paths ending in .gz read/write the gzip-compressed variant.
void write_jsonl(std::span<const Sample> samples, const std::string& path);
std::vector<Sample> read_jsonl(const std::string& path);

}  // namespace fh::synthdata
