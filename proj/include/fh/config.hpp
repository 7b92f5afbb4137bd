// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors
//
// Run configuration: a flat sectioned key-value file with CLI overrides.
// Unknown keys are rejected; the effective config is echoed into manifests.

#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "fh/fsn.hpp"
#include "fh/nnet.hpp"
#include "fh/scoring.hpp"
#include "fh/synthdata.hpp"

namespace fh::config {

struct RunConfig {
  // [dataset]
  std::string dataset_path;  // when set, loaded instead of generated
  std::size_t train_size = 2000;
  std::size_t val_size = 500;
  synthdata::GeneratorConfig generator;

  // [model] + [horizons] + [fdk]
  fsn::FsnConfig model;
  bool freeze_encoder = false;  // encoder updates during the joint training stage

  // [optim]
  nnet::AdamWConfig optim;
  std::size_t epochs = 64;
  std::size_t batch_size = 32;
  bool balanced_classes = false;  // class-balanced batch schedule for the decoder bank
  bool dense_horizons = true;     // supervise every horizon per batch in the fsn stage

  // [scoring]
  scoring::ScoreKernel score_kernel = scoring::ScoreKernel::kFdk;
  bool oracle_labels = false;  // label from the noise oracle instead of collectors
  double oracle_noise = 1.0;
  std::size_t label_modes = 6;

  // [eval]
  double miss_threshold = 2.0;

  // [run]
  std::uint64_t seed = 7;
  std::string outdir = "out";
  std::string protocol = "fsn";

  /// Named sub-seed derived from the master seed ("dataset", "init", "shuffle").
  std::uint64_t sub_seed(const std::string& name) const;

  /// Parses the sectioned key=value file; throws ConfigError on unknown keys.
  static RunConfig from_file(const std::string& path);

  /// Applies one "section.key=value" override (CLI flags).
  void apply_override(const std::string& assignment);

  void validate() const;

  nlohmann::json to_json() const;
};

}  // namespace fh::config
