// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors
//
// Adaptive-horizon prediction model: feedforward history encoder, horizon
// classifier head (APM), per-horizon decoder bank with exclusive activation,
// batch feature distillation and the combined training objective.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fh/fdk.hpp"
#include "fh/nnet.hpp"
#include "fh/scoring.hpp"
#include "fh/synthdata.hpp"
#include "fh/trajgeo.hpp"

namespace fh::fsn {

using scoring::HorizonLabel;
using synthdata::Sample;
using trajgeo::HorizonSet;
using trajgeo::ModeSet;
using trajgeo::Point2;
using trajgeo::Trajectory;

/// Rigid transform between world coordinates and the agent-centric frame:
/// origin at the last observed point, last displacement rotated onto +x.
struct Frame {
  Point2 origin{0.0, 0.0};
  double c = 1.0;  // cos(heading)
  double s = 0.0;  // sin(heading)

  Point2 to_local(Point2 world) const {
    const double dx = world.x - origin.x;
    const double dy = world.y - origin.y;
    return {c * dx + s * dy, -s * dx + c * dy};
  }
  Point2 to_world(Point2 local) const {
    return {origin.x + c * local.x - s * local.y, origin.y + s * local.x + c * local.y};
  }
};

/// Per-mode latent vectors plus the frame they were computed in.
struct EncoderLatent {
  nnet::Tensor modes;  // {K, D}
  Frame frame;
  double dt = 0.1;  // carried from the history so decoded modes inherit it
};

enum class RegressionLoss { kHuber, kLaplace };

RegressionLoss regression_from_string(const std::string& name);
std::string to_string(RegressionLoss r);

struct FsnConfig {
  std::size_t history_len = 20;  // T
  HorizonSet horizons{std::vector<int>{5, 10, 15, 20, 25, 30}};
  std::size_t num_modes = 6;   // K
  std::size_t latent_dim = 64;  // D
  std::vector<std::size_t> encoder_hidden{64, 64};
  std::vector<std::size_t> apm_hidden{64, 64};
  std::vector<std::size_t> decoder_hidden{64, 128};
  nnet::Activation activation = nnet::Activation::kRelu;
  RegressionLoss regression = RegressionLoss::kHuber;
  double huber_delta = 1.0;
  double lambda = 0.5;  // KL distillation weight
  fdk::FdkParams fdk;

  void validate() const;
};

struct FsnModel {
  FsnConfig config;
  nnet::MlpParams encoder;
  nnet::Tensor mode_embed;  // {K, D}
  nnet::MlpParams apm_head;
  std::vector<nnet::MlpParams> decoders;  // one sub-network per horizon

  nnet::MlpSpec encoder_spec() const;
  nnet::MlpSpec apm_spec() const;
  nnet::MlpSpec decoder_spec(std::size_t horizon_index) const;
  /// Trajectory coordinates (+scales for the Laplace head) plus one mode logit.
  std::size_t decoder_output_dim(int horizon) const;

  static FsnModel init(const FsnConfig& config, std::uint64_t seed);

  /// Named parameter blocks in a fixed order (checkpoint block names).
  std::vector<std::pair<std::string, nnet::Tensor*>> param_blocks();
  std::vector<std::pair<std::string, const nnet::Tensor*>> param_blocks() const;

  void save(const std::string& path) const;
  /// Loads and verifies the checkpoint against `config`; shape or meta
  /// mismatches raise ArtifactError.
  static FsnModel load(const std::string& path, const FsnConfig& config);
};

/// Gradients shaped exactly like the model parameters; blocks that no sample
/// activates stay identically zero.
struct FsnGradients {
  nnet::MlpParams encoder;
  nnet::Tensor mode_embed;
  nnet::MlpParams apm_head;
  std::vector<nnet::MlpParams> decoders;

  static FsnGradients zeros_like(const FsnModel& model);
  void zero();  // reset all values in place, keeping shapes and addresses
  std::vector<nnet::Tensor*> blocks();  // same order as FsnModel::param_blocks
};

EncoderLatent encode(const Trajectory& history, const FsnModel& model);

struct ApmOutput {
  nnet::Tensor horizon_probs;
  int f_pred = 0;     // argmax horizon, ties toward the smallest
  double f_soft = 0.0;  // probability-weighted expected horizon
};

ApmOutput apm_forward(const EncoderLatent& latent, const FsnModel& model);

struct ApmLossValue {
  double cls = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

ApmLossValue apm_loss(const ApmOutput& output, const HorizonLabel& label,
                      const HorizonSet& horizons);

struct DecodeResult {
  ModeSet modes;                     // world frame
  std::vector<nnet::Tensor> scales;  // per mode, Laplace head only
  nnet::Tensor features;             // penultimate activations, mean over modes
};

/// Runs only the sub-network for `horizon`.
DecodeResult decode(const EncoderLatent& latent, int horizon, const FsnModel& model);

/// Mean KL(softmax(student), softmax(teacher)) pairing each below-median
/// sample (by score, lower is better) with the batch-best sample. Batches of
/// fewer than two samples skip distillation and return 0.
double kl_feature_distill(std::span<const nnet::Tensor> features, std::span<const double> scores);

struct FsnLossValue {
  double reg = 0.0;
  double cls = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

/// Combined objective over a batch decoded at the labeled horizons:
/// winner-take-all regression + best-mode classification + lambda * KL.
/// When `grads` is non-null it receives exact gradients for every block.
FsnLossValue fsn_batch_loss(const FsnModel& model, std::span<const Sample> batch,
                            std::span<const HorizonLabel> labels, FsnGradients* grads = nullptr);

struct TrainOptions {
  nnet::AdamWConfig optim;
  std::size_t epochs = 64;
  std::size_t batch_size = 32;
  std::uint64_t shuffle_seed = 0;
  bool train_encoder = true;
  /// Round-robin the label classes when scheduling batches so sub-networks
  /// with few labeled samples still receive a steady share of updates.
  bool balanced_classes = false;
  /// Supervise every configured horizon for each batch (gradients averaged
  /// over horizons) instead of only the labeled one. Keeps per-batch
  /// exclusivity semantics while every sub-network sees the full data.
  bool dense_horizons = false;
};

struct TrainLogRow {
  std::size_t epoch = 0;
  double reg = 0.0;
  double cls = 0.0;
  double kl = 0.0;
  double total = 0.0;
  double accuracy = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  std::string to_csv() const;
};

/// Pre-trains encoder + APM head on horizon labels; logs per-epoch losses and
/// held-out classification accuracy.
TrainLog train_apm(FsnModel& model, std::span<const Sample> train,
                   std::span<const HorizonLabel> train_labels, std::span<const Sample> heldout,
                   std::span<const HorizonLabel> heldout_labels, const TrainOptions& options);

/// Fraction of samples whose APM argmax matches the label.
double apm_accuracy(const FsnModel& model, std::span<const Sample> samples,
                    std::span<const HorizonLabel> labels);

/// Trains decoder bank (+ encoder unless frozen) on fsn_batch_loss with each
/// sample teacher-forced to its labeled horizon. The APM head is not updated.
TrainLog train_fsn(FsnModel& model, std::span<const Sample> train,
                   std::span<const HorizonLabel> labels, const TrainOptions& options);

struct InferResult {
  int horizon = 0;
  ModeSet modes;
};

/// encode -> APM -> decode at the selected horizon. `forced_horizon` > 0
/// bypasses the APM.
InferResult infer(const Trajectory& history, const FsnModel& model, int forced_horizon = 0);

}  // namespace fh::fsn
