// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors

#include "fh/fsn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "fh/errors.hpp"

namespace fh::fsn {

namespace {

constexpr double kScaleFloor = 1e-3;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Mean Euclidean step error between two flat [x0,y0,x1,y1,...] tensors.
double flat_ade(const nnet::Tensor& a, const nnet::Tensor& b) {
  const std::size_t steps = a.size() / 2;
  double sum = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double dx = a[2 * t] - b[2 * t];
    const double dy = a[2 * t + 1] - b[2 * t + 1];
    sum += std::sqrt(dx * dx + dy * dy);
  }
  return sum / static_cast<double>(steps);
}

nnet::Tensor flatten_local_future(const Trajectory& future, std::size_t steps,
                                  const Frame& frame) {
  nnet::Tensor out = nnet::Tensor::zeros({steps * 2});
  for (std::size_t t = 0; t < steps; ++t) {
    const Point2 local = frame.to_local(future[t]);
    out[2 * t] = local.x;
    out[2 * t + 1] = local.y;
  }
  return out;
}

}  // namespace

RegressionLoss regression_from_string(const std::string& name) {
  if (name == "huber") return RegressionLoss::kHuber;
  if (name == "laplace") return RegressionLoss::kLaplace;
  throw ConfigError("unknown regression loss: " + name);
}

std::string to_string(RegressionLoss r) {
  return r == RegressionLoss::kHuber ? "huber" : "laplace";
}

void FsnConfig::validate() const {
  if (history_len < 2) throw InvalidInput("history length must be at least 2");
  if (num_modes == 0) throw InvalidInput("mode count must be positive");
  if (latent_dim == 0) throw InvalidInput("latent width must be positive");
  if (lambda < 0.0) throw InvalidInput("lambda must be non-negative");
  if (!(huber_delta > 0.0)) throw InvalidInput("huber delta must be positive");
  if (decoder_hidden.empty())
    throw InvalidInput("decoder sub-networks need at least one hidden layer");
  fdk.validate();
}

nnet::MlpSpec FsnModel::encoder_spec() const {
  nnet::MlpSpec spec;
  spec.widths.push_back(2 * (config.history_len - 1));
  for (std::size_t w : config.encoder_hidden) spec.widths.push_back(w);
  spec.widths.push_back(config.latent_dim);
  spec.activation = config.activation;
  return spec;
}

nnet::MlpSpec FsnModel::apm_spec() const {
  nnet::MlpSpec spec;
  spec.widths.push_back(config.latent_dim);
  for (std::size_t w : config.apm_hidden) spec.widths.push_back(w);
  spec.widths.push_back(config.horizons.size());
  spec.activation = config.activation;
  return spec;
}

std::size_t FsnModel::decoder_output_dim(int horizon) const {
  const std::size_t coords = 2 * static_cast<std::size_t>(horizon);
  const std::size_t scales = config.regression == RegressionLoss::kLaplace ? coords : 0;
  return coords + scales + 1;  // +1 mode logit
}

nnet::MlpSpec FsnModel::decoder_spec(std::size_t horizon_index) const {
  nnet::MlpSpec spec;
  spec.widths.push_back(config.latent_dim);
  for (std::size_t w : config.decoder_hidden) spec.widths.push_back(w);
  spec.widths.push_back(decoder_output_dim(config.horizons[horizon_index]));
  spec.activation = config.activation;
  return spec;
}

FsnModel FsnModel::init(const FsnConfig& config, std::uint64_t seed) {
  config.validate();
  FsnModel model;
  model.config = config;
  nnet::MlpSpec enc = model.encoder_spec();
  enc.seed = seed;
  model.encoder = nnet::init_mlp(enc);
  model.mode_embed = nnet::Tensor::zeros({config.num_modes, config.latent_dim});
  {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    const double bound = std::sqrt(6.0 / static_cast<double>(2 * config.latent_dim));
    for (double& v : model.mode_embed.values)
      v = (2.0 * nnet::uniform_unit(rng()) - 1.0) * bound;
  }
  nnet::MlpSpec apm = model.apm_spec();
  apm.seed = seed + 1;
  model.apm_head = nnet::init_mlp(apm);
  for (std::size_t h = 0; h < config.horizons.size(); ++h) {
    nnet::MlpSpec dec = model.decoder_spec(h);
    dec.seed = seed + 2 + h;
    model.decoders.push_back(nnet::init_mlp(dec));
  }
  return model;
}

namespace {

template <typename Model, typename TensorPtr>
std::vector<std::pair<std::string, TensorPtr>> collect_blocks(Model& model) {
  std::vector<std::pair<std::string, TensorPtr>> blocks;
  auto add_mlp = [&blocks](const std::string& prefix, auto& params) {
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      blocks.emplace_back(prefix + "/w" + std::to_string(l), &params.weights[l]);
      blocks.emplace_back(prefix + "/b" + std::to_string(l), &params.biases[l]);
    }
  };
  add_mlp("encoder", model.encoder);
  blocks.emplace_back("encoder/mode_embed", &model.mode_embed);
  add_mlp("apm", model.apm_head);
  for (std::size_t h = 0; h < model.decoders.size(); ++h)
    add_mlp("decoder/" + std::to_string(model.config.horizons[h]), model.decoders[h]);
  return blocks;
}

}  // namespace

std::vector<std::pair<std::string, nnet::Tensor*>> FsnModel::param_blocks() {
  return collect_blocks<FsnModel, nnet::Tensor*>(*this);
}

std::vector<std::pair<std::string, const nnet::Tensor*>> FsnModel::param_blocks() const {
  return collect_blocks<const FsnModel, const nnet::Tensor*>(*this);
}

void FsnModel::save(const std::string& path) const {
  std::vector<std::pair<std::string, const nnet::Tensor*>> blocks = param_blocks();
  nnet::Tensor schema = nnet::Tensor::vector(
      {static_cast<double>(config.history_len), static_cast<double>(config.num_modes),
       static_cast<double>(config.latent_dim), static_cast<double>(static_cast<int>(config.activation)),
       static_cast<double>(static_cast<int>(config.regression)), config.huber_delta, config.lambda});
  std::vector<double> hs;
  for (int f : config.horizons.values()) hs.push_back(static_cast<double>(f));
  nnet::Tensor horizons = nnet::Tensor::vector(hs);
  blocks.emplace_back("meta/schema", &schema);
  blocks.emplace_back("meta/horizons", &horizons);
  nnet::save_checkpoint(path, blocks);
}

FsnModel FsnModel::load(const std::string& path, const FsnConfig& config) {
  const std::map<std::string, nnet::Tensor> blocks = nnet::load_checkpoint(path);
  FsnModel model = FsnModel::init(config, 0);

  auto meta = blocks.find("meta/schema");
  auto horizons = blocks.find("meta/horizons");
  if (meta == blocks.end() || horizons == blocks.end())
    throw ArtifactError("checkpoint missing meta blocks: " + path);
  const nnet::Tensor& schema = meta->second;
  if (schema.size() != 7 || schema[0] != static_cast<double>(config.history_len) ||
      schema[1] != static_cast<double>(config.num_modes) ||
      schema[2] != static_cast<double>(config.latent_dim) ||
      schema[3] != static_cast<double>(static_cast<int>(config.activation)) ||
      schema[4] != static_cast<double>(static_cast<int>(config.regression)))
    throw ArtifactError("checkpoint incompatible with configuration: " + path);
  std::vector<double> hs;
  for (int f : config.horizons.values()) hs.push_back(static_cast<double>(f));
  if (horizons->second.values != hs)
    throw ArtifactError("checkpoint horizon set mismatch: " + path);

  for (auto& [name, tensor] : model.param_blocks()) {
    auto it = blocks.find(name);
    if (it == blocks.end()) throw ArtifactError("checkpoint missing block " + name + ": " + path);
    if (it->second.shape != tensor->shape)
      throw ArtifactError("checkpoint block shape mismatch for " + name + ": " + path);
    *tensor = it->second;
  }
  return model;
}

FsnGradients FsnGradients::zeros_like(const FsnModel& model) {
  FsnGradients g;
  auto zero_mlp = [](const nnet::MlpParams& p) {
    nnet::MlpParams z;
    for (const nnet::Tensor& w : p.weights) z.weights.push_back(nnet::Tensor::zeros(w.shape));
    for (const nnet::Tensor& b : p.biases) z.biases.push_back(nnet::Tensor::zeros(b.shape));
    return z;
  };
  g.encoder = zero_mlp(model.encoder);
  g.mode_embed = nnet::Tensor::zeros(model.mode_embed.shape);
  g.apm_head = zero_mlp(model.apm_head);
  for (const nnet::MlpParams& d : model.decoders) g.decoders.push_back(zero_mlp(d));
  return g;
}

void FsnGradients::zero() {
  auto zero_mlp = [](nnet::MlpParams& p) {
    for (nnet::Tensor& w : p.weights) std::fill(w.values.begin(), w.values.end(), 0.0);
    for (nnet::Tensor& b : p.biases) std::fill(b.values.begin(), b.values.end(), 0.0);
  };
  zero_mlp(encoder);
  std::fill(mode_embed.values.begin(), mode_embed.values.end(), 0.0);
  zero_mlp(apm_head);
  for (nnet::MlpParams& d : decoders) zero_mlp(d);
}

std::vector<nnet::Tensor*> FsnGradients::blocks() {
  std::vector<nnet::Tensor*> out;
  auto add_mlp = [&out](nnet::MlpParams& params) {
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      out.push_back(&params.weights[l]);
      out.push_back(&params.biases[l]);
    }
  };
  add_mlp(encoder);
  out.push_back(&mode_embed);
  add_mlp(apm_head);
  for (nnet::MlpParams& d : decoders) add_mlp(d);
  return out;
}

namespace {

struct EncodeCache {
  nnet::Tensor input;  // flattened normalized displacements
  nnet::MlpCache mlp;
};

Frame history_frame(const Trajectory& history) {
  Frame frame;
  frame.origin = history.back();
  const Point2 last_disp = history[history.size() - 1] - history[history.size() - 2];
  const double norm = std::sqrt(last_disp.x * last_disp.x + last_disp.y * last_disp.y);
  if (norm > 1e-12) {
    frame.c = last_disp.x / norm;
    frame.s = last_disp.y / norm;
  }
  return frame;
}

EncoderLatent encode_internal(const Trajectory& history, const FsnModel& model,
                              EncodeCache* cache) {
  if (history.size() != model.config.history_len)
    throw InvalidInput("history length does not match the configured T");
  const Frame frame = history_frame(history);
  const std::vector<Point2> disp = trajgeo::relative_displacements(history);
  nnet::Tensor input = nnet::Tensor::zeros({2 * disp.size()});
  for (std::size_t t = 0; t < disp.size(); ++t) {
    // Rotation only: displacements are already translation-invariant.
    input[2 * t] = frame.c * disp[t].x + frame.s * disp[t].y;
    input[2 * t + 1] = -frame.s * disp[t].x + frame.c * disp[t].y;
  }
  const nnet::Tensor base = nnet::mlp_forward(model.encoder_spec(), model.encoder, input,
                                              cache != nullptr ? &cache->mlp : nullptr);
  if (cache != nullptr) cache->input = input;
  EncoderLatent latent;
  latent.frame = frame;
  latent.dt = history.dt;
  latent.modes = nnet::Tensor::zeros({model.config.num_modes, model.config.latent_dim});
  for (std::size_t k = 0; k < model.config.num_modes; ++k)
    for (std::size_t d = 0; d < model.config.latent_dim; ++d)
      latent.modes.at(k, d) = base[d] + model.mode_embed.at(k, d);
  return latent;
}

nnet::Tensor pooled_latent(const EncoderLatent& latent, const FsnModel& model) {
  const std::size_t k = model.config.num_modes;
  const std::size_t d = model.config.latent_dim;
  nnet::Tensor pooled = nnet::Tensor::zeros({d});
  for (std::size_t mode = 0; mode < k; ++mode)
    for (std::size_t i = 0; i < d; ++i) pooled[i] += latent.modes.at(mode, i);
  for (double& v : pooled.values) v /= static_cast<double>(k);
  return pooled;
}

ApmOutput apm_from_probs(nnet::Tensor probs, const HorizonSet& horizons) {
  ApmOutput out;
  double best = -1.0;
  double soft = 0.0;
  for (std::size_t j = 0; j < horizons.size(); ++j) {
    soft += probs[j] * static_cast<double>(horizons[j]);
    if (probs[j] > best) {  // strict: ties keep the smallest horizon
      best = probs[j];
      out.f_pred = horizons[j];
    }
  }
  out.f_soft = soft;
  out.horizon_probs = std::move(probs);
  return out;
}

struct ModeForward {
  nnet::MlpCache cache;
  nnet::Tensor traj;    // {2f} local coordinates
  nnet::Tensor raw_scale;  // {2f} pre-softplus, Laplace only
  double logit = 0.0;
  nnet::Tensor penultimate;  // last hidden post-activation
};

ModeForward decode_mode(const FsnModel& model, std::size_t horizon_index,
                        const nnet::Tensor& mode_latent, bool want_cache) {
  const nnet::MlpSpec spec = model.decoder_spec(horizon_index);
  ModeForward out;
  const nnet::Tensor raw = nnet::mlp_forward(spec, model.decoders[horizon_index], mode_latent,
                                             want_cache ? &out.cache : nullptr);
  const int f = model.config.horizons[horizon_index];
  const std::size_t coords = 2 * static_cast<std::size_t>(f);
  // The head emits per-step displacements; positions are their running sum,
  // so a zero-initialized sub-network stays at the frame origin.
  out.traj = nnet::Tensor::zeros({coords});
  double cx = 0.0, cy = 0.0;
  for (std::size_t t = 0; t < coords / 2; ++t) {
    cx += raw[2 * t];
    cy += raw[2 * t + 1];
    out.traj[2 * t] = cx;
    out.traj[2 * t + 1] = cy;
  }
  if (model.config.regression == RegressionLoss::kLaplace) {
    out.raw_scale = nnet::Tensor::zeros({coords});
    for (std::size_t i = 0; i < coords; ++i) out.raw_scale[i] = raw[coords + i];
  }
  out.logit = raw[raw.size() - 1];
  if (want_cache && spec.num_layers() >= 2)
    out.penultimate = out.cache.post[spec.num_layers() - 2];
  return out;
}

nnet::Tensor mode_latent_row(const EncoderLatent& latent, std::size_t k, std::size_t dim) {
  nnet::Tensor row = nnet::Tensor::zeros({dim});
  for (std::size_t d = 0; d < dim; ++d) row[d] = latent.modes.at(k, d);
  return row;
}

}  // namespace

EncoderLatent encode(const Trajectory& history, const FsnModel& model) {
  return encode_internal(history, model, nullptr);
}

ApmOutput apm_forward(const EncoderLatent& latent, const FsnModel& model) {
  if (latent.modes.shape != std::vector<std::size_t>{model.config.num_modes,
                                                     model.config.latent_dim})
    throw InvalidInput("latent dimensions do not match the model");
  const nnet::Tensor pooled = pooled_latent(latent, model);
  const nnet::Tensor logits = nnet::mlp_forward(model.apm_spec(), model.apm_head, pooled);
  return apm_from_probs(nnet::softmax(logits), model.config.horizons);
}

ApmLossValue apm_loss(const ApmOutput& output, const HorizonLabel& label,
                      const HorizonSet& horizons) {
  const std::size_t cls_index = horizons.index_of(label.f_gt);  // throws when outside
  nnet::Tensor one_hot = nnet::Tensor::zeros({horizons.size()});
  one_hot[cls_index] = 1.0;
  ApmLossValue loss;
  loss.cls = nnet::cross_entropy(output.horizon_probs, one_hot);
  const double diff = output.f_soft - static_cast<double>(label.f_gt);
  loss.reg = diff * diff;
  loss.total = loss.cls + loss.reg;
  return loss;
}

DecodeResult decode(const EncoderLatent& latent, int horizon, const FsnModel& model) {
  if (latent.modes.shape != std::vector<std::size_t>{model.config.num_modes,
                                                     model.config.latent_dim})
    throw InvalidInput("latent dimensions do not match the model");
  const std::size_t idx = model.config.horizons.index_of(horizon);  // throws when absent
  const std::size_t k = model.config.num_modes;
  DecodeResult out;
  nnet::Tensor logits = nnet::Tensor::zeros({k});
  for (std::size_t mode = 0; mode < k; ++mode) {
    const nnet::Tensor row = mode_latent_row(latent, mode, model.config.latent_dim);
    ModeForward fwd = decode_mode(model, idx, row, true);
    logits[mode] = fwd.logit;
    if (out.features.size() == 0) out.features = nnet::Tensor::zeros(fwd.penultimate.shape);
    for (std::size_t i = 0; i < fwd.penultimate.size(); ++i)
      out.features[i] += fwd.penultimate[i] / static_cast<double>(k);
    Trajectory traj;
    traj.dt = latent.dt;
    const std::size_t steps = static_cast<std::size_t>(horizon);
    traj.points.resize(steps);
    for (std::size_t t = 0; t < steps; ++t)
      traj.points[t] = latent.frame.to_world({fwd.traj[2 * t], fwd.traj[2 * t + 1]});
    out.modes.trajectories.push_back(std::move(traj));
    if (model.config.regression == RegressionLoss::kLaplace) {
      nnet::Tensor scale = nnet::Tensor::zeros({2 * steps});
      for (std::size_t i = 0; i < scale.size(); ++i)
        scale[i] = kScaleFloor + softplus(fwd.raw_scale[i]);
      out.scales.push_back(std::move(scale));
    }
  }
  const nnet::Tensor probs = nnet::softmax(logits);
  out.modes.probs.assign(probs.values.begin(), probs.values.end());
  return out;
}

double kl_feature_distill(std::span<const nnet::Tensor> features, std::span<const double> scores) {
  if (features.size() != scores.size())
    throw InvalidInput("feature/score count mismatch in distillation");
  const std::size_t batch = features.size();
  if (batch < 2) return 0.0;
  std::vector<std::size_t> order(batch);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a < b;
  });
  const nnet::Tensor teacher = nnet::softmax(features[order[0]]);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t pos = 0; pos < batch; ++pos) {
    if (2 * pos <= batch - 1) continue;  // keep the at-or-above-median half
    sum += nnet::kl_divergence(nnet::softmax(features[order[pos]]), teacher);
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

FsnLossValue fsn_batch_loss(const FsnModel& model, std::span<const Sample> batch,
                            std::span<const HorizonLabel> labels, FsnGradients* grads) {
  if (batch.size() != labels.size()) throw InvalidInput("batch/label count mismatch");
  if (batch.empty()) throw InvalidInput("empty batch");
  const std::size_t batch_size = batch.size();
  const std::size_t num_modes = model.config.num_modes;
  const std::size_t latent_dim = model.config.latent_dim;
  const bool laplace = model.config.regression == RegressionLoss::kLaplace;
  const double inv_batch = 1.0 / static_cast<double>(batch_size);

  struct SampleState {
    EncodeCache encode_cache;
    EncoderLatent latent;
    std::size_t horizon_index = 0;
    nnet::Tensor gt_local;
    std::vector<ModeForward> modes;
    nnet::Tensor probs;       // mode probabilities
    std::size_t best_mode = 0;
    nnet::Tensor features;    // mean-pooled penultimate activations
    double reg = 0.0;
    double cls = 0.0;
  };

  std::vector<SampleState> states(batch_size);
  FsnLossValue loss;
  for (std::size_t b = 0; b < batch_size; ++b) {
    SampleState& st = states[b];
    st.latent = encode_internal(batch[b].history, model, &st.encode_cache);
    const int f = labels[b].f_gt;
    st.horizon_index = model.config.horizons.index_of(f);
    const std::size_t steps = static_cast<std::size_t>(f);
    if (batch[b].future.size() < steps)
      throw InvalidInput("ground-truth future shorter than the labeled horizon");
    st.gt_local = flatten_local_future(batch[b].future, steps, st.latent.frame);

    nnet::Tensor logits = nnet::Tensor::zeros({num_modes});
    st.modes.reserve(num_modes);
    double best_ade = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < num_modes; ++k) {
      const nnet::Tensor row = mode_latent_row(st.latent, k, latent_dim);
      st.modes.push_back(decode_mode(model, st.horizon_index, row, true));
      logits[k] = st.modes.back().logit;
      const double mode_ade = flat_ade(st.modes.back().traj, st.gt_local);
      if (mode_ade < best_ade) {
        best_ade = mode_ade;
        st.best_mode = k;
      }
    }
    st.probs = nnet::softmax(logits);

    const ModeForward& best = st.modes[st.best_mode];
    if (laplace) {
      nnet::Tensor scale = nnet::Tensor::zeros(best.raw_scale.shape);
      for (std::size_t i = 0; i < scale.size(); ++i)
        scale[i] = kScaleFloor + softplus(best.raw_scale[i]);
      st.reg = nnet::laplace_nll(best.traj, scale, st.gt_local);
    } else {
      st.reg = nnet::huber_loss(best.traj, st.gt_local, model.config.huber_delta);
    }
    nnet::Tensor one_hot = nnet::Tensor::zeros({num_modes});
    one_hot[st.best_mode] = 1.0;
    st.cls = nnet::cross_entropy(st.probs, one_hot);
    loss.reg += st.reg * inv_batch;
    loss.cls += st.cls * inv_batch;

    const std::size_t feat_dim = st.modes[0].penultimate.size();
    st.features = nnet::Tensor::zeros({feat_dim});
    for (const ModeForward& m : st.modes)
      for (std::size_t i = 0; i < feat_dim; ++i) st.features[i] += m.penultimate[i];
    for (double& v : st.features.values) v /= static_cast<double>(num_modes);
  }

  // Distillation pairing: teacher = batch-best labeled score, students = the
  // strictly below-median half. Skipped entirely when lambda == 0 so the
  // ablation log carries L_KL identically zero.
  std::vector<std::size_t> students;
  std::size_t teacher = 0;
  nnet::Tensor teacher_probs;
  if (model.config.lambda > 0.0 && batch_size >= 2) {
    std::vector<std::size_t> order(batch_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&labels](std::size_t a, std::size_t b) {
      if (labels[a].q != labels[b].q) return labels[a].q < labels[b].q;
      return a < b;
    });
    teacher = order[0];
    teacher_probs = nnet::softmax(states[teacher].features);
    for (std::size_t pos = 0; pos < batch_size; ++pos)
      if (2 * pos > batch_size - 1) students.push_back(order[pos]);
    for (std::size_t s : students)
      loss.kl += nnet::kl_divergence(nnet::softmax(states[s].features), teacher_probs) /
                 static_cast<double>(students.size());
  }
  loss.total = loss.reg + loss.cls + model.config.lambda * loss.kl;
  if (grads == nullptr) return loss;

  if (grads->decoders.size() == model.decoders.size() &&
      grads->mode_embed.shape == model.mode_embed.shape) {
    grads->zero();
  } else {
    *grads = FsnGradients::zeros_like(model);
  }
  for (std::size_t b = 0; b < batch_size; ++b) {
    SampleState& st = states[b];
    const std::size_t f_steps = st.gt_local.size() / 2;
    const std::size_t coords = 2 * f_steps;
    const nnet::MlpSpec dec_spec = model.decoder_spec(st.horizon_index);
    const std::size_t dec_layers = dec_spec.num_layers();

    // Per-mode output gradients.
    nnet::Tensor one_hot = nnet::Tensor::zeros({num_modes});
    one_hot[st.best_mode] = 1.0;
    const nnet::Tensor d_logits = nnet::softmax_cross_entropy_grad(st.probs, one_hot);

    nnet::Tensor d_traj_best;
    nnet::Tensor d_raw_scale_best;
    const ModeForward& best = st.modes[st.best_mode];
    if (laplace) {
      nnet::Tensor scale = nnet::Tensor::zeros(best.raw_scale.shape);
      for (std::size_t i = 0; i < scale.size(); ++i)
        scale[i] = kScaleFloor + softplus(best.raw_scale[i]);
      nnet::Tensor d_scale;
      nnet::laplace_nll_grad(best.traj, scale, st.gt_local, &d_traj_best, &d_scale);
      d_raw_scale_best = nnet::Tensor::zeros(d_scale.shape);
      for (std::size_t i = 0; i < d_scale.size(); ++i)
        d_raw_scale_best[i] = d_scale[i] * sigmoid(best.raw_scale[i]);
    } else {
      d_traj_best = nnet::huber_loss_grad(best.traj, st.gt_local, model.config.huber_delta);
    }

    // Feature-distillation gradient for student samples (teacher stopped).
    nnet::Tensor d_features;
    if (!students.empty()) {
      for (std::size_t s : students) {
        if (s != b) continue;
        const nnet::Tensor p = nnet::softmax(st.features);
        d_features = nnet::kl_student_logit_grad(p, teacher_probs);
        const double w = model.config.lambda / static_cast<double>(students.size());
        for (double& v : d_features.values) v *= w;
      }
    }

    nnet::Tensor d_base = nnet::Tensor::zeros({latent_dim});
    for (std::size_t k = 0; k < num_modes; ++k) {
      nnet::Tensor d_out = nnet::Tensor::zeros({dec_spec.widths.back()});
      if (k == st.best_mode) {
        // positions are cumulative sums of the emitted displacements:
        // d(displacement_t) = sum over u >= t of d(position_u)
        double sx = 0.0, sy = 0.0;
        for (std::size_t t = coords / 2; t-- > 0;) {
          sx += d_traj_best[2 * t];
          sy += d_traj_best[2 * t + 1];
          d_out[2 * t] = sx * inv_batch;
          d_out[2 * t + 1] = sy * inv_batch;
        }
        if (laplace)
          for (std::size_t i = 0; i < coords; ++i)
            d_out[coords + i] = d_raw_scale_best[i] * inv_batch;
      }
      d_out[d_out.size() - 1] = d_logits[k] * inv_batch;

      std::vector<nnet::Tensor> d_hidden(dec_layers);
      if (d_features.size() != 0) {
        nnet::Tensor tap = d_features;
        for (double& v : tap.values) v /= static_cast<double>(num_modes);  // mean pooling
        d_hidden[dec_layers - 2] = std::move(tap);
      }
      nnet::MlpGrads mode_grads = nnet::mlp_backward(dec_spec, model.decoders[st.horizon_index],
                                                     st.modes[k].cache, d_out, d_hidden);
      nnet::MlpParams& dec_acc = grads->decoders[st.horizon_index];
      for (std::size_t l = 0; l < dec_layers; ++l) {
        for (std::size_t i = 0; i < mode_grads.weights[l].size(); ++i)
          dec_acc.weights[l][i] += mode_grads.weights[l][i];
        for (std::size_t i = 0; i < mode_grads.biases[l].size(); ++i)
          dec_acc.biases[l][i] += mode_grads.biases[l][i];
      }
      for (std::size_t d = 0; d < latent_dim; ++d) {
        grads->mode_embed.at(k, d) += mode_grads.input[d];
        d_base[d] += mode_grads.input[d];
      }
    }

    const nnet::MlpGrads enc_grads =
        nnet::mlp_backward(model.encoder_spec(), model.encoder, st.encode_cache.mlp, d_base);
    for (std::size_t l = 0; l < enc_grads.weights.size(); ++l) {
      for (std::size_t i = 0; i < enc_grads.weights[l].size(); ++i)
        grads->encoder.weights[l][i] += enc_grads.weights[l][i];
      for (std::size_t i = 0; i < enc_grads.biases[l].size(); ++i)
        grads->encoder.biases[l][i] += enc_grads.biases[l][i];
    }
  }
  return loss;
}

namespace {

// Deterministic Fisher-Yates shuffle driven by explicit generator draws.
void shuffle_indices(std::vector<std::size_t>& indices, std::mt19937_64& rng) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(indices[i - 1], indices[j]);
  }
}

struct ApmBatchResult {
  double cls = 0.0;
  double reg = 0.0;
};

ApmBatchResult apm_batch_step(FsnModel& model, std::span<const Sample> samples,
                              std::span<const HorizonLabel> labels,
                              std::span<const std::size_t> batch_indices,
                              FsnGradients& grads) {
  const std::size_t num_modes = model.config.num_modes;
  const std::size_t latent_dim = model.config.latent_dim;
  const HorizonSet& horizons = model.config.horizons;
  const double inv_batch = 1.0 / static_cast<double>(batch_indices.size());
  const nnet::MlpSpec apm_spec = model.apm_spec();
  const nnet::MlpSpec enc_spec = model.encoder_spec();
  ApmBatchResult result;
  for (std::size_t idx : batch_indices) {
    EncodeCache encode_cache;
    const EncoderLatent latent = encode_internal(samples[idx].history, model, &encode_cache);
    const nnet::Tensor pooled = pooled_latent(latent, model);
    nnet::MlpCache apm_cache;
    const nnet::Tensor logits = nnet::mlp_forward(apm_spec, model.apm_head, pooled, &apm_cache);
    const ApmOutput out = apm_from_probs(nnet::softmax(logits), horizons);
    const ApmLossValue value = apm_loss(out, labels[idx], horizons);
    result.cls += value.cls * inv_batch;
    result.reg += value.reg * inv_batch;

    const std::size_t cls_index = horizons.index_of(labels[idx].f_gt);
    const double diff = out.f_soft - static_cast<double>(labels[idx].f_gt);
    nnet::Tensor d_logits = nnet::Tensor::zeros({horizons.size()});
    for (std::size_t j = 0; j < horizons.size(); ++j) {
      const double p = out.horizon_probs[j];
      const double cls_term = p - (j == cls_index ? 1.0 : 0.0);
      const double reg_term = 2.0 * diff * p * (static_cast<double>(horizons[j]) - out.f_soft);
      d_logits[j] = (cls_term + reg_term) * inv_batch;
    }
    const nnet::MlpGrads head = nnet::mlp_backward(apm_spec, model.apm_head, apm_cache, d_logits);
    for (std::size_t l = 0; l < head.weights.size(); ++l) {
      for (std::size_t i = 0; i < head.weights[l].size(); ++i)
        grads.apm_head.weights[l][i] += head.weights[l][i];
      for (std::size_t i = 0; i < head.biases[l].size(); ++i)
        grads.apm_head.biases[l][i] += head.biases[l][i];
    }

    // pooled = base + mean(mode embeddings): d(base) = d(pooled),
    // d(embed_k) = d(pooled)/K.
    nnet::Tensor d_base = head.input;
    for (std::size_t k = 0; k < num_modes; ++k)
      for (std::size_t d = 0; d < latent_dim; ++d)
        grads.mode_embed.at(k, d) += head.input[d] / static_cast<double>(num_modes);
    const nnet::MlpGrads enc =
        nnet::mlp_backward(enc_spec, model.encoder, encode_cache.mlp, d_base);
    for (std::size_t l = 0; l < enc.weights.size(); ++l) {
      for (std::size_t i = 0; i < enc.weights[l].size(); ++i)
        grads.encoder.weights[l][i] += enc.weights[l][i];
      for (std::size_t i = 0; i < enc.biases[l].size(); ++i)
        grads.encoder.biases[l][i] += enc.biases[l][i];
    }
  }
  return result;
}

}  // namespace

double apm_accuracy(const FsnModel& model, std::span<const Sample> samples,
                    std::span<const HorizonLabel> labels) {
  if (samples.size() != labels.size()) throw InvalidInput("sample/label count mismatch");
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ApmOutput out = apm_forward(encode(samples[i].history, model), model);
    if (out.f_pred == labels[i].f_gt) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

TrainLog train_apm(FsnModel& model, std::span<const Sample> train,
                   std::span<const HorizonLabel> train_labels, std::span<const Sample> heldout,
                   std::span<const HorizonLabel> heldout_labels, const TrainOptions& options) {
  if (train.empty()) throw InvalidInput("empty training dataset");
  if (train.size() != train_labels.size()) throw InvalidInput("sample/label count mismatch");
  if (heldout.size() != heldout_labels.size()) throw InvalidInput("sample/label count mismatch");

  std::vector<nnet::Tensor*> params;
  std::vector<const nnet::Tensor*> grad_ptrs;
  FsnGradients grads = FsnGradients::zeros_like(model);
  {
    auto model_blocks = model.param_blocks();
    auto grad_blocks = grads.blocks();
    for (std::size_t i = 0; i < model_blocks.size(); ++i) {
      const std::string& name = model_blocks[i].first;
      const bool encoder_block = name.rfind("encoder", 0) == 0;
      const bool apm_block = name.rfind("apm", 0) == 0;
      if (apm_block || (encoder_block && options.train_encoder)) {
        params.push_back(model_blocks[i].second);
        grad_ptrs.push_back(grad_blocks[i]);
      }
    }
  }
  nnet::OptimState optim = nnet::OptimState::init(params, options.optim);
  std::mt19937_64 shuffle_rng(options.shuffle_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainLog log;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    double epoch_cls = 0.0, epoch_reg = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, count);
      grads.zero();
      const ApmBatchResult r = apm_batch_step(model, train, train_labels, batch, grads);
      epoch_cls += r.cls * static_cast<double>(count);
      epoch_reg += r.reg * static_cast<double>(count);
      nnet::optimizer_step(params, grad_ptrs, optim);
    }
    TrainLogRow row;
    row.epoch = epoch;
    row.cls = epoch_cls / static_cast<double>(train.size());
    row.reg = epoch_reg / static_cast<double>(train.size());
    row.kl = 0.0;
    row.total = row.cls + row.reg;
    row.accuracy = heldout.empty() ? 0.0 : apm_accuracy(model, heldout, heldout_labels);
    log.rows.push_back(row);
  }
  return log;
}

TrainLog train_fsn(FsnModel& model, std::span<const Sample> train,
                   std::span<const HorizonLabel> labels, const TrainOptions& options) {
  if (train.empty()) throw InvalidInput("empty training dataset");
  if (train.size() != labels.size()) throw InvalidInput("sample/label count mismatch");

  std::vector<nnet::Tensor*> params;
  std::vector<std::size_t> block_ids;
  FsnGradients grads = FsnGradients::zeros_like(model);
  {
    auto model_blocks = model.param_blocks();
    for (std::size_t i = 0; i < model_blocks.size(); ++i) {
      const std::string& name = model_blocks[i].first;
      const bool encoder_block = name.rfind("encoder", 0) == 0;
      const bool decoder_block = name.rfind("decoder", 0) == 0;
      if (decoder_block || (encoder_block && options.train_encoder)) {
        params.push_back(model_blocks[i].second);
        block_ids.push_back(i);
      }
    }
  }
  nnet::OptimState optim = nnet::OptimState::init(params, options.optim);
  std::mt19937_64 shuffle_rng(options.shuffle_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  // Per-horizon sample queues for the balanced schedule: smaller label
  // classes are cycled so every sub-network sees a steady share of updates.
  std::vector<std::vector<std::size_t>> class_pools;
  std::vector<std::size_t> class_cursor;
  if (options.balanced_classes) {
    for (int f : model.config.horizons.values()) {
      std::vector<std::size_t> pool;
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i].f_gt == f) pool.push_back(i);
      if (!pool.empty()) {
        class_pools.push_back(std::move(pool));
        class_cursor.push_back(0);
      }
    }
  }
  auto balanced_epoch_order = [&](std::vector<std::size_t>& out) {
    out.clear();
    for (std::size_t draw = 0; out.size() < train.size(); ++draw) {
      const std::size_t c = draw % class_pools.size();
      std::vector<std::size_t>& pool = class_pools[c];
      if (class_cursor[c] == 0) shuffle_indices(pool, shuffle_rng);
      out.push_back(pool[class_cursor[c]]);
      class_cursor[c] = (class_cursor[c] + 1) % pool.size();
    }
  };

  TrainLog log;
  std::vector<Sample> batch_samples;
  std::vector<HorizonLabel> batch_labels;
  FsnGradients dense_accum = FsnGradients::zeros_like(model);
  const std::vector<int>& all_horizons = model.config.horizons.values();
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    if (options.balanced_classes && !class_pools.empty()) {
      balanced_epoch_order(order);
    } else {
      shuffle_indices(order, shuffle_rng);
    }
    double sum_reg = 0.0, sum_cls = 0.0, sum_kl = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, order.size() - start);
      batch_samples.clear();
      batch_labels.clear();
      for (std::size_t i = 0; i < count; ++i) {
        batch_samples.push_back(train[order[start + i]]);
        batch_labels.push_back(labels[order[start + i]]);
      }
      const double weight = static_cast<double>(count);
      FsnLossValue value;
      if (options.dense_horizons) {
        // One supervised copy of the batch per horizon; gradients averaged.
        dense_accum.zero();
        auto accum_blocks = dense_accum.blocks();
        const double inv_h = 1.0 / static_cast<double>(all_horizons.size());
        for (int f : all_horizons) {
          std::vector<HorizonLabel> forced = batch_labels;
          for (HorizonLabel& label : forced) {
            label.f_gt = f;
            label.one_hot.assign(all_horizons.size(), 0.0);
            label.one_hot[model.config.horizons.index_of(f)] = 1.0;
          }
          const FsnLossValue part = fsn_batch_loss(model, batch_samples, forced, &grads);
          value.reg += part.reg * inv_h;
          value.cls += part.cls * inv_h;
          value.kl += part.kl * inv_h;
          auto grad_blocks = grads.blocks();
          for (std::size_t b = 0; b < grad_blocks.size(); ++b)
            for (std::size_t i = 0; i < grad_blocks[b]->size(); ++i)
              accum_blocks[b]->values[i] += grad_blocks[b]->values[i] * inv_h;
        }
        value.total = value.reg + value.cls + model.config.lambda * value.kl;
        std::vector<const nnet::Tensor*> grad_ptrs;
        for (std::size_t id : block_ids) grad_ptrs.push_back(accum_blocks[id]);
        nnet::optimizer_step(params, grad_ptrs, optim);
      } else {
        value = fsn_batch_loss(model, batch_samples, batch_labels, &grads);
        std::vector<const nnet::Tensor*> grad_ptrs;
        auto grad_blocks = grads.blocks();
        for (std::size_t id : block_ids) grad_ptrs.push_back(grad_blocks[id]);
        nnet::optimizer_step(params, grad_ptrs, optim);
      }
      sum_reg += value.reg * weight;
      sum_cls += value.cls * weight;
      sum_kl += value.kl * weight;
    }
    TrainLogRow row;
    row.epoch = epoch;
    const double n = static_cast<double>(train.size());
    row.reg = sum_reg / n;
    row.cls = sum_cls / n;
    row.kl = sum_kl / n;
    row.total = row.reg + row.cls + model.config.lambda * row.kl;
    row.accuracy = 0.0;
    log.rows.push_back(row);
  }
  return log;
}

InferResult infer(const Trajectory& history, const FsnModel& model, int forced_horizon) {
  const EncoderLatent latent = encode(history, model);
  InferResult out;
  if (forced_horizon > 0) {
    out.horizon = forced_horizon;
  } else {
    out.horizon = apm_forward(latent, model).f_pred;
  }
  out.modes = decode(latent, out.horizon, model).modes;
  return out;
}

std::string TrainLog::to_csv() const {
  std::ostringstream out;
  out << "epoch,l_reg,l_cls,l_kl,total,accuracy\n";
  char buffer[160];
  for (const TrainLogRow& row : rows) {
    std::snprintf(buffer, sizeof(buffer), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.epoch,
                  row.reg, row.cls, row.kl, row.total, row.accuracy);
    out << buffer;
  }
  return out.str();
}

}  // namespace fh::fsn
