// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors
//
// Minimal dense neural substrate with manual backpropagation: affine layers,
// activations, losses, AdamW, a finite-difference gradient checker and a
// binary checkpoint container. No external ML framework.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fh/errors.hpp"

namespace fh::nnet {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor vector(std::vector<double> values);

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  /// Row-major 2D access; valid when shape is {rows, cols}.
  double& at(std::size_t r, std::size_t c) { return values[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * shape[1] + c]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

enum class Activation { kRelu, kTanh, kIdentity };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

/// widths[0] is the input width; each later entry is a layer output width.
/// Hidden layers use `activation`, the final layer is linear.
struct MlpSpec {
  std::vector<std::size_t> widths;
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 0;

  std::size_t num_layers() const { return widths.empty() ? 0 : widths.size() - 1; }
  void validate() const;
};

struct MlpParams {
  std::vector<Tensor> weights;  // layer l: {out, in}
  std::vector<Tensor> biases;   // layer l: {out}
};

/// Glorot-uniform weights (+- sqrt(6/(fan_in+fan_out))) from the spec seed;
/// zero biases.
MlpParams init_mlp(const MlpSpec& spec);

struct MlpCache {
  Tensor input;
  std::vector<Tensor> pre;   // pre-activation per layer
  std::vector<Tensor> post;  // post-activation per layer; back() is the output
};

Tensor mlp_forward(const MlpSpec& spec, const MlpParams& params, const Tensor& input,
                   MlpCache* cache = nullptr);

struct MlpGrads {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
  Tensor input;
};

/// Exact gradients of the forward map. `d_hidden_post`, when non-empty, is
/// indexed by layer and adds extra gradient flowing into that layer's
/// post-activation output (used for feature taps); empty tensors are skipped.
MlpGrads mlp_backward(const MlpSpec& spec, const MlpParams& params, const MlpCache& cache,
                      const Tensor& d_output, std::span<const Tensor> d_hidden_post = {});

/// Max-shifted softmax; positive, sums to 1.
Tensor softmax(const Tensor& logits);

/// -sum(one_hot * log(probs)), logs clamped at 1e-12.
double cross_entropy(const Tensor& probs, const Tensor& one_hot);
/// Gradient of cross_entropy(softmax(logits), one_hot) with respect to logits.
Tensor softmax_cross_entropy_grad(const Tensor& probs, const Tensor& one_hot);

/// Mean squared difference.
double squared_error(const Tensor& a, const Tensor& b);
Tensor squared_error_grad(const Tensor& a, const Tensor& b);

/// Mean elementwise Huber penalty of the residuals.
double huber_loss(const Tensor& pred, const Tensor& target, double delta);
Tensor huber_loss_grad(const Tensor& pred, const Tensor& target, double delta);

/// Mean elementwise log(2*scale) + |target - loc| / scale; scale must be
/// positive everywhere.
double laplace_nll(const Tensor& loc, const Tensor& scale, const Tensor& target);
void laplace_nll_grad(const Tensor& loc, const Tensor& scale, const Tensor& target, Tensor* d_loc,
                      Tensor* d_scale);

/// sum(p * log(p/q)) with both distributions clamped at 1e-12.
double kl_divergence(const Tensor& p, const Tensor& q);
/// Gradient of kl_divergence(softmax(student), q) with respect to the student
/// logits, with q held constant.
Tensor kl_student_logit_grad(const Tensor& p, const Tensor& q);

struct AdamWConfig {
  double learning_rate = 5e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Decoupled-weight-decay adaptive-moment state over a fixed parameter list.
struct OptimState {
  AdamWConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  static OptimState init(std::span<Tensor* const> params, AdamWConfig config);
};

void optimizer_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                    OptimState& state);

/// Central-difference check of an analytic gradient. `coords` point at the
/// parameters the loss reads; `analytic` is the matching gradient. Samples at
/// most `max_samples` coordinates (seeded) and returns the max of
/// |analytic - fd| / max(1e-8, |fd|).
double finite_diff_check(std::span<double* const> coords, std::span<const double> analytic,
                         const std::function<double()>& loss, double step,
                         std::size_t max_samples = SIZE_MAX, std::uint64_t seed = 0);

/// Versioned binary container: magic, format version, named blocks with
/// shapes, little-endian doubles, trailing FNV-1a checksum.
void save_checkpoint(const std::string& path,
                     std::span<const std::pair<std::string, const Tensor*>> blocks);
std::map<std::string, Tensor> load_checkpoint(const std::string& path);

/// Deterministic uniform double in [0, 1) from a 64-bit generator draw.
double uniform_unit(std::uint64_t raw);

}  // namespace fh::nnet
