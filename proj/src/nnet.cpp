// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors

#include "fh/nnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "fh/fdk.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace fh::nnet {

namespace {

constexpr double kLogClamp = 1e-12;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_same_size(const Tensor& a, const Tensor& b, const char* what) {
  if (a.size() != b.size()) throw InvalidInput(std::string(what) + ": shape mismatch");
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
    case Activation::kTanh: return std::tanh(z);
    case Activation::kIdentity: return z;
  }
  return z;
}

// Derivative in terms of the pre-activation z and cached post value.
double activate_grad(Activation a, double z, double post) {
  switch (a) {
    case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: return 1.0 - post * post;
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.values.assign(shape_product(shape), 0.0);
  t.shape = std::move(shape);
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  Tensor t;
  t.shape = {values.size()};
  t.values = std::move(values);
  return t;
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation: " + name);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "relu";
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw InvalidInput("mlp spec needs an input width and at least one layer");
  for (std::size_t w : widths)
    if (w == 0) throw InvalidInput("mlp widths must be positive");
}

double uniform_unit(std::uint64_t raw) { return static_cast<double>(raw >> 11) * 0x1.0p-53; }

MlpParams init_mlp(const MlpSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  MlpParams params;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::size_t fan_in = spec.widths[l];
    const std::size_t fan_out = spec.widths[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w = Tensor::zeros({fan_out, fan_in});
    for (double& v : w.values) v = (2.0 * uniform_unit(rng()) - 1.0) * bound;
    params.weights.push_back(std::move(w));
    params.biases.push_back(Tensor::zeros({fan_out}));
  }
  return params;
}

Tensor mlp_forward(const MlpSpec& spec, const MlpParams& params, const Tensor& input,
                   MlpCache* cache) {
  spec.validate();
  if (params.weights.size() != spec.num_layers())
    throw InvalidInput("mlp params do not match spec layer count");
  if (input.size() != spec.widths.front())
    throw InvalidInput("mlp input width mismatch");
  if (cache != nullptr) {
    cache->input = input;
    cache->pre.clear();
    cache->post.clear();
  }
  Tensor current = input;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const Tensor& w = params.weights[l];
    const Tensor& b = params.biases[l];
    const std::size_t out = spec.widths[l + 1];
    const std::size_t in = spec.widths[l];
    Tensor pre = Tensor::zeros({out});
    for (std::size_t r = 0; r < out; ++r) {
      double acc = b[r];
      const double* wrow = &w.values[r * in];
      for (std::size_t c = 0; c < in; ++c) acc += wrow[c] * current[c];
      pre[r] = acc;
    }
    const bool hidden = l + 1 < spec.num_layers();
    Tensor post = pre;
    if (hidden)
      for (double& v : post.values) v = activate(spec.activation, v);
    if (cache != nullptr) {
      cache->pre.push_back(pre);
      cache->post.push_back(post);
    }
    current = std::move(post);
  }
  return current;
}

MlpGrads mlp_backward(const MlpSpec& spec, const MlpParams& params, const MlpCache& cache,
                      const Tensor& d_output, std::span<const Tensor> d_hidden_post) {
  spec.validate();
  const std::size_t layers = spec.num_layers();
  if (cache.pre.size() != layers || cache.post.size() != layers)
    throw InvalidInput("mlp cache does not match spec");
  if (d_output.size() != spec.widths.back())
    throw InvalidInput("mlp output gradient width mismatch");

  MlpGrads grads;
  grads.weights.resize(layers);
  grads.biases.resize(layers);
  Tensor d_post = d_output;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t out = spec.widths[l + 1];
    const std::size_t in = spec.widths[l];
    if (!d_hidden_post.empty() && l < d_hidden_post.size() && d_hidden_post[l].size() != 0) {
      if (d_hidden_post[l].size() != out) throw InvalidInput("hidden gradient width mismatch");
      for (std::size_t r = 0; r < out; ++r) d_post[r] += d_hidden_post[l][r];
    }
    const bool hidden = l + 1 < layers;
    Tensor d_pre = d_post;
    if (hidden)
      for (std::size_t r = 0; r < out; ++r)
        d_pre[r] *= activate_grad(spec.activation, cache.pre[l][r], cache.post[l][r]);
    const Tensor& below = (l == 0) ? cache.input : cache.post[l - 1];
    Tensor dw = Tensor::zeros({out, in});
    for (std::size_t r = 0; r < out; ++r)
      for (std::size_t c = 0; c < in; ++c) dw.values[r * in + c] = d_pre[r] * below[c];
    grads.weights[l] = std::move(dw);
    grads.biases[l] = d_pre;
    Tensor d_below = Tensor::zeros({in});
    const Tensor& w = params.weights[l];
    for (std::size_t r = 0; r < out; ++r) {
      const double* wrow = &w.values[r * in];
      for (std::size_t c = 0; c < in; ++c) d_below[c] += d_pre[r] * wrow[c];
    }
    d_post = std::move(d_below);
  }
  grads.input = std::move(d_post);
  return grads;
}

Tensor softmax(const Tensor& logits) {
  if (logits.size() == 0) throw InvalidInput("softmax needs at least one logit");
  double zmax = -std::numeric_limits<double>::infinity();
  for (double z : logits.values) zmax = std::max(zmax, z);
  Tensor probs = logits;
  double sum = 0.0;
  for (double& v : probs.values) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : probs.values) v /= sum;
  return probs;
}

double cross_entropy(const Tensor& probs, const Tensor& one_hot) {
  require_same_size(probs, one_hot, "cross_entropy");
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (one_hot[i] != 0.0) loss -= one_hot[i] * std::log(std::max(probs[i], kLogClamp));
  return loss;
}

Tensor softmax_cross_entropy_grad(const Tensor& probs, const Tensor& one_hot) {
  require_same_size(probs, one_hot, "cross_entropy");
  Tensor g = probs;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] -= one_hot[i];
  return g;
}

double squared_error(const Tensor& a, const Tensor& b) {
  require_same_size(a, b, "squared_error");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = a[i] - b[i];
    sum += r * r;
  }
  return sum / static_cast<double>(a.size());
}

Tensor squared_error_grad(const Tensor& a, const Tensor& b) {
  require_same_size(a, b, "squared_error");
  Tensor g = a;
  const double scale = 2.0 / static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) g[i] = scale * (a[i] - b[i]);
  return g;
}

double huber_loss(const Tensor& pred, const Tensor& target, double delta) {
  require_same_size(pred, target, "huber_loss");
  if (!(delta > 0.0)) throw InvalidInput("huber delta must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += fdk::huber(pred[i] - target[i], delta);
  return sum / static_cast<double>(pred.size());
}

Tensor huber_loss_grad(const Tensor& pred, const Tensor& target, double delta) {
  require_same_size(pred, target, "huber_loss");
  Tensor g = pred;
  const double scale = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    g[i] = scale * fdk::huber_grad(pred[i] - target[i], delta);
  return g;
}

double laplace_nll(const Tensor& loc, const Tensor& scale, const Tensor& target) {
  require_same_size(loc, target, "laplace_nll");
  require_same_size(loc, scale, "laplace_nll");
  double sum = 0.0;
  for (std::size_t i = 0; i < loc.size(); ++i) {
    if (!(scale[i] > 0.0)) throw InvalidInput("laplace_nll scale must be positive");
    sum += std::log(2.0 * scale[i]) + std::fabs(target[i] - loc[i]) / scale[i];
  }
  return sum / static_cast<double>(loc.size());
}

void laplace_nll_grad(const Tensor& loc, const Tensor& scale, const Tensor& target, Tensor* d_loc,
                      Tensor* d_scale) {
  require_same_size(loc, target, "laplace_nll");
  require_same_size(loc, scale, "laplace_nll");
  const double inv_n = 1.0 / static_cast<double>(loc.size());
  if (d_loc != nullptr) *d_loc = Tensor::zeros(loc.shape);
  if (d_scale != nullptr) *d_scale = Tensor::zeros(scale.shape);
  for (std::size_t i = 0; i < loc.size(); ++i) {
    if (!(scale[i] > 0.0)) throw InvalidInput("laplace_nll scale must be positive");
    const double r = target[i] - loc[i];
    const double sgn = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    if (d_loc != nullptr) (*d_loc)[i] = inv_n * (-sgn / scale[i]);
    if (d_scale != nullptr)
      (*d_scale)[i] = inv_n * (1.0 / scale[i] - std::fabs(r) / (scale[i] * scale[i]));
  }
}

double kl_divergence(const Tensor& p, const Tensor& q) {
  require_same_size(p, q, "kl_divergence");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    sum += p[i] * (std::log(std::max(p[i], kLogClamp)) - std::log(std::max(q[i], kLogClamp)));
  }
  return std::max(sum, 0.0);
}

Tensor kl_student_logit_grad(const Tensor& p, const Tensor& q) {
  require_same_size(p, q, "kl_divergence");
  const double kl = kl_divergence(p, q);
  Tensor g = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double logratio =
        std::log(std::max(p[i], kLogClamp)) - std::log(std::max(q[i], kLogClamp));
    g[i] = p[i] * (logratio - kl);
  }
  return g;
}

OptimState OptimState::init(std::span<Tensor* const> params, AdamWConfig config) {
  OptimState state;
  state.config = config;
  if (!(config.learning_rate > 0.0)) throw InvalidInput("learning rate must be positive");
  for (const Tensor* p : params) {
    state.m.push_back(Tensor::zeros(p->shape));
    state.v.push_back(Tensor::zeros(p->shape));
  }
  return state;
}

void optimizer_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                    OptimState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw InvalidInput("optimizer_step: parameter/gradient/state count mismatch");
  const AdamWConfig& c = state.config;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    Tensor& p = *params[b];
    const Tensor& g = *grads[b];
    if (p.size() != g.size()) throw InvalidInput("optimizer_step: gradient shape mismatch");
    Tensor& m = state.m[b];
    Tensor& v = state.v[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= c.learning_rate * (mhat / (std::sqrt(vhat) + c.eps) + c.weight_decay * p[i]);
    }
  }
}

double finite_diff_check(std::span<double* const> coords, std::span<const double> analytic,
                         const std::function<double()>& loss, double step,
                         std::size_t max_samples, std::uint64_t seed) {
  if (coords.size() != analytic.size())
    throw InvalidInput("finite_diff_check: coordinate/gradient count mismatch");
  if (!(step > 0.0)) throw InvalidInput("finite_diff_check: step must be positive");
  std::vector<std::size_t> picks;
  if (coords.size() <= max_samples) {
    picks.resize(coords.size());
    std::iota(picks.begin(), picks.end(), std::size_t{0});
  } else {
    std::mt19937_64 rng(seed);
    for (std::size_t s = 0; s < max_samples; ++s)
      picks.push_back(static_cast<std::size_t>(rng() % coords.size()));
  }
  double worst = 0.0;
  for (std::size_t idx : picks) {
    double* coord = coords[idx];
    const double saved = *coord;
    *coord = saved + step;
    const double up = loss();
    *coord = saved - step;
    const double down = loss();
    *coord = saved;
    const double fd = (up - down) / (2.0 * step);
    const double rel = std::fabs(analytic[idx] - fd) / std::max(1e-8, std::fabs(fd));
    worst = std::max(worst, rel);
  }
  return worst;
}

namespace {

constexpr char kMagic[4] = {'F', 'H', 'C', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

template <typename T>
void append_raw(std::string& out, const T& value) {
  const char* p = reinterpret_cast<const char*>(&value);
  out.append(p, sizeof(T));
}

template <typename T>
T read_raw(const std::string& bytes, std::size_t& offset) {
  if (offset + sizeof(T) > bytes.size()) throw ArtifactError("checkpoint truncated");
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     std::span<const std::pair<std::string, const Tensor*>> blocks) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  append_raw(out, kFormatVersion);
  append_raw(out, static_cast<std::uint64_t>(blocks.size()));
  for (const auto& [name, tensor] : blocks) {
    append_raw(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    append_raw(out, static_cast<std::uint32_t>(tensor->shape.size()));
    for (std::size_t d : tensor->shape) append_raw(out, static_cast<std::uint64_t>(d));
    for (double v : tensor->values) append_raw(out, v);
  }
  append_raw(out, fnv1a(out));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ArtifactError("cannot open checkpoint for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw ArtifactError("checkpoint write failed: " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ArtifactError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint32_t) + 2 * sizeof(std::uint64_t))
    throw ArtifactError("checkpoint truncated: " + path);
  const std::string body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
  std::size_t offset = bytes.size() - sizeof(std::uint64_t);
  if (read_raw<std::uint64_t>(bytes, offset) != fnv1a(body))
    throw ArtifactError("checkpoint checksum mismatch: " + path);
  offset = 0;
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ArtifactError("not a checkpoint file: " + path);
  offset += sizeof(kMagic);
  if (read_raw<std::uint32_t>(bytes, offset) != kFormatVersion)
    throw ArtifactError("unsupported checkpoint version: " + path);
  const std::uint64_t count = read_raw<std::uint64_t>(bytes, offset);
  std::map<std::string, Tensor> blocks;
  for (std::uint64_t b = 0; b < count; ++b) {
    const std::uint32_t name_len = read_raw<std::uint32_t>(bytes, offset);
    if (offset + name_len > body.size()) throw ArtifactError("checkpoint truncated: " + path);
    std::string name = bytes.substr(offset, name_len);
    offset += name_len;
    const std::uint32_t ndim = read_raw<std::uint32_t>(bytes, offset);
    std::vector<std::size_t> shape;
    for (std::uint32_t d = 0; d < ndim; ++d)
      shape.push_back(static_cast<std::size_t>(read_raw<std::uint64_t>(bytes, offset)));
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.values) v = read_raw<double>(bytes, offset);
    blocks.emplace(std::move(name), std::move(t));
  }
  return blocks;
}

}  // namespace fh::nnet
