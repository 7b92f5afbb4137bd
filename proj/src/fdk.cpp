// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors

#include "fh/fdk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fh/errors.hpp"

namespace fh::fdk {

namespace {

constexpr double kCoincidenceTol = 1e-12;

// Soft extremum with running weight normalization. beta_signed > 0 gives the
// weighted soft minimum, beta_signed < 0 the soft maximum. Exponents are
// max-shifted so large |beta| cannot underflow the whole weight set.
double soft_extremum(std::span<const double> values, double beta_signed, double delta,
                     std::span<double> partials = {}) {
  double exponents[3];
  const std::size_t n = values.size();
  if (n == 0 || n > 3) throw InvalidInput("soft_extremum expects 1 to 3 values");
  double emax = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    exponents[t] = -beta_signed * huber(values[t], delta);
    emax = std::max(emax, exponents[t]);
  }
  double weights[3];
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    weights[t] = std::exp(exponents[t] - emax);
    num += values[t] * weights[t];
    den += weights[t];
  }
  const double s = num / den;
  if (!partials.empty()) {
    for (std::size_t t = 0; t < n; ++t) {
      const double eprime = -beta_signed * huber_grad(values[t], delta);
      partials[t] = weights[t] * (1.0 + (values[t] - s) * eprime) / den;
    }
  }
  return s;
}

// Effective per-pair distance: Euclidean, reduced by gamma*epsilon at exactly
// coincident points (the similarity-domain coincidence bonus exp(+epsilon)).
double pair_distance(Point2 a, Point2 b, const FdkParams& p) {
  const double d = trajgeo::point_distance(a, b);
  if (p.epsilon > 0.0 && d <= kCoincidenceTol) return d - p.gamma * p.epsilon;
  return d;
}

struct Lattice {
  std::size_t m = 0, n = 0;
  std::vector<double> f;  // m*n cell values
  double& at(std::size_t i, std::size_t j) { return f[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return f[i * n + j]; }
};

Lattice run_forward(const Trajectory& x, const Trajectory& y, const FdkParams& p) {
  Lattice lat;
  lat.m = x.size();
  lat.n = y.size();
  lat.f.resize(lat.m * lat.n);
  for (std::size_t i = 0; i < lat.m; ++i) {
    for (std::size_t j = 0; j < lat.n; ++j) {
      const double d = pair_distance(x.points[i], y.points[j], p);
      if (i == 0 && j == 0) {
        lat.at(i, j) = d;
        continue;
      }
      double pool;
      if (i == 0) {
        pool = lat.at(i, j - 1);
      } else if (j == 0) {
        pool = lat.at(i - 1, j);
      } else {
        const double preds[3] = {lat.at(i - 1, j), lat.at(i, j - 1), lat.at(i - 1, j - 1)};
        pool = soft_extremum(preds, p.beta, p.delta);  // soft min over predecessors
      }
      const double pair[2] = {d, pool};
      lat.at(i, j) = soft_extremum(pair, -p.beta, p.delta);  // soft max with the pair distance
    }
  }
  return lat;
}

// Reverse-mode pass over a completed lattice; returns adjoints of the
// per-pair effective distances.
std::vector<double> run_backward(const Trajectory& x, const Trajectory& y, const FdkParams& p,
                                 const Lattice& lat) {
  const std::size_t m = lat.m, n = lat.n;
  std::vector<double> aF(m * n, 0.0);  // adjoint of each cell value
  std::vector<double> aD(m * n, 0.0);  // adjoint of each pair distance
  aF[(m - 1) * n + (n - 1)] = 1.0;
  for (std::size_t ri = m; ri-- > 0;) {
    for (std::size_t rj = n; rj-- > 0;) {
      const double a = aF[ri * n + rj];
      if (a == 0.0) continue;
      const double d = pair_distance(x.points[ri], y.points[rj], p);
      if (ri == 0 && rj == 0) {
        aD[0] += a;
        continue;
      }
      double pool;
      double pool_partials[3] = {0, 0, 0};
      std::size_t pred_cells[3];
      std::size_t num_preds = 0;
      if (ri == 0) {
        pool = lat.at(ri, rj - 1);
        pool_partials[0] = 1.0;
        pred_cells[num_preds++] = ri * n + (rj - 1);
      } else if (rj == 0) {
        pool = lat.at(ri - 1, rj);
        pool_partials[0] = 1.0;
        pred_cells[num_preds++] = (ri - 1) * n + rj;
      } else {
        const double preds[3] = {lat.at(ri - 1, rj), lat.at(ri, rj - 1), lat.at(ri - 1, rj - 1)};
        pool = soft_extremum(preds, p.beta, p.delta, pool_partials);
        pred_cells[num_preds++] = (ri - 1) * n + rj;
        pred_cells[num_preds++] = ri * n + (rj - 1);
        pred_cells[num_preds++] = (ri - 1) * n + (rj - 1);
      }
      const double pair[2] = {d, pool};
      double pair_partials[2];
      soft_extremum(pair, -p.beta, p.delta, pair_partials);
      aD[ri * n + rj] += a * pair_partials[0];
      const double a_pool = a * pair_partials[1];
      for (std::size_t c = 0; c < num_preds; ++c) aF[pred_cells[c]] += a_pool * pool_partials[c];
    }
  }
  return aD;
}

// Accumulates distance adjoints into coordinate gradients. Both index roles
// are accumulated, which makes the same helper serve raw(X,Y) (accumulate x
// side only) and raw(X,X) (both sides alias the same gradient buffer).
void accumulate_pair_grads(const Trajectory& x, const Trajectory& y,
                           const std::vector<double>& aD, double scale,
                           std::vector<Point2>* gx, std::vector<Point2>* gy) {
  const std::size_t n = y.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = aD[i * n + j];
      if (a == 0.0) continue;
      const double d = trajgeo::point_distance(x.points[i], y.points[j]);
      if (d <= kCoincidenceTol) continue;  // zero-vector convention at coincidence
      const double gxc = scale * a * (x.points[i].x - y.points[j].x) / d;
      const double gyc = scale * a * (x.points[i].y - y.points[j].y) / d;
      if (gx != nullptr) {
        (*gx)[i].x += gxc;
        (*gx)[i].y += gyc;
      }
      if (gy != nullptr) {
        (*gy)[j].x -= gxc;
        (*gy)[j].y -= gyc;
      }
    }
  }
}

double normalized_distance(const Trajectory& x, const Trajectory& y, const FdkParams& p) {
  const double raw_xy = run_forward(x, y, p).f.back();
  const double raw_xx = run_forward(x, x, p).f.back();
  const double raw_yy = run_forward(y, y, p).f.back();
  return raw_xy - 0.5 * (raw_xx + raw_yy);
}

void require_nonempty(const Trajectory& x, const Trajectory& y) {
  if (x.empty() || y.empty()) throw InvalidInput("kernel inputs must be non-empty trajectories");
}

}  // namespace

void FdkParams::validate() const {
  if (!(beta > 0.0)) throw InvalidInput("fdk beta must be positive");
  if (!(gamma > 0.0)) throw InvalidInput("fdk gamma must be positive");
  if (!(delta > 0.0)) throw InvalidInput("fdk delta must be positive");
  if (epsilon < 0.0) throw InvalidInput("fdk epsilon must be non-negative");
}

double huber(double z, double delta) {
  const double a = std::fabs(z);
  if (a <= delta) return 0.5 * z * z;
  return delta * (a - 0.5 * delta);
}

double huber_grad(double z, double delta) {
  if (std::fabs(z) <= delta) return z;
  return z > 0.0 ? delta : -delta;
}

double soft_min_weighted(std::span<const double> values, double beta, double delta) {
  if (values.empty()) throw InvalidInput("soft_min_weighted needs at least one value");
  if (!(beta > 0.0)) throw InvalidInput("soft_min_weighted beta must be positive");
  double emax = -std::numeric_limits<double>::infinity();
  for (double v : values) emax = std::max(emax, -beta * huber(v, delta));
  double num = 0.0, den = 0.0;
  for (double v : values) {
    const double w = std::exp(-beta * huber(v, delta) - emax);
    num += v * w;
    den += w;
  }
  return num / den;
}

double soft_frechet_raw(const Trajectory& x, const Trajectory& y, const FdkParams& params) {
  require_nonempty(x, y);
  params.validate();
  return run_forward(x, y, params).f.back();
}

double fdk_similarity(const Trajectory& x, const Trajectory& y, const FdkParams& params) {
  require_nonempty(x, y);
  params.validate();
  const double dist = std::max(0.0, normalized_distance(x, y, params));
  return std::exp(-dist / params.gamma);
}

double fdk_distance(const Trajectory& x, const Trajectory& y, const FdkParams& params) {
  require_nonempty(x, y);
  params.validate();
  if (params.epsilon != 0.0)
    throw InvalidInput("fdk_distance requires epsilon = 0 (distance interpretation)");
  return std::max(0.0, normalized_distance(x, y, params));
}

std::vector<Point2> fdk_distance_grad(const Trajectory& x, const Trajectory& y,
                                      const FdkParams& params) {
  require_nonempty(x, y);
  params.validate();
  if (params.epsilon != 0.0)
    throw InvalidInput("fdk_distance requires epsilon = 0 (distance interpretation)");
  std::vector<Point2> grad(x.size(), Point2{0.0, 0.0});
  if (normalized_distance(x, y, params) <= 0.0) return grad;  // clamped region

  const Lattice lat_xy = run_forward(x, y, params);
  const std::vector<double> aD_xy = run_backward(x, y, params, lat_xy);
  accumulate_pair_grads(x, y, aD_xy, 1.0, &grad, nullptr);

  const Lattice lat_xx = run_forward(x, x, params);
  const std::vector<double> aD_xx = run_backward(x, x, params, lat_xx);
  std::vector<Point2> self(x.size(), Point2{0.0, 0.0});
  accumulate_pair_grads(x, x, aD_xx, 1.0, &self, &self);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    grad[i].x -= 0.5 * self[i].x;
    grad[i].y -= 0.5 * self[i].y;
  }
  return grad;
}

}  // namespace fh::fdk
