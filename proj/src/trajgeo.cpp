// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors

#include "fh/trajgeo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fh::trajgeo {

double point_distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

Trajectory Trajectory::prefix(std::size_t n) const {
  if (n > points.size()) throw InvalidInput("prefix length exceeds trajectory length");
  Trajectory out;
  out.dt = dt;
  out.points.assign(points.begin(), points.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

HorizonSet::HorizonSet(std::vector<int> horizons) : horizons_(std::move(horizons)) {
  if (horizons_.empty()) throw InvalidInput("horizon set must be non-empty");
  for (std::size_t i = 0; i < horizons_.size(); ++i) {
    if (horizons_[i] < 1) throw InvalidInput("horizons must be >= 1");
    if (i > 0 && horizons_[i] <= horizons_[i - 1])
      throw InvalidInput("horizons must be strictly increasing");
  }
}

bool HorizonSet::contains(int f) const {
  return std::binary_search(horizons_.begin(), horizons_.end(), f);
}

std::size_t HorizonSet::index_of(int f) const {
  auto it = std::lower_bound(horizons_.begin(), horizons_.end(), f);
  if (it == horizons_.end() || *it != f)
    throw InvalidInput("horizon " + std::to_string(f) + " not in horizon set");
  return static_cast<std::size_t>(it - horizons_.begin());
}

void ModeSet::validate() const {
  if (trajectories.empty()) throw InvalidInput("mode set must contain at least one mode");
  if (probs.size() != trajectories.size())
    throw InvalidInput("mode probability count must match mode count");
  const std::size_t len = trajectories.front().size();
  const double dt = trajectories.front().dt;
  double sum = 0.0;
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    if (trajectories[k].size() != len) throw InvalidInput("modes must share trajectory length");
    if (trajectories[k].dt != dt) throw InvalidInput("modes must share dt");
    if (probs[k] < 0.0) throw InvalidInput("mode probabilities must be non-negative");
    sum += probs[k];
  }
  if (std::fabs(sum - 1.0) > 1e-6) throw InvalidInput("mode probabilities must sum to 1");
}

std::vector<Point2> relative_displacements(const Trajectory& traj) {
  if (traj.size() < 2) throw InvalidInput("relative displacements need at least 2 points");
  std::vector<Point2> out(traj.size() - 1);
  for (std::size_t t = 0; t + 1 < traj.size(); ++t) out[t] = traj[t + 1] - traj[t];
  return out;
}

namespace {

void require_equal_lengths(const Trajectory& pred, const Trajectory& gt) {
  if (pred.empty() || gt.empty()) throw InvalidInput("trajectories must be non-empty");
  if (pred.size() != gt.size()) throw InvalidInput("trajectory lengths must match");
}

}  // namespace

double ade(const Trajectory& pred, const Trajectory& gt) {
  require_equal_lengths(pred, gt);
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) sum += point_distance(pred[t], gt[t]);
  return sum / static_cast<double>(pred.size());
}

double fde(const Trajectory& pred, const Trajectory& gt) {
  require_equal_lengths(pred, gt);
  return point_distance(pred.back(), gt.back());
}

BestModeMetrics best_mode_metrics(const ModeSet& modes, const Trajectory& gt) {
  if (modes.trajectories.empty()) throw InvalidInput("mode set must contain at least one mode");
  BestModeMetrics out;
  out.min_ade = std::numeric_limits<double>::infinity();
  out.min_fde = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < modes.trajectories.size(); ++k) {
    const double a = ade(modes.trajectories[k], gt);
    const double f = fde(modes.trajectories[k], gt);
    out.min_ade = std::min(out.min_ade, a);
    if (f < out.min_fde) {
      out.min_fde = f;
      out.best_index = k;
    }
  }
  return out;
}

double miss_rate(std::span<const ModeSet> per_agent_modes, std::span<const Trajectory> gts,
                 double threshold_m) {
  if (per_agent_modes.size() != gts.size())
    throw InvalidInput("agent count mismatch between predictions and ground truth");
  if (threshold_m <= 0.0) throw InvalidInput("miss-rate threshold must be positive");
  if (per_agent_modes.empty()) return 0.0;
  std::size_t missed = 0;
  for (std::size_t i = 0; i < per_agent_modes.size(); ++i) {
    if (best_mode_metrics(per_agent_modes[i], gts[i]).min_fde > threshold_m) ++missed;
  }
  return static_cast<double>(missed) / static_cast<double>(per_agent_modes.size());
}

double discrete_frechet(const Trajectory& x, const Trajectory& y) {
  if (x.empty() || y.empty()) throw InvalidInput("Fréchet distance needs non-empty trajectories");
  const std::size_t m = x.size();
  const std::size_t n = y.size();
  // Rolling single row of the coupling lattice.
  std::vector<double> row(n);
  std::vector<double> prev(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(prev, row);
    for (std::size_t j = 0; j < n; ++j) {
      const double d = point_distance(x[i], y[j]);
      if (i == 0 && j == 0) {
        row[j] = d;
      } else if (i == 0) {
        row[j] = std::max(d, row[j - 1]);
      } else if (j == 0) {
        row[j] = std::max(d, prev[j]);
      } else {
        row[j] = std::max(d, std::min({prev[j], row[j - 1], prev[j - 1]}));
      }
    }
  }
  return row[n - 1];
}

namespace {

// Depth-first walk over every monotone coupling, carrying the running max
// pairwise distance; folds the min across complete couplings at the leaves.
void enumerate_couplings(const Trajectory& x, const Trajectory& y, std::size_t i, std::size_t j,
                         double running_max, double& best) {
  running_max = std::max(running_max, point_distance(x[i], y[j]));
  if (running_max >= best) return;  // cannot improve the min-fold
  if (i + 1 == x.size() && j + 1 == y.size()) {
    best = running_max;
    return;
  }
  if (i + 1 < x.size()) enumerate_couplings(x, y, i + 1, j, running_max, best);
  if (j + 1 < y.size()) enumerate_couplings(x, y, i, j + 1, running_max, best);
  if (i + 1 < x.size() && j + 1 < y.size())
    enumerate_couplings(x, y, i + 1, j + 1, running_max, best);
}

}  // namespace

double brute_force_frechet(const Trajectory& x, const Trajectory& y) {
  if (x.empty() || y.empty()) throw InvalidInput("Fréchet distance needs non-empty trajectories");
  if (x.size() > 8 || y.size() > 8)
    throw ResourceLimit("brute-force Fréchet limited to 8 points per trajectory");
  double best = std::numeric_limits<double>::infinity();
  enumerate_couplings(x, y, 0, 0, 0.0, best);
  return best;
}

}  // namespace fh::trajgeo
