// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors
//
// Trajectory data model, exact curve distances and displacement-error metrics.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fh/errors.hpp"

namespace fh::trajgeo {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

double point_distance(Point2 a, Point2 b);

/// Uniformly sampled 2D point sequence. dt is metadata only; all distances
/// below are purely spatial.
struct Trajectory {
  std::vector<Point2> points;
  double dt = 0.1;  // seconds per step, > 0

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Point2& front() const { return points.front(); }
  const Point2& back() const { return points.back(); }
  const Point2& operator[](std::size_t i) const { return points[i]; }

  /// First `n` points, same dt.
  Trajectory prefix(std::size_t n) const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Strictly increasing positive prediction step counts; the largest entry is
/// the maximum future length F.
class HorizonSet {
 public:
  HorizonSet() = default;
  explicit HorizonSet(std::vector<int> horizons);

  const std::vector<int>& values() const { return horizons_; }
  std::size_t size() const { return horizons_.size(); }
  int operator[](std::size_t i) const { return horizons_[i]; }
  int max() const { return horizons_.back(); }
  bool contains(int f) const;
  /// Index of horizon f; throws InvalidInput when absent.
  std::size_t index_of(int f) const;

  friend bool operator==(const HorizonSet&, const HorizonSet&) = default;

 private:
  std::vector<int> horizons_;
};

/// K predicted trajectories of equal length with mode probabilities.
struct ModeSet {
  std::vector<Trajectory> trajectories;
  std::vector<double> probs;

  std::size_t num_modes() const { return trajectories.size(); }
  void validate() const;  // throws InvalidInput on broken invariants
};

/// Per-step displacement vectors: element t = points[t+1] - points[t].
std::vector<Point2> relative_displacements(const Trajectory& traj);

/// Mean per-step Euclidean distance between equal-length trajectories.
double ade(const Trajectory& pred, const Trajectory& gt);

/// Euclidean distance between the final points.
double fde(const Trajectory& pred, const Trajectory& gt);

struct BestModeMetrics {
  double min_ade = 0.0;
  double min_fde = 0.0;
  std::size_t best_index = 0;  // FDE argmin, ties -> lowest index
};

BestModeMetrics best_mode_metrics(const ModeSet& modes, const Trajectory& gt);

/// Fraction of agents whose best-mode FDE exceeds `threshold_m`.
double miss_rate(std::span<const ModeSet> per_agent_modes,
                 std::span<const Trajectory> gts, double threshold_m);

/// Exact discrete Fréchet distance via the standard dynamic program.
double discrete_frechet(const Trajectory& x, const Trajectory& y);

/// Exhaustive min-over-couplings reference; enforces |X|,|Y| <= 8.
double brute_force_frechet(const Trajectory& x, const Trajectory& y);

}  // namespace fh::trajgeo
