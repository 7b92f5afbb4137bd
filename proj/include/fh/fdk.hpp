// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors
//
// Huber-smoothed Fréchet distance kernel: similarity value, distance form,
// and the analytic gradient of the distance with respect to the first curve.

#pragma once

#include <span>
#include <vector>

#include "fh/trajgeo.hpp"

namespace fh::fdk {

using trajgeo::Point2;
using trajgeo::Trajectory;

/// Smoothing parameters of the kernel. beta controls the sharpness of the
/// soft min/max (hard Fréchet recovered as beta -> inf), gamma is the length
/// scale mapping distances to similarities exp(-d/gamma), delta the Huber
/// threshold tempering the exponential weights, epsilon an optional bonus for
/// exactly coincident points.
struct FdkParams {
  double beta = 100.0;
  double gamma = 1.0;
  double delta = 0.1;
  double epsilon = 0.0;

  void validate() const;
};

/// Quadratic below |z| = delta, linear above; C1 everywhere.
double huber(double z, double delta);

/// Derivative of huber with respect to z.
double huber_grad(double z, double delta);

/// Exponentially weighted soft minimum: sum(v*w)/sum(w) with
/// w = exp(-beta * huber(v, delta)). Lies in [min(values), max(values)].
double soft_min_weighted(std::span<const double> values, double beta, double delta);

/// Unnormalized kernel value: the Fréchet coupling-lattice recursion with the
/// hard max/min replaced by the Huber-weighted soft max/min, each soft step
/// carrying its own running weight normalizer. Exposed for the exhaustive
/// coupling-walk oracle in the tests.
double soft_frechet_raw(const Trajectory& x, const Trajectory& y, const FdkParams& params);

/// Self-normalized smooth similarity in (0, 1] for epsilon = 0:
/// exp(-(raw(X,Y) - (raw(X,X)+raw(Y,Y))/2) / gamma). Equals exp(-d/gamma) for
/// single-point inputs and exactly 1 at X == Y.
double fdk_similarity(const Trajectory& x, const Trajectory& y, const FdkParams& params);

/// -gamma * log(fdk_similarity); >= 0; converges to discrete_frechet as
/// beta -> inf. Requires epsilon == 0.
double fdk_distance(const Trajectory& x, const Trajectory& y, const FdkParams& params);

/// Gradient of fdk_distance with respect to each coordinate of x. Coincident
/// point pairs contribute a zero vector (subgradient convention).
std::vector<Point2> fdk_distance_grad(const Trajectory& x, const Trajectory& y,
                                      const FdkParams& params);

}  // namespace fh::fdk
