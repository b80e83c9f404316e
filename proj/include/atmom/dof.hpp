#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "atmom/moments.hpp"

namespace atmom {

inline constexpr double kDofFloor = 1e-8;

// Online degrees-of-freedom estimator driven by log squared Mahalanobis distances,
// with exponential moving mean/variance of z = log D. The estimate is expressed as a
// scale factor k with nu = k * d.
struct DofState {
  double z_bar = 0.0;
  double z_tilde = 0.0;
  double lambda = 0.999;
  double eps = kDofFloor;
  std::size_t d = 1;
  double k = 0.0;
  double nu = 0.0;
  // When set, updates leave k untouched (nu stays frozen_k * d).
  std::optional<double> frozen_k;

  // z_bar = 0, z_tilde = trigamma(d / 2): b starts at its floor.
  static DofState init(std::size_t d, double lambda, double eps = kDofFloor);
  static DofState frozen(std::size_t d, double k);
};

// k = (1 + sqrt(1 + 4 b)) / b
double dof_factor(double b);

// z = log(max(D, eps))
double dof_z(double distance, double eps = kDofFloor);

struct DofUpdate {
  double z = 0.0;
  double b = 0.0;
};

DofUpdate dof_update(DofState& state, double distance);

// Arithmetic (batch) estimator around the coordinatewise median. Returns +inf when
// the spread of z is at or below its Gaussian value.
double batch_dof_reference(std::span<const std::vector<double>> points);

struct AtMomentumDiagnostics {
  double distance = 0.0;
  double z = 0.0;
  double b = 0.0;
  double k = 0.0;
  double nu = 0.0;
  double w = 0.0;
  double beta_w = 0.0;
};

// One At-momentum step. D is taken against moment.sigma2.
AtMomentumDiagnostics at_momentum_step(TMomentState& moment, DofState& dof,
                                       std::span<const double> g);

// Same with a caller-supplied D.
AtMomentumDiagnostics at_momentum_step_with_distance(TMomentState& moment, DofState& dof,
                                                     std::span<const double> g, double distance);

}  // namespace atmom
