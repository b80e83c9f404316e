#include "atmom/dof.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "atmom/error.hpp"

namespace atmom {

DofState DofState::init(std::size_t d, double lambda, double eps) {
  if (d == 0) throw DomainError("DofState: dimension must be positive");
  if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("DofState: lambda must lie in (0, 1)");
  DofState s;
  s.d = d;
  s.lambda = lambda;
  s.eps = eps;
  s.z_bar = 0.0;
  s.z_tilde = trigamma(0.5 * static_cast<double>(d));
  s.k = dof_factor(eps);
  s.nu = s.k * static_cast<double>(d);
  return s;
}

DofState DofState::frozen(std::size_t d, double k) {
  DofState s = init(d, 0.5);
  s.frozen_k = k;
  s.k = k;
  s.nu = k * static_cast<double>(d);
  return s;
}

double dof_factor(double b) { return (1.0 + std::sqrt(1.0 + 4.0 * b)) / b; }

double dof_z(double distance, double eps) { return std::log(std::max(distance, eps)); }

DofUpdate dof_update(DofState& state, double distance) {
  DofUpdate out;
  out.z = dof_z(distance, state.eps);
  const double lambda = state.lambda;
  // Variance first: it consumes the previous mean.
  const double dev = out.z - state.z_bar;
  state.z_tilde = lambda * state.z_tilde + lambda * (1.0 - lambda) * dev * dev;
  state.z_bar = lambda * state.z_bar + (1.0 - lambda) * out.z;
  out.b = std::max(state.eps, state.z_tilde - trigamma(0.5 * static_cast<double>(state.d)));
  state.k = state.frozen_k ? *state.frozen_k : dof_factor(out.b);
  state.nu = state.k * static_cast<double>(state.d);
  return out;
}

double batch_dof_reference(std::span<const std::vector<double>> points) {
  if (points.size() < 2) throw DomainError("batch_dof_reference: need at least two points");
  const std::size_t dim = points.front().size();
  if (dim == 0) throw DomainError("batch_dof_reference: empty points");

  std::vector<double> centre(dim);
  std::vector<double> column(points.size());
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      require_same_size(points[i].size(), dim, "batch_dof_reference");
      column[i] = points[i][j];
    }
    centre[j] = median(column);
  }

  std::vector<double> z(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double dev = points[i][j] - centre[j];
      sq += dev * dev;
    }
    // A point sitting exactly on the median contributes log(0); floor it like dof_z.
    z[i] = dof_z(sq);
  }

  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  var /= static_cast<double>(z.size() - 1);

  const double b = var - trigamma(0.5 * static_cast<double>(dim));
  if (b <= 0.0) return std::numeric_limits<double>::infinity();
  return dof_factor(b);
}

AtMomentumDiagnostics at_momentum_step_with_distance(TMomentState& moment, DofState& dof,
                                                     std::span<const double> g, double distance) {
  require_same_size(g.size(), moment.m.size(), "at_momentum_step");
  require_same_size(g.size(), dof.d, "at_momentum_step");
  AtMomentumDiagnostics diag;
  const DofUpdate u = dof_update(dof, distance);
  // The weight uses the nu estimated from this very step.
  const TMomentStep s = t_momentum_update_with_distance(moment, g, dof.nu, distance);
  diag.distance = distance;
  diag.z = u.z;
  diag.b = u.b;
  diag.k = dof.k;
  diag.nu = dof.nu;
  diag.w = s.w;
  diag.beta_w = s.beta_w;
  return diag;
}

AtMomentumDiagnostics at_momentum_step(TMomentState& moment, DofState& dof,
                                       std::span<const double> g) {
  const double distance = mahalanobis_sq(moment, g);
  return at_momentum_step_with_distance(moment, dof, g, distance);
}

}  // namespace atmom
