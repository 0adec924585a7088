#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mmflow/measures.hpp"
#include "mmflow/moment_solver.hpp"

namespace mmflow {

/// E(rho) + T(rho, mu) for a 1D grid density.
double objective_P(const GridDensity& rho, const DiscreteMeasure& mu);

struct PrimalOptions {
  double damping = 0.5;
  double tol = 1e-6;
  std::size_t max_iter = 2000;
  bool auto_expand = true;
  double boundary_threshold = 1e-12;
};

struct PrimalReport {
  GridDensity final_density;
  GridSpec grid;                     // final grid (after any expansion)
  std::vector<double> objective_trace;
  double fixed_point_residual = 0.0; // sup over cells of |rho - e^{-u}/Z|
  std::size_t iterations = 0;
  bool converged = false;
  bool expanded = false;
};

/// Damped fixed point rho <- (1 - theta) rho + theta e^{-u_rho}/Z, where
/// u_rho is the quantile-matching potential of T(rho, mu). Starts from the
/// uniform density on the grid. If the boundary density of the target
/// exceeds the threshold, the grid is doubled about its center once.
PrimalReport solve_fixed_point(const DiscreteMeasure& mu, const GridSpec& grid, const PrimalOptions& opts = {});

struct HyperplaneRow {
  double n;
  double entropy;
  double correlation_bound;
  double objective_upper_bound;
};

/// Uniform densities on the slabs {|x_i| <= 1 (i < d), |x_d| <= n} for a mu
/// concentrated on {x_d = 0}: entropy -ln(2^d n), correlation bound
/// sqrt(d) M1(mu), and their sum.
std::vector<HyperplaneRow> hyperplane_divergence_demo(const DiscreteMeasure& mu, const std::vector<double>& n_list);

/// Random 1D grid density (seeded) used by the property suites.
GridDensity random_grid_density(std::uint64_t seed, double center_spread = 2.0);

struct ConvexitySuiteReport {
  std::size_t pairs = 0;
  std::size_t entropy_violations = 0;
  std::size_t correlation_violations = 0;
  std::size_t strictness_violations = 0;
  std::size_t strict_checks = 0;
  double worst_entropy_excess = 0.0;      // max of f(t) - (f(t-1/4) + f(t+1/4))/2
  double worst_correlation_excess = 0.0;
};

/// Midpoint convexity of E and T(., mu) at t in {1/4, 1/2, 3/4} along the
/// exact 1D geodesics between random pairs, tolerance 1e-7, plus strict
/// convexity of E at t = 1/2 whenever the monotone map is not a shift.
ConvexitySuiteReport displacement_convexity_suite(std::size_t samples, const DiscreteMeasure& mu, std::uint64_t seed);

}  // namespace mmflow
