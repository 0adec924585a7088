#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mmflow/convex.hpp"
#include "mmflow/density1d.hpp"
#include "mmflow/measures.hpp"
#include "mmflow/transport_lp.hpp"

namespace mmflow {

/// Coupling of two discrete measures given by its positive entries.
struct TransportPlan {
  std::size_t source_count = 0;
  std::size_t target_count = 0;
  std::vector<PlanEntry> entries;
};

/// Largest absolute deviation of the plan's marginals from rho and mu.
double plan_marginal_error(const TransportPlan& plan, const DiscreteMeasure& rho, const DiscreteMeasure& mu);

/// Kantorovich potentials for the correlation problem:
/// u_i + u*_j >= x_i.y_j, with equality on the optimal plan.
struct DualPair {
  std::vector<double> u_source;
  std::vector<double> u_star_target;
};

struct CorrelationResult {
  double value = 0.0;
  TransportPlan plan;
  DualPair duals;
  double dual_value = 0.0;  // sum rho_i u_i + sum mu_j u*_j
};

/// Largest instance (sources x targets) accepted by the general LP path.
inline constexpr std::size_t kMaxLpSide = 2000;

/// T(rho, mu) = sup over couplings of the integral of x.y.
///
/// d = 1 sorts both supports and returns the comonotone plan. Otherwise the
/// transportation LP is solved exactly. The dual gauge fixes u* so that
/// min_j (u*_j - |y_j|^2 / 2) = 0 and sets u to the conjugate of u*.
CorrelationResult max_correlation(const DiscreteMeasure& rho, const DiscreteMeasure& mu);

/// Quadratic Wasserstein distance by the same LP with cost |x - y|^2.
double w2_distance(const DiscreteMeasure& rho, const DiscreteMeasure& mu);

struct GridCorrelation {
  double value = 0.0;
  double dual_value = 0.0;
  /// u' is the monotone map; u(x) = max_j (x y_j - b_j), indexed like mu.
  MaxAffineConvex potential;
  std::vector<double> node_x;  // grid nodes (segment endpoints)
  std::vector<double> node_u;  // u at the nodes, 0 at the leftmost
};

/// 1D correlation of a density with a discrete measure by quantile
/// matching. Exact for piecewise-constant densities.
GridCorrelation max_correlation_grid(const PiecewiseDensity1D& rho, const DiscreteMeasure& mu);
GridCorrelation max_correlation_grid(const GridDensity& rho, const DiscreteMeasure& mu);

/// Every pair of plan entries satisfies x.y + x'.y' >= x.y' + x'.y - 1e-9.
bool check_cyclical_monotonicity(const TransportPlan& plan, const DiscreteMeasure& rho,
                                 const DiscreteMeasure& mu);

struct WitnessPlan {
  TransportPlan plan;
  double value = 0.0;
  Point direction;       // e
  double level = 0.0;    // l, where mu is split along e
  double positive_mass;  // rho({x.e > 0})
};

/// Feasible plan from the halfspace argument: rho on {x.e > 0} is spread by
/// a tensor product over the top part of mu along e, the rest over the
/// bottom part. e maximizes the integral of (x.e)_+ (exact in d = 1, grid
/// search plus fixed-point refinement otherwise). Atoms with x.e = 0 go to
/// the negative side. rho must be centered.
WitnessPlan witness_halfspace_plan(const DiscreteMeasure& rho, const DiscreteMeasure& mu,
                                   std::uint64_t seed = 0);

/// Displacement interpolation between discrete measures along an optimal plan.
class GeodesicPath {
 public:
  GeodesicPath(DiscreteMeasure rho0, DiscreteMeasure rho1);
  DiscreteMeasure at(double t) const;
  const TransportPlan& plan() const { return plan_; }

 private:
  DiscreteMeasure rho0_;
  DiscreteMeasure rho1_;
  TransportPlan plan_;
};

/// Monotone-rearrangement geodesic between 1D densities.
class GeodesicPath1D {
 public:
  GeodesicPath1D(const GridDensity& rho0, const GridDensity& rho1);

  /// Exact interpolant.
  PiecewiseDensity1D at(double t) const;
  /// Interpolant re-gridded onto as many cells as rho0, spanning its support.
  GridDensity grid_at(double t) const;

  /// Monotone map T from rho0 to rho1 evaluated at the given points.
  std::vector<double> map_at(std::span<const double> xs) const;

 private:
  GridDensity rho0_grid_;
  GridDensity rho1_grid_;
  PiecewiseDensity1D rho0_;
  PiecewiseDensity1D rho1_;
};

GeodesicPath geodesic(const DiscreteMeasure& rho0, const DiscreteMeasure& rho1);
GeodesicPath1D geodesic(const GridDensity& rho0, const GridDensity& rho1);

/// -sum_k (T'(x_k) - 1) rho_k vol for T sampled at cell centers, with
/// centered differences (one-sided at the ends). Throws ValidationError if
/// T decreases anywhere.
double entropy_geodesic_derivative(const GridDensity& rho, std::span<const double> map_values);

}  // namespace mmflow
