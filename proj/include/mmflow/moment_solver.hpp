#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mmflow/convex.hpp"
#include "mmflow/measures.hpp"

namespace mmflow {

/// Uniform 1D grid [lo, hi] with `cells` cells, written "lo:hi:cells".
struct GridSpec {
  double lo = -10.0;
  double hi = 10.0;
  std::size_t cells = 2048;

  static GridSpec parse(const std::string& text);
  double spacing() const { return (hi - lo) / static_cast<double>(cells); }
};

/// J(v) = sum mu_i v_i - ln Z(v) where u_v(x) = max_i (x.y_i - v_i) over
/// the atoms y_i of mu. Throws ValidationError when e^{-u_v} is not
/// integrable.
double objective_J(std::span<const double> offsets, const DiscreteMeasure& mu, const IntegrationOptions& opts = {});

/// g_i = mu_i - m_i(v)/Z(v).
std::vector<double> gradient_J(std::span<const double> offsets, const DiscreteMeasure& mu,
                               const IntegrationOptions& opts = {});

struct SolveOptions {
  double tol = 1e-8;
  std::size_t max_iter = 5000;
  std::optional<std::vector<double>> initial_offsets;  // default |y_i|^2 / 2
  IntegrationOptions integration;
};

struct TracePoint {
  std::size_t iteration;
  double objective;
  /// False when the step leaving this iterate was taken below the
  /// resolution of J (residual decrease only) rather than by Armijo.
  bool line_search = true;
};

struct SolveReport {
  std::vector<Point> sites;
  /// Offsets of u_final, normalized so that the integral of e^{-u_final} is 1.
  std::vector<double> offsets;
  /// Optimizer offsets v* with sum mu_i v*_i = 0; offsets = v* - log_z.
  std::vector<double> gauge_offsets;
  double log_z = 0.0;      // ln Z(v*)
  double objective = 0.0;  // J(v*)
  double gradient_norm = 0.0;
  double residual = 0.0;   // max_i |mu_i - m_i/Z|
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<TracePoint> trace;
  std::string gauge;

  MaxAffineConvex u_final() const { return MaxAffineConvex(sites, offsets); }
};

/// Minimizes J by regularized Newton steps (the Hessian comes from cell
/// masses and edge fluxes) with Armijo backtracking
/// (c = 1e-4, halving). After every accepted step the constant mode is
/// removed (sum mu_i v_i = 0); at the end offsets are translated so that the
/// barycenter of e^{-u} is 0. Steps whose decrease of J is below its
/// evaluation accuracy are taken only if the residual shrinks, and are
/// marked in the trace. A run that hits max_iter or stalls returns the
/// last iterate with converged = false.
///
/// Preconditions: mu centered (|barycenter| <= 1e-9), not supported on a
/// hyperplane, d = 1 or 2.
SolveReport solve(const DiscreteMeasure& mu, const SolveOptions& opts = {});

struct MomentMeasure {
  DiscreteMeasure measure;              // active sites with weight m_i / Z
  std::vector<std::size_t> atom_piece;  // piece index of each atom
  std::vector<std::size_t> zero_weight; // pieces carrying no mass
};

/// (grad u)_# e^{-u} / Z as a discrete measure.
MomentMeasure moment_measure(const MaxAffineConvex& u, const IntegrationOptions& opts = {});

struct MomentIdentity {
  double lhs = 0.0;  // d Z
  double rhs = 0.0;  // sum_i y_i . int_{cell i} x e^{-u}
  double gap = 0.0;
  double z = 0.0;
};

MomentIdentity verify_moment_identity(const MaxAffineConvex& u, const IntegrationOptions& opts = {});

/// d = 1: exact cell integrals of e^{-u_final} on the grid, renormalized to
/// a probability density.
GridDensity density_on_grid(const MaxAffineConvex& u, const GridSpec& grid);

/// d = 1: the interval outside which e^{-u} / max e^{-u} drops below
/// `tail`, split into `cells` cells.
GridSpec grid_for(const MaxAffineConvex& u, std::size_t cells, double tail = 1e-14);

/// |E(rho*) + T(rho*, mu) - J(v*)| with rho* = e^{-u_final} on the grid.
double duality_gap(const DiscreteMeasure& mu, const SolveReport& report, const GridSpec& grid);

}  // namespace mmflow
