#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mmflow/numerics.hpp"

namespace mmflow {

/// u(x) = max over active pieces i of (x.y_i - v_i).
///
/// Pieces are never dropped: prune() only flips the active mask, so piece i
/// keeps its index (the solver ties piece i to atom i of the target).
class MaxAffineConvex {
 public:
  MaxAffineConvex(std::vector<Point> sites, std::vector<double> offsets);
  MaxAffineConvex(std::vector<Point> sites, std::vector<double> offsets, std::vector<bool> active);

  int dim() const { return dim_; }
  std::size_t size() const { return sites_.size(); }
  const std::vector<Point>& sites() const { return sites_; }
  const Point& site(std::size_t i) const { return sites_[i]; }
  const std::vector<double>& offsets() const { return offsets_; }
  double offset(std::size_t i) const { return offsets_[i]; }
  const std::vector<bool>& active() const { return active_; }
  bool is_active(std::size_t i) const { return active_[i]; }
  std::size_t active_count() const;

  MaxAffineConvex with_offsets(std::vector<double> offsets) const;
  MaxAffineConvex with_active(std::vector<bool> active) const;

 private:
  int dim_;
  std::vector<Point> sites_;
  std::vector<double> offsets_;
  std::vector<bool> active_;
};

struct Evaluation {
  double value;
  std::size_t index;  // lowest index among ties
};

Evaluation evaluate(const MaxAffineConvex& u, std::span<const double> x);

/// Marks exactly the pieces whose region {u = piece} has positive volume.
MaxAffineConvex prune(const MaxAffineConvex& u);

struct Interval {
  std::size_t piece;
  double lo;  // may be -inf
  double hi;  // may be +inf
};

struct Halfplane {
  // {x : normal.x >= bound}
  double normal[2];
  double bound;
};

struct Polygon {
  std::size_t piece;
  std::vector<Halfplane> halfplanes;
  std::vector<std::array<double, 2>> vertices;  // counterclockwise, clipped to the box
  bool bounded;                                 // does not reach the clipping box
};

struct CellDecomposition {
  int dim = 0;
  std::vector<Interval> intervals;  // d = 1, ordered left to right
  std::vector<Polygon> polygons;    // d = 2
  double box_half_width = 0.0;      // d = 2 clipping box [-R, R]^2
};

/// Requires a pruned u; throws ValidationError if an active piece has an
/// empty cell.
CellDecomposition cells(const MaxAffineConvex& u);

struct RecessionReport {
  bool integrable = false;
  double margin = 0.0;  // distance from 0 to the boundary of conv(active sites)
};

/// e^{-u} is integrable iff 0 is interior to the hull of the active sites.
/// d >= 3 estimates the margin from sampled directions (not certified).
RecessionReport recession_check(const MaxAffineConvex& u);

struct IntegrationOptions {
  int threads = 1;
  std::size_t monte_carlo_samples = 200000;  // d >= 3 only
  std::uint64_t seed = 1;
};

/// Per-cell integrals of e^{-u}. Masses are stored as fractions of Z so that
/// large offsets do not overflow.
struct CellIntegrals {
  double log_z = 0.0;
  std::vector<double> mass_fraction;  // m_i / Z, 0 for inactive pieces
  std::vector<Point> cell_mean;       // (1/m_i) int_{cell i} x e^{-u}
  double rel_error = 0.0;
  bool certified = true;
};

/// Integrates e^{-u} cell by cell. d = 1 uses closed forms. d = 2 clips
/// cells to a box chosen from the tail bound u(x) >= margin|x| - max v_i,
/// triangulates and applies adaptive 12x12 collapsed Gauss rules. d >= 3
/// falls back to importance-sampled Monte Carlo (not certified).
CellIntegrals integrate_cells(const MaxAffineConvex& u, const IntegrationOptions& opts = {});

/// Monte Carlo version for any d, assigning samples to cells by argmax.
CellIntegrals integrate_cells_monte_carlo(const MaxAffineConvex& u, std::size_t samples,
                                          std::uint64_t seed);

struct ZResult {
  double z;
  double certified_rel_error;
};

ZResult integrate_exp_neg(const MaxAffineConvex& u, const IntegrationOptions& opts = {});
std::vector<double> cell_masses(const MaxAffineConvex& u, const IntegrationOptions& opts = {});
Point barycenter_exp_neg(const MaxAffineConvex& u, const IntegrationOptions& opts = {});

/// How a grid function is extended off its grid before conjugating.
enum class ConjugateBoundary {
  Restricted,  // +inf off the grid: result is the max over grid points
  Affine,      // extended by its extreme hull slopes: +inf outside the slope range
};

inline constexpr double kConjugateInfinity = std::numeric_limits<double>::infinity();

/// Discrete Legendre-Fenchel transform f*(y) = sup_x x y - f(x) on a sorted
/// primal grid, evaluated on a sorted dual grid, in O(n + m) after the
/// lower-hull pass.
std::vector<double> conjugate_grid(std::span<const double> xs, std::span<const double> fs,
                                   std::span<const double> ys,
                                   ConjugateBoundary boundary = ConjugateBoundary::Restricted);

/// Separable 2D version on product grids (values row-major, first axis
/// slowest), applied one axis at a time.
std::vector<double> conjugate_grid_2d(std::span<const double> x0, std::span<const double> x1,
                                      std::span<const double> fs, std::span<const double> y0,
                                      std::span<const double> y1);

}  // namespace mmflow
