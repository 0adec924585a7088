#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "mmflow/numerics.hpp"

namespace mmflow {

/// Finitely supported probability measure on R^dim.
///
/// Construction merges coincident atoms (summing their weights) and
/// renormalizes when the total mass is within 1e-6 of one. Anything further
/// off is rejected, as are nonpositive weights and ragged atom lists.
class DiscreteMeasure {
 public:
  static DiscreteMeasure from_atoms(std::vector<Point> atoms, std::vector<double> weights);

  int dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }
  const std::vector<Point>& atoms() const { return atoms_; }
  const Point& atom(std::size_t i) const { return atoms_[i]; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }

  friend bool operator==(const DiscreteMeasure&, const DiscreteMeasure&) = default;

 private:
  DiscreteMeasure() = default;
  int dim_ = 0;
  std::vector<Point> atoms_;
  std::vector<double> weights_;
};

/// Piecewise-constant density on a uniform grid (row-major, first axis
/// slowest). Cell k along an axis covers [origin + k*h, origin + (k+1)*h].
class GridDensity {
 public:
  static GridDensity make(Point origin, Point spacing, std::vector<std::size_t> shape,
                          std::vector<double> values);

  int dim() const { return static_cast<int>(shape_.size()); }
  const Point& origin() const { return origin_; }
  const Point& spacing() const { return spacing_; }
  const std::vector<std::size_t>& shape() const { return shape_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double cell_volume() const;
  double lower(int axis) const { return origin_[axis]; }
  double upper(int axis) const { return origin_[axis] + spacing_[axis] * static_cast<double>(shape_[axis]); }
  Point cell_center(std::size_t flat) const;
  std::vector<std::size_t> unflatten(std::size_t flat) const;

  /// Same values on a grid whose origin is moved by `shift`.
  GridDensity translated(std::span<const double> shift) const;

  friend bool operator==(const GridDensity&, const GridDensity&) = default;

 private:
  GridDensity() = default;
  Point origin_;
  Point spacing_;
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

using Measure = std::variant<DiscreteMeasure, GridDensity>;

Point barycenter(const DiscreteMeasure& m);
Point barycenter(const GridDensity& m);
DiscreteMeasure center(const DiscreteMeasure& m);
GridDensity center(const GridDensity& m);
double first_moment(const DiscreteMeasure& m);
double first_moment(const GridDensity& m);
double second_moment(const DiscreteMeasure& m);
double second_moment(const GridDensity& m);

struct HyperplaneReport {
  bool degenerate = false;
  Point normal;         // unit vector, empty unless degenerate
  double offset = 0.0;  // every atom y has y.normal == offset
};

/// Degenerate iff the atoms' weighted covariance has an eigenvalue <= 1e-12.
HyperplaneReport hyperplane_check(const DiscreteMeasure& mu);

/// Weighted median of `values` under `weights`: the lowest value whose
/// cumulative weight reaches one half.
double weighted_median(std::span<const double> values, std::span<const double> weights);

struct CMuResult {
  double value = 0.0;
  Point direction;      // minimizing e
  double offset = 0.0;  // minimizing l (weighted median along e)
  bool certified = false;
  double error_bound = 0.0;  // absolute, valid when certified
};

/// c(mu) = (1/2d) min over unit e and real l of sum_i w_i |y_i.e - l|.
///
/// d=1 is exact. d=2 scans 720 angles, refines candidates by golden section
/// and then runs a Lipschitz branch-and-bound until the gap to the true
/// minimum is below 1e-6. d>=3 is a seeded multi-start search and only an
/// upper bound.
CMuResult c_mu_detailed(const DiscreteMeasure& mu, std::uint64_t seed = 0);
double c_mu(const DiscreteMeasure& mu, std::uint64_t seed = 0);

/// Keeps the atoms in the closed ball B(0,n) and moves all remaining mass to
/// the barycenter of the tail.
DiscreteMeasure truncate_with_atom(const DiscreteMeasure& mu, double n);

/// Zeroes the cells whose center lies outside B(0,n) and rescales to unit
/// mass. Throws ValidationError if the retained mass is <= 1e-12.
GridDensity restrict_renormalize(const GridDensity& rho, double n);

}  // namespace mmflow
