#pragma once

#include <vector>

#include "mmflow/measures.hpp"

namespace mmflow {

/// Probability density on R that is constant on each of finitely many
/// intervals. This is the exact image of a 1D GridDensity under monotone
/// piecewise-linear maps, so displacement interpolation stays closed.
class PiecewiseDensity1D {
 public:
  struct Segment {
    double lo;
    double hi;
    double mass;  // density mass / (hi - lo) on [lo, hi]
  };

  /// One affine piece of the quantile function: p in [p0, p1] maps
  /// linearly onto [z0, z1].
  struct QuantilePiece {
    double p0, p1, z0, z1;
    double at(double p) const {
      if (p1 <= p0) return z0;
      return z0 + (z1 - z0) * (p - p0) / (p1 - p0);
    }
  };

  static PiecewiseDensity1D from_grid(const GridDensity& rho);
  /// Segments must be ordered, non-overlapping, of positive length, with
  /// total mass within 1e-9 of one (renormalized).
  static PiecewiseDensity1D from_segments(std::vector<Segment> segments);

  const std::vector<Segment>& segments() const { return segments_; }
  double lower() const { return segments_.front().lo; }
  double upper() const { return segments_.back().hi; }

  double cdf(double x) const;
  double quantile(double p) const;
  const std::vector<QuantilePiece>& quantile_pieces() const { return pieces_; }

  /// int_{p0}^{p1} Q(p) dp, exact.
  double quantile_integral(double p0, double p1) const;

  double mean() const;
  double first_abs_moment() const;
  double second_moment() const;
  double entropy() const;

  /// Exact cell masses on the uniform grid [origin, origin + cells*spacing].
  /// Mass outside the grid is dropped and the rest renormalized.
  GridDensity to_grid(double origin, double spacing, std::size_t cells) const;

  PiecewiseDensity1D translated(double shift) const;

 private:
  void build_pieces();
  std::vector<Segment> segments_;
  std::vector<QuantilePiece> pieces_;
};

/// A sub-interval of [0,1] on which two quantile functions are both affine.
struct QuantilePair {
  double p0, p1;
  double a0, a1;  // first quantile at p0, p1
  double b0, b1;  // second quantile at p0, p1
};

std::vector<QuantilePair> merge_quantiles(const PiecewiseDensity1D& a, const PiecewiseDensity1D& b);

/// Quantile (monotone rearrangement) interpolation: Q_t = (1-t) Q_a + t Q_b.
PiecewiseDensity1D displacement_interpolate(const PiecewiseDensity1D& a, const PiecewiseDensity1D& b,
                                            double t);

/// W2 between two 1D densities via int_0^1 (Q_a - Q_b)^2.
double w2_distance(const PiecewiseDensity1D& a, const PiecewiseDensity1D& b);

}  // namespace mmflow
