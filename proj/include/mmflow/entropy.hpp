#pragma once

#include "mmflow/measures.hpp"

namespace mmflow {

class PiecewiseDensity1D;

/// Entropy of the piecewise-constant density, sum rho ln rho * vol, with
/// 0 ln 0 = 0.
double entropy(const GridDensity& rho);

/// C_d = integral over R^d of exp(-sqrt|x| - 1). Only d = 1, 2.
double entropy_lower_bound_constant(int d);

/// Split E = E1 + E2 + E3 with h(x) = -sqrt|x|:
///   E1 = int (rho ln rho + e^{h-1} - rho h) over the grid box  (>= 0)
///   E2 = int rho h
///   E3 = -C_d
/// The h and e^{h-1} terms are integrated exactly per cell, so
/// total + box_tail == entropy(rho) up to roundoff, where box_tail is the
/// mass of e^{h-1} outside the grid box.
struct EntropyBreakdown {
  double e1 = 0.0;
  double e2 = 0.0;
  double e3 = 0.0;
  double total = 0.0;
  double box_tail = 0.0;
  double min_cell_integrand = 0.0;  // before clamping; >= -1e-14 expected
};

EntropyBreakdown entropy_decomposition(const GridDensity& rho);

}  // namespace mmflow
