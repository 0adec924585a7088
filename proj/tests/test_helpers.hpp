#pragma once

#include <cmath>
#include <vector>

#include "mmflow/measures.hpp"

namespace testing {

inline mmflow::GridDensity uniform_grid(double lo, double hi, std::size_t cells) {
  const double h = (hi - lo) / static_cast<double>(cells);
  return mmflow::GridDensity::make({lo}, {h}, {cells}, std::vector<double>(cells, 1.0 / (hi - lo)));
}

template <class F>
mmflow::GridDensity sampled_grid(double lo, double hi, std::size_t cells, F f) {
  const double h = (hi - lo) / static_cast<double>(cells);
  std::vector<double> v(cells);
  double total = 0.0;
  for (std::size_t k = 0; k < cells; ++k) {
    v[k] = f(lo + (static_cast<double>(k) + 0.5) * h);
    total += v[k] * h;
  }
  for (double& x : v) x /= total;
  return mmflow::GridDensity::make({lo}, {h}, {cells}, std::move(v));
}

inline mmflow::DiscreteMeasure two_atoms() { return mmflow::DiscreteMeasure::from_atoms({{-1.0}, {1.0}}, {0.5, 0.5}); }

inline mmflow::DiscreteMeasure four_corners() {
  return mmflow::DiscreteMeasure::from_atoms({{1, 1}, {-1, 1}, {1, -1}, {-1, -1}}, {0.25, 0.25, 0.25, 0.25});
}

}  // namespace testing
