#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace mmflow {

struct PlanEntry {
  std::size_t source;
  std::size_t target;
  double mass;
};

/// Basic optimal solution of min sum c_ij g_ij subject to row sums = supply
/// and column sums = demand. Potentials satisfy row[i] + col[j] = c_ij on
/// every basic arc and c_ij - row[i] - col[j] >= -tolerance elsewhere.
struct LpSolution {
  double objective = 0.0;
  std::vector<PlanEntry> entries;  // positive-mass basic arcs
  std::vector<double> row_potential;
  std::vector<double> col_potential;
  long pivots = 0;
};

using CostFn = std::function<double(std::size_t, std::size_t)>;

/// Transportation simplex on the bipartite spanning-tree basis.
///
/// The initial basis is the north-west corner rule in the given order. The
/// entering arc is chosen by block search over reduced costs; after a run
/// of degenerate pivots the rule falls back to Bland's (lowest index
/// entering, lowest index leaving among ties) until a nondegenerate pivot
/// occurs, which rules out cycling.
LpSolution solve_transportation(std::span<const double> supply, std::span<const double> demand,
                                const CostFn& cost);

/// Same basis construction, but no pricing: the caller guarantees that the
/// north-west corner basis is optimal (Monge costs in sorted order).
LpSolution northwest_corner(std::span<const double> supply, std::span<const double> demand,
                            const CostFn& cost);

}  // namespace mmflow
