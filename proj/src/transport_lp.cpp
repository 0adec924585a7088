#include "mmflow/transport_lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mmflow/error.hpp"
#include "mmflow/numerics.hpp"

namespace mmflow {

namespace {

struct Arc {
  std::size_t row;
  std::size_t col;
  double flow;
};

// Spanning tree over m + n nodes; rows are 0..m-1, columns m..m+n-1.
class Basis {
 public:
  Basis(std::size_t m, std::size_t n) : m_(m), n_(n), adj_(m + n) {}

  std::size_t add(const Arc& a) {
    arcs_.push_back(a);
    const std::size_t id = arcs_.size() - 1;
    adj_[a.row].push_back(id);
    adj_[m_ + a.col].push_back(id);
    return id;
  }

  void replace(std::size_t id, const Arc& a) {
    detach(arcs_[id].row, id);
    detach(m_ + arcs_[id].col, id);
    arcs_[id] = a;
    adj_[a.row].push_back(id);
    adj_[m_ + a.col].push_back(id);
  }

  // Potentials (row 0 anchored at 0) plus parent arcs and depths from a
  // traversal rooted at row 0.
  void traverse(const CostFn& cost) {
    const std::size_t nodes = m_ + n_;
    pot_.assign(nodes, 0.0);
    parent_arc_.assign(nodes, kNone);
    depth_.assign(nodes, -1);
    std::vector<std::size_t> stack = {0};
    depth_[0] = 0;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t id : adj_[v]) {
        const Arc& a = arcs_[id];
        const std::size_t other = (v < m_) ? m_ + a.col : a.row;
        if (depth_[other] >= 0) continue;
        depth_[other] = depth_[v] + 1;
        parent_arc_[other] = id;
        pot_[other] = cost(a.row, a.col) - pot_[v];
        stack.push_back(other);
      }
    }
    for (std::size_t v = 0; v < nodes; ++v) {
      if (depth_[v] < 0) throw SolverError("transportation basis is not a spanning tree");
    }
  }

  double row_pot(std::size_t i) const { return pot_[i]; }
  double col_pot(std::size_t j) const { return pot_[m_ + j]; }

  // Arcs of the tree path from node `from` to node `to`, ordered from `from`.
  std::vector<std::size_t> path(std::size_t from, std::size_t to) const {
    std::vector<std::size_t> head, tail;
    std::size_t a = from, b = to;
    while (a != b) {
      if (depth_[a] >= depth_[b]) {
        const std::size_t id = parent_arc_[a];
        head.push_back(id);
        a = other_end(a, id);
      } else {
        const std::size_t id = parent_arc_[b];
        tail.push_back(id);
        b = other_end(b, id);
      }
    }
    head.insert(head.end(), tail.rbegin(), tail.rend());
    return head;
  }

  const std::vector<Arc>& arcs() const { return arcs_; }
  std::vector<Arc>& arcs() { return arcs_; }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t other_end(std::size_t node, std::size_t id) const {
    const Arc& a = arcs_[id];
    return (node < m_) ? m_ + a.col : a.row;
  }

  void detach(std::size_t node, std::size_t id) {
    auto& list = adj_[node];
    auto it = std::find(list.begin(), list.end(), id);
    *it = list.back();
    list.pop_back();
  }

  std::size_t m_, n_;
  std::vector<Arc> arcs_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<double> pot_;
  std::vector<std::size_t> parent_arc_;
  std::vector<int> depth_;
};

Basis initial_basis(std::span<const double> supply, std::span<const double> demand) {
  const std::size_t m = supply.size(), n = demand.size();
  Basis basis(m, n);
  std::size_t i = 0, j = 0;
  double rs = supply[0], rd = demand[0];
  while (true) {
    const bool last = (i == m - 1 && j == n - 1);
    const double amount = std::max(0.0, std::min(rs, rd));
    basis.add({i, j, amount});
    if (last) break;
    rs -= amount;
    rd -= amount;
    if ((rs <= rd && i < m - 1) || j == n - 1) {
      ++i;
      rs = supply[i];
    } else {
      ++j;
      rd = demand[j];
    }
  }
  return basis;
}

void check_inputs(std::span<const double> supply, std::span<const double> demand) {
  if (supply.empty() || demand.empty()) throw ValidationError("empty transport marginals");
  for (double s : supply) {
    if (!(s >= 0.0)) throw ValidationError("negative supply");
  }
  for (double d : demand) {
    if (!(d >= 0.0)) throw ValidationError("negative demand");
  }
}

// Rescales demand so both sides carry exactly the same total.
std::vector<double> balanced_demand(std::span<const double> supply, std::span<const double> demand) {
  CompensatedSum s, d;
  for (double x : supply) s += x;
  for (double x : demand) d += x;
  if (std::fabs(s.value() - d.value()) > 1e-9 * std::max(1.0, s.value())) {
    throw ValidationError("transport marginals have different masses");
  }
  std::vector<double> out(demand.begin(), demand.end());
  const double scale = s.value() / d.value();
  for (double& x : out) x *= scale;
  return out;
}

LpSolution finish(const Basis& basis, std::size_t m, std::size_t n, const CostFn& cost) {
  LpSolution sol;
  CompensatedSum obj;
  for (const Arc& a : basis.arcs()) {
    if (a.flow > 0.0) {
      sol.entries.push_back({a.row, a.col, a.flow});
      obj += a.flow * cost(a.row, a.col);
    }
  }
  std::sort(sol.entries.begin(), sol.entries.end(), [](const PlanEntry& a, const PlanEntry& b) {
    return a.source != b.source ? a.source < b.source : a.target < b.target;
  });
  sol.objective = obj.value();
  sol.row_potential.resize(m);
  sol.col_potential.resize(n);
  for (std::size_t i = 0; i < m; ++i) sol.row_potential[i] = basis.row_pot(i);
  for (std::size_t j = 0; j < n; ++j) sol.col_potential[j] = basis.col_pot(j);
  return sol;
}

}  // namespace

LpSolution northwest_corner(std::span<const double> supply, std::span<const double> demand,
                            const CostFn& cost) {
  check_inputs(supply, demand);
  const auto balanced = balanced_demand(supply, demand);
  Basis basis = initial_basis(supply, balanced);
  basis.traverse(cost);
  return finish(basis, supply.size(), demand.size(), cost);
}

LpSolution solve_transportation(std::span<const double> supply, std::span<const double> demand,
                                const CostFn& cost) {
  check_inputs(supply, demand);
  const std::size_t m = supply.size(), n = demand.size();
  const auto balanced = balanced_demand(supply, demand);
  Basis basis = initial_basis(supply, balanced);

  double cost_scale = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost_scale = std::max(cost_scale, std::fabs(cost(i, j)));
  }
  const double tolerance = 1e-13 * std::max(1.0, cost_scale);

  // Basic arcs are marked so pricing skips them.
  std::vector<char> in_basis(m * n, 0);
  for (const Arc& a : basis.arcs()) in_basis[a.row * n + a.col] = 1;

  const std::size_t total = m * n;
  const std::size_t block = std::max<std::size_t>(64, static_cast<std::size_t>(std::sqrt(double(total))));
  std::size_t cursor = 0;
  long degenerate_run = 0;
  const long bland_threshold = static_cast<long>(m + n);
  long pivots = 0;
  const long max_pivots = 50L * static_cast<long>(total) + 1000;

  while (true) {
    basis.traverse(cost);
    auto reduced = [&](std::size_t k) {
      const std::size_t i = k / n, j = k % n;
      return cost(i, j) - basis.row_pot(i) - basis.col_pot(j);
    };

    std::size_t entering = total;
    if (degenerate_run >= bland_threshold) {
      for (std::size_t k = 0; k < total; ++k) {
        if (!in_basis[k] && reduced(k) < -tolerance) {
          entering = k;
          break;
        }
      }
    } else {
      double best = -tolerance;
      std::size_t scanned = 0;
      while (scanned < total) {
        const std::size_t stop = std::min(total, scanned + block);
        for (; scanned < stop; ++scanned) {
          const std::size_t k = (cursor + scanned) % total;
          if (in_basis[k]) continue;
          const double rc = reduced(k);
          if (rc < best) {
            best = rc;
            entering = k;
          }
        }
        if (entering != total) break;
      }
      cursor = (cursor + scanned) % total;
    }
    if (entering == total) break;
    if (++pivots > max_pivots) throw SolverError("transportation simplex exceeded pivot limit");

    const std::size_t p = entering / n, q = entering % n;
    // Cycle: entering arc (+), then the tree path from column q back to row p
    // alternating (-, +, -, ...).
    const auto cycle = basis.path(m + q, p);
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = 0;
    std::size_t leaving_key = total;
    for (std::size_t k = 0; k < cycle.size(); k += 2) {
      const Arc& a = basis.arcs()[cycle[k]];
      const std::size_t key = a.row * n + a.col;
      if (a.flow < theta || (a.flow == theta && key < leaving_key)) {
        theta = a.flow;
        leaving = cycle[k];
        leaving_key = key;
      }
    }
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      Arc& a = basis.arcs()[cycle[k]];
      a.flow += (k % 2 == 0) ? -theta : theta;
      if (a.flow < 0.0) a.flow = 0.0;
    }
    degenerate_run = (theta > 0.0) ? 0 : degenerate_run + 1;
    const Arc old = basis.arcs()[leaving];
    in_basis[old.row * n + old.col] = 0;
    in_basis[entering] = 1;
    basis.replace(leaving, {p, q, theta});
  }

  LpSolution sol = finish(basis, m, n, cost);
  sol.pivots = pivots;
  return sol;
}

}  // namespace mmflow
