#include "mmflow/ot_core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "mmflow/error.hpp"

namespace mmflow {

namespace {

void require_same_dim(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dim() != b.dim()) throw ValidationError("dimension mismatch between measures");
}

std::vector<std::size_t> sorted_order_1d(const DiscreteMeasure& m) {
  std::vector<std::size_t> idx(m.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return m.atom(a)[0] < m.atom(b)[0]; });
  return idx;
}

// Solves min sum c_ij g_ij with the 1D sorted fast path when possible.
// Both costs used here (-x.y and |x-y|^2) are Monge in sorted order.
struct CouplingSolution {
  TransportPlan plan;
  std::vector<double> row;  // potentials, original indexing
  std::vector<double> col;
};

CouplingSolution solve_coupling(const DiscreteMeasure& rho, const DiscreteMeasure& mu,
                                const std::function<double(const Point&, const Point&)>& cost) {
  require_same_dim(rho, mu);
  const std::size_t m = rho.size(), n = mu.size();
  std::vector<std::size_t> ri(m), ci(n);
  std::iota(ri.begin(), ri.end(), 0);
  std::iota(ci.begin(), ci.end(), 0);
  const bool one_d = rho.dim() == 1;
  if (one_d) {
    ri = sorted_order_1d(rho);
    ci = sorted_order_1d(mu);
  } else if (m > kMaxLpSide || n > kMaxLpSide) {
    throw ValidationError("instance too large for the exact transport solver");
  }
  std::vector<double> supply(m), demand(n);
  for (std::size_t i = 0; i < m; ++i) supply[i] = rho.weight(ri[i]);
  for (std::size_t j = 0; j < n; ++j) demand[j] = mu.weight(ci[j]);

  LpSolution lp;
  if (one_d) {
    auto c = [&](std::size_t i, std::size_t j) { return cost(rho.atom(ri[i]), mu.atom(ci[j])); };
    lp = northwest_corner(supply, demand, c);
  } else {
    std::vector<double> matrix(m * n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) matrix[i * n + j] = cost(rho.atom(i), mu.atom(j));
    }
    lp = solve_transportation(supply, demand, [&](std::size_t i, std::size_t j) { return matrix[i * n + j]; });
  }

  CouplingSolution out;
  out.plan.source_count = m;
  out.plan.target_count = n;
  for (const auto& e : lp.entries) out.plan.entries.push_back({ri[e.source], ci[e.target], e.mass});
  std::sort(out.plan.entries.begin(), out.plan.entries.end(), [](const PlanEntry& a, const PlanEntry& b) {
    return a.source != b.source ? a.source < b.source : a.target < b.target;
  });
  out.row.assign(m, 0.0);
  out.col.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) out.row[ri[i]] = lp.row_potential[i];
  for (std::size_t j = 0; j < n; ++j) out.col[ci[j]] = lp.col_potential[j];
  return out;
}

double plan_correlation(const TransportPlan& plan, const DiscreteMeasure& rho, const DiscreteMeasure& mu) {
  CompensatedSum s;
  for (const auto& e : plan.entries) s += e.mass * dot(rho.atom(e.source), mu.atom(e.target));
  return s.value();
}

}  // namespace

double plan_marginal_error(const TransportPlan& plan, const DiscreteMeasure& rho, const DiscreteMeasure& mu) {
  std::vector<CompensatedSum> rows(rho.size()), cols(mu.size());
  for (const auto& e : plan.entries) {
    if (e.source >= rho.size() || e.target >= mu.size()) return std::numeric_limits<double>::infinity();
    rows[e.source] += e.mass;
    cols[e.target] += e.mass;
  }
  double err = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) err = std::max(err, std::fabs(rows[i].value() - rho.weight(i)));
  for (std::size_t j = 0; j < mu.size(); ++j) err = std::max(err, std::fabs(cols[j].value() - mu.weight(j)));
  return err;
}

CorrelationResult max_correlation(const DiscreteMeasure& rho, const DiscreteMeasure& mu) {
  auto sol = solve_coupling(rho, mu, [](const Point& x, const Point& y) { return -dot(x, y); });
  CorrelationResult res;
  res.plan = std::move(sol.plan);
  res.value = plan_correlation(res.plan, rho, mu);

  // min-cost potentials r + s <= -x.y become u = -r, u* = -s.
  std::vector<double>& ustar = res.duals.u_star_target;
  ustar.resize(mu.size());
  double shift = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < mu.size(); ++j) {
    ustar[j] = -sol.col[j];
    shift = std::min(shift, ustar[j] - 0.5 * dot(mu.atom(j), mu.atom(j)));
  }
  for (double& v : ustar) v -= shift;
  std::vector<double>& u = res.duals.u_source;
  u.assign(rho.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    for (std::size_t j = 0; j < mu.size(); ++j) u[i] = std::max(u[i], dot(rho.atom(i), mu.atom(j)) - ustar[j]);
  }
  CompensatedSum dual;
  for (std::size_t i = 0; i < rho.size(); ++i) dual += rho.weight(i) * u[i];
  for (std::size_t j = 0; j < mu.size(); ++j) dual += mu.weight(j) * ustar[j];
  res.dual_value = dual.value();
  return res;
}

double w2_distance(const DiscreteMeasure& rho, const DiscreteMeasure& mu) {
  auto sq = [](const Point& x, const Point& y) {
    double s = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) s += (x[a] - y[a]) * (x[a] - y[a]);
    return s;
  };
  const auto sol = solve_coupling(rho, mu, sq);
  CompensatedSum total;
  for (const auto& e : sol.plan.entries) total += e.mass * sq(rho.atom(e.source), mu.atom(e.target));
  return std::sqrt(std::max(0.0, total.value()));
}

GridCorrelation max_correlation_grid(const PiecewiseDensity1D& rho, const DiscreteMeasure& mu) {
  if (mu.dim() != 1) throw ValidationError("max_correlation_grid needs a one-dimensional target");
  const auto order = sorted_order_1d(mu);
  const std::size_t n = order.size();

  CompensatedSum value;
  std::vector<double> offsets(n, 0.0);
  double w = 0.0;
  double b = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    const double y = mu.atom(j)[0];
    const double w_next = (k + 1 == n) ? 1.0 : std::min(1.0, w + mu.weight(j));
    value += y * rho.quantile_integral(w, w_next);
    if (k > 0) {
      const double y_prev = mu.atom(order[k - 1])[0];
      b += (y - y_prev) * rho.quantile(w);
    }
    offsets[j] = b;
    w = w_next;
  }
  std::vector<Point> sites;
  for (std::size_t j = 0; j < mu.size(); ++j) sites.push_back(mu.atom(j));
  MaxAffineConvex u(sites, offsets);
  const double x0 = rho.lower();
  const double u_x0 = evaluate(u, std::span<const double>(&x0, 1)).value;
  for (double& o : offsets) o += u_x0;
  u = prune(u.with_offsets(offsets));

  GridCorrelation out{value.value(), 0.0, u, {}, {}};
  out.node_x.push_back(rho.lower());
  for (const auto& s : rho.segments()) out.node_x.push_back(s.hi);
  for (double x : out.node_x) out.node_u.push_back(evaluate(u, std::span<const double>(&x, 1)).value);
  out.node_u.front() = 0.0;

  // Dual objective: int u drho + sum mu_j b_j, integrating the affine
  // pieces exactly between breakpoints.
  std::vector<double> kinks;
  for (const auto& iv : cells(u).intervals) {
    if (std::isfinite(iv.hi)) kinks.push_back(iv.hi);
  }
  CompensatedSum dual;
  for (const auto& s : rho.segments()) {
    if (s.mass <= 0.0) continue;
    const double density = s.mass / (s.hi - s.lo);
    std::vector<double> cuts = {s.lo};
    for (double k : kinks) {
      if (k > s.lo && k < s.hi) cuts.push_back(k);
    }
    cuts.push_back(s.hi);
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double a = cuts[c], e = cuts[c + 1];
      const double mid = 0.5 * (a + e);
      const std::size_t piece = evaluate(u, std::span<const double>(&mid, 1)).index;
      const double y = u.site(piece)[0];
      dual += density * (0.5 * y * (e - a) * (e + a) - u.offset(piece) * (e - a));
    }
  }
  for (std::size_t j = 0; j < mu.size(); ++j) dual += mu.weight(j) * u.offset(j);
  out.dual_value = dual.value();
  return out;
}

GridCorrelation max_correlation_grid(const GridDensity& rho, const DiscreteMeasure& mu) {
  return max_correlation_grid(PiecewiseDensity1D::from_grid(rho), mu);
}

bool check_cyclical_monotonicity(const TransportPlan& plan, const DiscreteMeasure& rho,
                                 const DiscreteMeasure& mu) {
  const auto& e = plan.entries;
  for (std::size_t a = 0; a < e.size(); ++a) {
    const Point& xa = rho.atom(e[a].source);
    const Point& ya = mu.atom(e[a].target);
    for (std::size_t b = a + 1; b < e.size(); ++b) {
      const Point& xb = rho.atom(e[b].source);
      const Point& yb = mu.atom(e[b].target);
      if (dot(xa, ya) + dot(xb, yb) < dot(xa, yb) + dot(xb, ya) - 1e-9) return false;
    }
  }
  return true;
}

namespace {

// Integral of (x.e)_+ under rho, and v+ = integral of x over {x.e > 0}.
double positive_part(const DiscreteMeasure& rho, const Point& e, Point* v_plus) {
  double s = 0.0;
  if (v_plus) v_plus->assign(rho.dim(), 0.0);
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double p = dot(rho.atom(i), e);
    if (p > 0.0) {
      s += rho.weight(i) * p;
      if (v_plus) {
        for (int a = 0; a < rho.dim(); ++a) (*v_plus)[a] += rho.weight(i) * rho.atom(i)[a];
      }
    }
  }
  return s;
}

Point best_direction(const DiscreteMeasure& rho, std::uint64_t seed) {
  const int d = rho.dim();
  std::vector<Point> candidates;
  if (d == 1) {
    candidates = {{1.0}, {-1.0}};
  } else {
    for (int a = 0; a < d; ++a) {
      Point e(d, 0.0);
      e[a] = 1.0;
      candidates.push_back(e);
      e[a] = -1.0;
      candidates.push_back(e);
    }
    if (d == 2) {
      for (int k = 0; k < 720; ++k) {
        const double th = 2.0 * std::numbers::pi * k / 720.0;
        candidates.push_back({std::cos(th), std::sin(th)});
      }
    } else {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> g;
      for (int k = 0; k < 2000; ++k) {
        Point e(d);
        for (double& c : e) c = g(rng);
        const double nn = norm(e);
        for (double& c : e) c /= nn;
        candidates.push_back(e);
      }
    }
  }
  Point best = candidates.front();
  double best_val = -1.0;
  for (const auto& e : candidates) {
    const double v = positive_part(rho, e, nullptr);
    if (v > best_val) {
      best_val = v;
      best = e;
    }
  }
  if (d == 1) return best;
  // Fixed point e <- v+/|v+|: each step does not decrease the objective,
  // and a fixed point has v+ parallel to e.
  for (int it = 0; it < 200; ++it) {
    Point v;
    positive_part(rho, best, &v);
    const double nv = norm(v);
    if (nv <= 0.0) break;
    Point next = v;
    for (double& c : next) c /= nv;
    const double val = positive_part(rho, next, nullptr);
    double change = 0.0;
    for (int a = 0; a < d; ++a) change = std::max(change, std::fabs(next[a] - best[a]));
    if (val < best_val) break;
    best = next;
    best_val = val;
    if (change < 1e-15) break;
  }
  return best;
}

}  // namespace

WitnessPlan witness_halfspace_plan(const DiscreteMeasure& rho, const DiscreteMeasure& mu, std::uint64_t seed) {
  require_same_dim(rho, mu);
  const Point bc = barycenter(rho);
  if (norm(bc) > 1e-9) throw ValidationError("witness plan needs a centered source measure");

  WitnessPlan out;
  out.direction = best_direction(rho, seed);
  const Point& e = out.direction;
  std::vector<std::size_t> plus, minus;
  double m_plus = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (dot(rho.atom(i), e) > 0.0) {
      plus.push_back(i);
      m_plus += rho.weight(i);
    } else {
      minus.push_back(i);
    }
  }
  const double m_minus = 1.0 - m_plus;
  if (plus.empty() || minus.empty() || m_plus <= 0.0 || m_minus <= 0.0) {
    throw ValidationError("degenerate split: all source mass lies on the splitting hyperplane");
  }
  out.positive_mass = m_plus;

  // Split mu along e: the top m+ of mass goes to mu+.
  std::vector<std::size_t> order(mu.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dot(mu.atom(a), e) > dot(mu.atom(b), e); });
  std::vector<std::pair<std::size_t, double>> mu_plus, mu_minus;
  double left = m_plus;
  for (std::size_t j : order) {
    const double w = mu.weight(j);
    const double take = std::min(w, std::max(0.0, left));
    if (take > 0.0) {
      mu_plus.push_back({j, take});
      out.level = dot(mu.atom(j), e);
    }
    if (w - take > 0.0) mu_minus.push_back({j, w - take});
    left -= take;
  }

  out.plan.source_count = rho.size();
  out.plan.target_count = mu.size();
  auto spread = [&](const std::vector<std::size_t>& src, double mass,
                    const std::vector<std::pair<std::size_t, double>>& tgt) {
    for (std::size_t i : src) {
      for (const auto& [j, w] : tgt) {
        const double m = rho.weight(i) * w / mass;
        if (m > 0.0) out.plan.entries.push_back({i, j, m});
      }
    }
  };
  spread(plus, m_plus, mu_plus);
  spread(minus, m_minus, mu_minus);
  std::sort(out.plan.entries.begin(), out.plan.entries.end(), [](const PlanEntry& a, const PlanEntry& b) {
    return a.source != b.source ? a.source < b.source : a.target < b.target;
  });
  out.value = plan_correlation(out.plan, rho, mu);
  return out;
}

GeodesicPath::GeodesicPath(DiscreteMeasure rho0, DiscreteMeasure rho1)
    : rho0_(std::move(rho0)), rho1_(std::move(rho1)) {
  plan_ = max_correlation(rho0_, rho1_).plan;
}

DiscreteMeasure GeodesicPath::at(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("geodesic time must lie in [0, 1]");
  if (t == 0.0) return rho0_;
  if (t == 1.0) return rho1_;
  std::vector<Point> atoms;
  std::vector<double> weights;
  for (const auto& e : plan_.entries) {
    const Point& x = rho0_.atom(e.source);
    const Point& y = rho1_.atom(e.target);
    Point z(x.size());
    for (std::size_t a = 0; a < x.size(); ++a) z[a] = (1.0 - t) * x[a] + t * y[a];
    atoms.push_back(std::move(z));
    weights.push_back(e.mass);
  }
  return DiscreteMeasure::from_atoms(std::move(atoms), std::move(weights));
}

GeodesicPath1D::GeodesicPath1D(const GridDensity& rho0, const GridDensity& rho1)
    : rho0_grid_(rho0),
      rho1_grid_(rho1),
      rho0_(PiecewiseDensity1D::from_grid(rho0)),
      rho1_(PiecewiseDensity1D::from_grid(rho1)) {}

PiecewiseDensity1D GeodesicPath1D::at(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("geodesic time must lie in [0, 1]");
  return displacement_interpolate(rho0_, rho1_, t);
}

GridDensity GeodesicPath1D::grid_at(double t) const {
  if (t == 0.0) return rho0_grid_;
  const auto p = at(t);
  const std::size_t cells = rho0_grid_.size();
  const double lo = p.lower(), hi = p.upper();
  return p.to_grid(lo, (hi - lo) / static_cast<double>(cells), cells);
}

std::vector<double> GeodesicPath1D::map_at(std::span<const double> xs) const {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(rho1_.quantile(rho0_.cdf(x)));
  return out;
}

GeodesicPath geodesic(const DiscreteMeasure& rho0, const DiscreteMeasure& rho1) {
  require_same_dim(rho0, rho1);
  return GeodesicPath(rho0, rho1);
}

GeodesicPath1D geodesic(const GridDensity& rho0, const GridDensity& rho1) {
  if (rho0.dim() != rho1.dim()) throw ValidationError("dimension mismatch between densities");
  if (rho0.dim() != 1) throw ValidationError("grid geodesics are implemented for d = 1 only");
  return GeodesicPath1D(rho0, rho1);
}

double entropy_geodesic_derivative(const GridDensity& rho, std::span<const double> map_values) {
  if (rho.dim() != 1) throw ValidationError("entropy derivative needs a one-dimensional density");
  const std::size_t n = rho.size();
  if (map_values.size() != n) throw ValidationError("map must be sampled at every cell center");
  for (std::size_t k = 1; k < n; ++k) {
    if (map_values[k] < map_values[k - 1]) throw ValidationError("transport map is not monotone");
  }
  if (n < 2) return 0.0;
  const double h = rho.spacing()[0];
  const double vol = rho.cell_volume();
  CompensatedSum s;
  for (std::size_t k = 0; k < n; ++k) {
    double deriv;
    if (n == 2) {
      deriv = (map_values[1] - map_values[0]) / h;
    } else if (k == 0) {
      deriv = (-3.0 * map_values[0] + 4.0 * map_values[1] - map_values[2]) / (2.0 * h);
    } else if (k + 1 == n) {
      deriv = (3.0 * map_values[n - 1] - 4.0 * map_values[n - 2] + map_values[n - 3]) / (2.0 * h);
    } else {
      deriv = (map_values[k + 1] - map_values[k - 1]) / (2.0 * h);
    }
    s += (deriv - 1.0) * rho.values()[k] * vol;
  }
  return -s.value();
}

}  // namespace mmflow
