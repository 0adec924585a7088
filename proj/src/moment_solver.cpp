#include "mmflow/moment_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "mmflow/entropy.hpp"
#include "mmflow/error.hpp"
#include "mmflow/ot_core.hpp"

namespace mmflow {

GridSpec GridSpec::parse(const std::string& text) {
  std::stringstream ss(text);
  std::string a, b, c;
  if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c) || a.empty() ||
      b.empty() || c.empty()) {
    throw ValidationError("grid must be written lo:hi:cells, got '" + text + "'");
  }
  GridSpec g;
  try {
    std::size_t pos = 0;
    g.lo = std::stod(a, &pos);
    if (pos != a.size()) throw std::invalid_argument(a);
    g.hi = std::stod(b, &pos);
    if (pos != b.size()) throw std::invalid_argument(b);
    const long long n = std::stoll(c, &pos);
    if (pos != c.size() || n <= 0) throw std::invalid_argument(c);
    g.cells = static_cast<std::size_t>(n);
  } catch (const std::logic_error&) {
    throw ValidationError("grid must be written lo:hi:cells, got '" + text + "'");
  }
  if (!(g.hi > g.lo) || !std::isfinite(g.lo) || !std::isfinite(g.hi)) {
    throw ValidationError("grid needs lo < hi");
  }
  return g;
}

namespace {

using LD = long double;

LD log_sinhc_ld(LD z) {
  const LD a = std::fabs(z);
  if (a < 1e-4L) return a * a / 6.0L - a * a * a * a / 180.0L;
  if (a < 20.0L) return std::log(std::sinh(a) / a);
  return a - std::log(2.0L * a) + std::log1p(-std::exp(-2.0L * a));
}

// Objective, masses and boundary fluxes of e^{-u_v} in d = 1, in extended
// precision so that line searches still see decreases near the optimum.
struct Eval1D {
  LD objective = 0;
  LD log_z = 0;
  std::vector<double> p;          // m_i / Z
  std::vector<std::size_t> chain; // active pieces left to right
  std::vector<double> flux;       // e^{-u(b_k)} / (Z (y_{k+1} - y_k)) between chain[k], chain[k+1]
};

Eval1D evaluate_1d(const std::vector<double>& y, std::span<const double> v, std::span<const double> mu_w,
                   const std::vector<std::size_t>& by_slope, bool need_details) {
  Eval1D ev;
  // Upper envelope by the convex-hull trick.
  std::vector<std::size_t>& order = ev.chain;
  std::vector<LD> breaks;
  for (std::size_t c : by_slope) {
    while (!order.empty()) {
      const std::size_t b = order.back();
      const LD x = (static_cast<LD>(v[c]) - v[b]) / (static_cast<LD>(y[c]) - y[b]);
      const LD start = breaks.empty() ? -INFINITY : breaks.back();
      if (x > start) {
        breaks.push_back(x);
        break;
      }
      order.pop_back();
      if (!breaks.empty()) breaks.pop_back();
    }
    order.push_back(c);
  }
  if (y[order.front()] >= 0.0 || y[order.back()] <= 0.0) {
    throw ValidationError("e^{-u} is not integrable: 0 is not interior to the hull of the sites");
  }
  const std::size_t k_count = order.size();
  std::vector<LD> log_m(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const LD yy = y[order[k]], vv = v[order[k]];
    if (k == 0) {
      log_m[k] = vv - yy * breaks[0] - std::log(-yy);
    } else if (k + 1 == k_count) {
      log_m[k] = vv - yy * breaks[k - 1] - std::log(yy);
    } else {
      const LD a = breaks[k - 1], b = breaks[k];
      const LD len = b - a, mid = 0.5L * (a + b);
      if (std::fabs(yy) <= 1e-12L) {
        log_m[k] = vv + std::log(len);
      } else {
        log_m[k] = vv - yy * mid + std::log(len) + log_sinhc_ld(0.5L * yy * len);
      }
    }
  }
  LD top = *std::max_element(log_m.begin(), log_m.end());
  LD s = 0;
  for (LD l : log_m) s += std::exp(l - top);
  ev.log_z = top + std::log(s);
  LD lin = 0;
  for (std::size_t i = 0; i < v.size(); ++i) lin += static_cast<LD>(mu_w[i]) * v[i];
  ev.objective = lin - ev.log_z;
  if (!need_details) return ev;
  ev.p.assign(v.size(), 0.0);
  for (std::size_t k = 0; k < k_count; ++k) ev.p[order[k]] = static_cast<double>(std::exp(log_m[k] - ev.log_z));
  ev.flux.resize(k_count - 1);
  for (std::size_t k = 0; k + 1 < k_count; ++k) {
    const LD yy = y[order[k]], vv = v[order[k]];
    const LD u_b = yy * breaks[k] - vv;
    const LD dy = static_cast<LD>(y[order[k + 1]]) - yy;
    ev.flux[k] = static_cast<double>(std::exp(-u_b - ev.log_z) / dy);
  }
  return ev;
}

double max_abs(const std::vector<double>& g) {
  double m = 0.0;
  for (double x : g) m = std::max(m, std::fabs(x));
  return m;
}

// F_ij = int over the common edge of cells i, j of e^{-u} / (Z |y_i - y_j|),
// d = 2, for a pruned u. Edges are clipped to the cell box.
Eigen::MatrixXd edge_fluxes(const MaxAffineConvex& u, double log_z) {
  const std::size_t n = u.size();
  Eigen::MatrixXd flux = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const auto dec = cells(u);
  const double scale = 1.0 + dec.box_half_width;
  for (const auto& poly : dec.polygons) {
    const std::size_t i = poly.piece;
    const auto& vs = poly.vertices;
    for (std::size_t k = 0; k < vs.size(); ++k) {
      const auto& a = vs[k];
      const auto& b = vs[(k + 1) % vs.size()];
      std::size_t best = n;
      double best_err = 1e-9 * scale;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i || !u.is_active(j)) continue;
        const double dy0 = u.site(i)[0] - u.site(j)[0], dy1 = u.site(i)[1] - u.site(j)[1];
        const double rhs = u.offset(i) - u.offset(j);
        const double err = std::max(std::fabs(a[0] * dy0 + a[1] * dy1 - rhs), std::fabs(b[0] * dy0 + b[1] * dy1 - rhs)) /
                           std::hypot(dy0, dy1);
        if (err < best_err) {
          best_err = err;
          best = j;
        }
      }
      if (best == n) continue;
      const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
      const double ua = a[0] * u.site(i)[0] + a[1] * u.site(i)[1] - u.offset(i);
      const double ub = b[0] * u.site(i)[0] + b[1] * u.site(i)[1] - u.offset(i);
      // u is affine along the edge: integrate from its lower end.
      const double low = std::min(ua, ub), c = std::fabs(ub - ua);
      const double shape = c < 1e-12 ? 1.0 : -std::expm1(-c) / c;
      const double dy = std::hypot(u.site(i)[0] - u.site(best)[0], u.site(i)[1] - u.site(best)[1]);
      // Each edge is seen from both sides; average the two evaluations.
      const double value = 0.5 * len * std::exp(-low - log_z) * shape / dy;
      flux(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best)) += value;
      flux(static_cast<Eigen::Index>(best), static_cast<Eigen::Index>(i)) += value;
    }
  }
  return flux;
}

// Newton direction for J. The Hessian is flux Laplacian - diag(p) + p p^T;
// its null space (constants and v_i -> v_i + y_i.w) is filled in by B B^T,
// and a small multiple of diag(mu + p) keeps inactive pieces from making it
// singular. Falls back to -g / (p + mu) if the result is not a descent
// direction.
std::vector<double> newton_direction(const Eigen::MatrixXd& flux, const std::vector<double>& p_in,
                                     const std::vector<double>& grad, const DiscreteMeasure& mu) {
  const std::size_t n = grad.size();
  const int d = mu.dim();
  const auto idx = [](std::size_t i) { return static_cast<Eigen::Index>(i); };
  Eigen::VectorXd p(idx(n)), rhs(idx(n));
  Eigen::MatrixXd gauge(idx(n), d + 1);
  for (std::size_t i = 0; i < n; ++i) {
    p[idx(i)] = p_in[i];
    rhs[idx(i)] = -grad[i];
    gauge(idx(i), 0) = 1.0;
    for (int k = 0; k < d; ++k) gauge(idx(i), k + 1) = mu.atom(i)[k];
  }
  const double reg = std::clamp(10.0 * max_abs(grad), 1e-10, 1e-2);
  Eigen::MatrixXd h = -flux + p * p.transpose() + gauge * gauge.transpose() / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    h(idx(i), idx(i)) += flux.row(idx(i)).sum() - p_in[i] + reg * (p_in[i] + mu.weight(i));
  }
  const auto ldlt = h.ldlt();
  Eigen::VectorXd dir = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !dir.allFinite() || !(dir.dot(rhs) > 0.0)) {
    for (std::size_t i = 0; i < n; ++i) dir[idx(i)] = rhs[idx(i)] / (p_in[i] + mu.weight(i));
  }
  return std::vector<double>(dir.data(), dir.data() + n);
}

// Above this many atoms the d = 1 solver uses the tridiagonal preconditioner
// instead of a dense Newton solve.
constexpr std::size_t kDenseNewtonLimit = 400;

struct Problem {
  const DiscreteMeasure& mu;
  IntegrationOptions integration;
  std::vector<double> y1;           // d = 1 sites
  std::vector<std::size_t> by_slope;

  Problem(const DiscreteMeasure& m, IntegrationOptions opts) : mu(m), integration(opts) {
    if (mu.dim() == 1) {
      for (const auto& a : mu.atoms()) y1.push_back(a[0]);
      by_slope.resize(y1.size());
      std::iota(by_slope.begin(), by_slope.end(), 0);
      std::sort(by_slope.begin(), by_slope.end(), [&](std::size_t a, std::size_t b) { return y1[a] < y1[b]; });
    }
  }

  MaxAffineConvex u_of(std::span<const double> v) const {
    return MaxAffineConvex(mu.atoms(), std::vector<double>(v.begin(), v.end()));
  }

  LD objective(std::span<const double> v) const {
    if (mu.dim() == 1) return evaluate_1d(y1, v, mu.weights(), by_slope, false).objective;
    const auto ci = integrate_cells(u_of(v), integration);
    LD lin = 0;
    for (std::size_t i = 0; i < v.size(); ++i) lin += static_cast<LD>(mu.weight(i)) * v[i];
    return lin - ci.log_z;
  }

  struct Full {
    LD objective;
    LD log_z;
    std::vector<double> p;
    std::vector<double> grad;
    std::vector<double> direction;
  };

  Full full(std::span<const double> v) const {
    Full f;
    const std::size_t n = v.size();
    if (mu.dim() == 1) {
      Eval1D ev = evaluate_1d(y1, v, mu.weights(), by_slope, true);
      f.objective = ev.objective;
      f.log_z = ev.log_z;
      f.p = std::move(ev.p);
      f.grad.resize(n);
      for (std::size_t i = 0; i < n; ++i) f.grad[i] = mu.weight(i) - f.p[i];
      if (n <= kDenseNewtonLimit) {
        Eigen::MatrixXd flux = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t a = 0; a + 1 < ev.chain.size(); ++a) {
          const auto i = static_cast<Eigen::Index>(ev.chain[a]), j = static_cast<Eigen::Index>(ev.chain[a + 1]);
          flux(i, j) = flux(j, i) = ev.flux[a];
        }
        f.direction = newton_direction(flux, f.p, f.grad, mu);
        return f;
      }
      // Preconditioner: flux Laplacian on the active chain plus diag(p + mu).
      f.direction.assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) f.direction[i] = -f.grad[i] / (f.p[i] + mu.weight(i));
      const auto& chain = ev.chain;
      const std::size_t k = chain.size();
      std::vector<double> diag(k), off(k > 0 ? k - 1 : 0), rhs(k);
      for (std::size_t a = 0; a < k; ++a) {
        const std::size_t i = chain[a];
        diag[a] = f.p[i] + mu.weight(i);
        if (a > 0) diag[a] += ev.flux[a - 1];
        if (a + 1 < k) diag[a] += ev.flux[a];
        rhs[a] = -f.grad[i];
      }
      for (std::size_t a = 0; a + 1 < k; ++a) off[a] = -ev.flux[a];
      // Thomas algorithm; the matrix is diagonally dominant.
      for (std::size_t a = 1; a < k; ++a) {
        const double w = off[a - 1] / diag[a - 1];
        diag[a] -= w * off[a - 1];
        rhs[a] -= w * rhs[a - 1];
      }
      std::vector<double> sol(k);
      for (std::size_t a = k; a-- > 0;) {
        sol[a] = (rhs[a] - (a + 1 < k ? off[a] * sol[a + 1] : 0.0)) / diag[a];
      }
      for (std::size_t a = 0; a < k; ++a) f.direction[chain[a]] = sol[a];
      return f;
    }
    const auto ci = integrate_cells(u_of(v), integration);
    LD lin = 0;
    for (std::size_t i = 0; i < n; ++i) lin += static_cast<LD>(mu.weight(i)) * v[i];
    f.objective = lin - ci.log_z;
    f.log_z = ci.log_z;
    f.p = ci.mass_fraction;
    f.grad.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.grad[i] = mu.weight(i) - f.p[i];
    const MaxAffineConvex u = prune(u_of(v));
    f.direction = newton_direction(edge_fluxes(u, static_cast<double>(ci.log_z)), f.p, f.grad, mu);
    return f;
  }
};

void check_solver_preconditions(const DiscreteMeasure& mu) {
  if (mu.dim() != 1 && mu.dim() != 2) throw ValidationError("solve supports d = 1 and d = 2");
  const Point b = barycenter(mu);
  if (norm(b) > 1e-9) throw ValidationError("barycenter of mu is not 0: center mu first");
  if (hyperplane_check(mu).degenerate) {
    throw ValidationError("mu is supported on a hyperplane: no moment measure solution exists");
  }
}

void remove_constant_mode(std::vector<double>& v, const DiscreteMeasure& mu) {
  CompensatedSum s;
  for (std::size_t i = 0; i < v.size(); ++i) s += mu.weight(i) * v[i];
  for (double& x : v) x -= s.value();
}

}  // namespace

double objective_J(std::span<const double> offsets, const DiscreteMeasure& mu, const IntegrationOptions& opts) {
  if (offsets.size() != mu.size()) throw ValidationError("one offset per atom is required");
  return static_cast<double>(Problem(mu, opts).objective(offsets));
}

std::vector<double> gradient_J(std::span<const double> offsets, const DiscreteMeasure& mu,
                               const IntegrationOptions& opts) {
  if (offsets.size() != mu.size()) throw ValidationError("one offset per atom is required");
  return Problem(mu, opts).full(offsets).grad;
}

SolveReport solve(const DiscreteMeasure& mu, const SolveOptions& opts) {
  check_solver_preconditions(mu);
  const std::size_t n = mu.size();
  std::vector<double> v(n);
  if (opts.initial_offsets) {
    if (opts.initial_offsets->size() != n) throw ValidationError("one initial offset per atom is required");
    v = *opts.initial_offsets;
  } else {
    for (std::size_t i = 0; i < n; ++i) v[i] = 0.5 * dot(mu.atom(i), mu.atom(i));
  }
  remove_constant_mode(v, mu);
  const Problem prob(mu, opts.integration);

  SolveReport rep;
  rep.sites = mu.atoms();
  Problem::Full cur = prob.full(v);
  std::size_t it = 0;
  for (;; ++it) {
    rep.trace.push_back({it, static_cast<double>(cur.objective)});
    rep.residual = max_abs(cur.grad);
    if (rep.residual <= opts.tol) {
      rep.converged = true;
      break;
    }
    if (it >= opts.max_iter) break;
    LD slope = 0;
    for (std::size_t i = 0; i < n; ++i) slope += static_cast<LD>(cur.grad[i]) * cur.direction[i];
    if (!(slope < 0)) break;
    double s = 1.0;
    std::vector<double> trial(n);
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings, s *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = v[i] + s * cur.direction[i];
      remove_constant_mode(trial, mu);
      LD value;
      try {
        value = prob.objective(trial);
      } catch (const ValidationError&) {
        continue;
      }
      if (value <= cur.objective + 1e-4L * s * slope && value < cur.objective) {
        accepted = true;
        break;
      }
    }
    if (accepted) {
      v = trial;
      cur = prob.full(v);
      continue;
    }
    // Near the optimum the decrease of J drops below the resolution of its
    // evaluation. Accept a step there only if J does not rise beyond that
    // resolution and the residual itself shrinks.
    const LD resolution = (mu.dim() == 1 ? 1e-17L : 1e-11L) * (1.0L + std::fabs(cur.objective));
    bool rescued = false;
    s = 1.0;
    for (int halvings = 0; halvings < 8 && !rescued; ++halvings, s *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = v[i] + s * cur.direction[i];
      remove_constant_mode(trial, mu);
      try {
        Problem::Full next = prob.full(trial);
        if (next.objective <= cur.objective + resolution && max_abs(next.grad) < rep.residual) {
          rescued = true;
              v = trial;
          cur = std::move(next);
        }
      } catch (const ValidationError&) {
      }
    }
    if (!rescued) break;  // stalled
    rep.trace.back().line_search = false;
  }
  rep.iterations = it;

  // Translation gauge: v_i -> v_i + y_i.w moves e^{-u} by w.
  const MaxAffineConvex u = MaxAffineConvex(mu.atoms(), v);
  const Point bc = barycenter_exp_neg(u, opts.integration);
  for (std::size_t i = 0; i < n; ++i) v[i] -= dot(mu.atom(i), bc);
  remove_constant_mode(v, mu);
  cur = prob.full(v);

  rep.gauge_offsets = v;
  rep.log_z = static_cast<double>(cur.log_z);
  rep.objective = static_cast<double>(cur.objective);
  rep.residual = max_abs(cur.grad);
  double gn = 0.0;
  for (double g : cur.grad) gn += g * g;
  rep.gradient_norm = std::sqrt(gn);
  rep.converged = rep.converged && rep.residual <= opts.tol;
  rep.offsets.resize(n);
  for (std::size_t i = 0; i < n; ++i) rep.offsets[i] = v[i] - rep.log_z;
  rep.gauge =
      "optimizer offsets satisfy sum mu_i v_i = 0 and barycenter of e^{-u} = 0; "
      "reported offsets are v - logZ so that the integral of e^{-u} is 1";
  return rep;
}

MomentMeasure moment_measure(const MaxAffineConvex& u, const IntegrationOptions& opts) {
  const auto ci = integrate_cells(u, opts);
  std::vector<Point> atoms;
  std::vector<double> weights;
  MomentMeasure out{DiscreteMeasure::from_atoms({u.site(0)}, {1.0}), {}, {}};
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (ci.mass_fraction[i] > 0.0) {
      atoms.push_back(u.site(i));
      weights.push_back(ci.mass_fraction[i]);
      out.atom_piece.push_back(i);
    } else {
      out.zero_weight.push_back(i);
    }
  }
  out.measure = DiscreteMeasure::from_atoms(std::move(atoms), std::move(weights));
  return out;
}

MomentIdentity verify_moment_identity(const MaxAffineConvex& u, const IntegrationOptions& opts) {
  const auto ci = integrate_cells(u, opts);
  MomentIdentity r;
  r.z = std::exp(ci.log_z);
  r.lhs = u.dim() * r.z;
  CompensatedSum s;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (ci.mass_fraction[i] <= 0.0) continue;
    s += ci.mass_fraction[i] * dot(u.site(i), ci.cell_mean[i]);
  }
  r.rhs = r.z * s.value();
  r.gap = r.lhs - r.rhs;
  return r;
}

namespace {
CellDecomposition cells_of_pruned(const MaxAffineConvex& u) { return cells(prune(u)); }
}  // namespace

GridDensity density_on_grid(const MaxAffineConvex& u, const GridSpec& grid) {
  if (u.dim() != 1) throw ValidationError("grid densities are one-dimensional here");
  const auto dec = cells(prune(u));
  const double h = grid.spacing();
  auto node = [&](std::size_t k) { return grid.lo + static_cast<double>(k) * h; };
  // Shift by the minimum of u over the grid so the integrand stays <= 1.
  double shift = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= grid.cells; ++k) {
    const double x = node(k);
    shift = std::min(shift, evaluate(u, std::span<const double>(&x, 1)).value);
  }
  for (const auto& iv : dec.intervals) {
    if (std::isfinite(iv.hi) && iv.hi > grid.lo && iv.hi < grid.hi) {
      shift = std::min(shift, evaluate(u, std::span<const double>(&iv.hi, 1)).value);
    }
  }
  std::vector<double> mass(grid.cells, 0.0);
  std::size_t c = 0;
  for (std::size_t k = 0; k < grid.cells; ++k) {
    const double x0 = node(k), x1 = (k + 1 == grid.cells) ? grid.hi : node(k + 1);
    while (c + 1 < dec.intervals.size() && dec.intervals[c].hi <= x0) ++c;
    CompensatedSum m;
    for (std::size_t j = c; j < dec.intervals.size(); ++j) {
      const auto& iv = dec.intervals[j];
      const double a = std::max(x0, iv.lo), b = std::min(x1, iv.hi);
      if (iv.lo >= x1) break;
      if (b <= a) continue;
      const double y = u.site(iv.piece)[0];
      const double v = u.offset(iv.piece) + shift;
      if (std::fabs(y) <= 1e-12) {
        m += std::exp(v) * (b - a);
      } else {
        m += std::exp(v - y * a) * (-std::expm1(-y * (b - a))) / y;
      }
    }
    mass[k] = m.value();
  }
  CompensatedSum total;
  for (double m : mass) total += m;
  if (!(total.value() > 0.0)) throw SolverError("e^{-u} vanishes on the grid");
  std::vector<double> values(grid.cells);
  for (std::size_t k = 0; k < grid.cells; ++k) values[k] = mass[k] / (total.value() * h);
  return GridDensity::make({grid.lo}, {h}, {grid.cells}, std::move(values));
}

GridSpec grid_for(const MaxAffineConvex& u, std::size_t cells, double tail) {
  if (u.dim() != 1) throw ValidationError("grids are one-dimensional here");
  if (!recession_check(u).integrable) throw ValidationError("e^{-u} is not integrable");
  const auto dec = cells_of_pruned(u);
  // Minimum of u sits at a kink (or is attained on a flat piece).
  double u_min = std::numeric_limits<double>::infinity();
  double first_kink = 0.0, last_kink = 0.0;
  bool any = false;
  for (const auto& iv : dec.intervals) {
    if (!std::isfinite(iv.hi)) continue;
    const double x = iv.hi;
    u_min = std::min(u_min, evaluate(u, std::span<const double>(&x, 1)).value);
    if (!any) first_kink = x;
    last_kink = x;
    any = true;
  }
  const double level = u_min - std::log(tail);  // solve u(x) = level on the end pieces
  const auto& left = dec.intervals.front();
  const auto& right = dec.intervals.back();
  const double lo = (u.offset(left.piece) + level) / u.site(left.piece)[0];
  const double hi = (u.offset(right.piece) + level) / u.site(right.piece)[0];
  GridSpec g;
  g.lo = std::min(lo, first_kink - 1.0);
  g.hi = std::max(hi, last_kink + 1.0);
  g.cells = cells;
  return g;
}

double duality_gap(const DiscreteMeasure& mu, const SolveReport& report, const GridSpec& grid) {
  if (mu.dim() != 1) throw ValidationError("duality_gap is implemented for d = 1 only");
  const GridDensity rho = density_on_grid(report.u_final(), grid);
  const double primal = entropy(rho) + max_correlation_grid(rho, mu).value;
  return std::fabs(primal - report.objective);
}

}  // namespace mmflow
