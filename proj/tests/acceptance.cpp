// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mmflow/convex.hpp"
#include "mmflow/density1d.hpp"
#include "mmflow/entropy.hpp"
#include "mmflow/measures.hpp"
#include "mmflow/moment_solver.hpp"
#include "mmflow/ot_core.hpp"
#include "mmflow/primal_verify.hpp"
#include "mmflow/suites.hpp"

using namespace mmflow;

namespace {

const double kLn2 = std::numbers::ln2;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "failed: " << what;
      pass = false;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

DiscreteMeasure two_atoms() { return DiscreteMeasure::from_atoms({{-1.0}, {1.0}}, {0.5, 0.5}); }

DiscreteMeasure gaussian_41() {
  std::vector<Point> atoms;
  std::vector<double> w;
  for (int k = 0; k <= 40; ++k) {
    const double y = -4.0 + 0.2 * k;
    atoms.push_back({y});
    w.push_back(std::exp(-0.5 * y * y));
  }
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return center(DiscreteMeasure::from_atoms(atoms, w));
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

void criterion1(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto mu = two_atoms();
  SolveOptions opts;
  opts.tol = 1e-8;
  const auto rep = solve(mu, opts);
  const double z = integrate_exp_neg(rep.u_final()).z;
  const double elapsed = seconds_since(t0);
  const double off = std::max(std::fabs(rep.offsets[0] + kLn2), std::fabs(rep.offsets[1] + kLn2));
  o.detail << "offset err " << off << ", |Z-1| " << std::fabs(z - 1.0) << ", residual " << rep.residual << ", "
           << elapsed << " s; ";
  o.require(rep.converged, "converged");
  o.require(off <= 1e-6, "offsets");
  o.require(std::fabs(z - 1.0) <= 1e-8, "Z");
  o.require(rep.residual <= 1e-8, "residual");
  o.require(elapsed < 1.0, "runtime");
}

void criterion2(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto mu = gaussian_41();
  SolveOptions opts;
  opts.tol = 1e-8;
  const auto rep = solve(mu, opts);
  const double elapsed = seconds_since(t0);
  // Best constant for v_i - y_i^2/2 in the sup norm.
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double r = rep.offsets[i] - 0.5 * mu.atom(i)[0] * mu.atom(i)[0];
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  const double fit = 0.5 * (hi - lo);
  const auto mm = moment_measure(rep.u_final());
  double push = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) push = std::max(push, std::fabs(mm.measure.weight(i) - mu.weight(i)));
  o.detail << "fit residual " << fit << ", pushforward residual " << push << ", " << rep.iterations << " iterations, "
           << elapsed << " s; ";
  o.require(rep.converged, "converged");
  o.require(fit <= 0.05, "quadratic fit");
  o.require(push <= 1e-8, "pushforward");
  o.require(elapsed < 10.0, "runtime");
}

void criterion3(Outcome& o) {
  {
    const auto mu = two_atoms();
    const auto dual = solve(mu);
    const auto primal = solve_fixed_point(mu, GridSpec{-10.0, 10.0, 2048});
    const double p = objective_P(primal.final_density, mu);
    o.detail << "two atoms P " << p << " J " << dual.objective << "; ";
    o.require(primal.converged, "two-atom fixed point converged");
    o.require(std::fabs(p - dual.objective) <= 1e-3, "two-atom |P - J|");
    o.require(std::fabs(p + kLn2) <= 1e-3, "two-atom P near -ln 2");
  }
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    const auto mu = random_centered_measure(rng, 1, 5);
    const auto dual = solve(mu);
    o.require(dual.converged, "dual converged");
    const auto grid = grid_for(dual.u_final(), 8192);
    const auto primal = solve_fixed_point(mu, grid);
    o.require(primal.converged, "fixed point converged");
    worst = std::max(worst, std::fabs(objective_P(primal.final_density, mu) - dual.objective));
  }
  o.detail << "random worst |P - J| " << worst << "; ";
  o.require(worst <= 1e-3, "random |P - J|");
}

void criterion4(Outcome& o) {
  const double c_two = c_mu(two_atoms());
  const auto corners = DiscreteMeasure::from_atoms({{1, 1}, {-1, 1}, {1, -1}, {-1, -1}}, {0.25, 0.25, 0.25, 0.25});
  const double c_four = c_mu(corners);
  o.detail << "c(two atoms) " << c_two << ", c(corners) " << c_four << "; ";
  o.require(std::fabs(c_two - 0.5) <= 1e-12, "c of two atoms");
  o.require(std::fabs(c_four - std::sqrt(2.0) / 8.0) <= 1e-6, "c of four corners");
  std::mt19937_64 rng(404);
  double worst = INFINITY;
  for (int t = 0; t < 100; ++t) {
    const int d = t < 50 ? 1 : 2;
    const auto rho = random_source_measure(rng, d, 15);
    const auto mu = random_centered_measure(rng, d, 6);
    const double slack = max_correlation(rho, mu).value - c_mu(mu) * first_moment(rho);
    worst = std::min(worst, slack);
  }
  o.detail << "min T - c M1 " << worst << "; ";
  o.require(worst >= -1e-6, "lower bound");
}

void criterion5(Outcome& o) {
  const double c1 = entropy_lower_bound_constant(1);
  o.detail << "C1 " << c1 << "; ";
  o.require(std::fabs(c1 - 4.0 / std::numbers::e) <= 1e-8, "C1");
  double worst = INFINITY, min_cell = INFINITY;
  for (std::uint64_t s = 1; s <= 200; ++s) {
    const auto rho = random_grid_density(s);
    worst = std::min(worst, entropy(rho) + c1 + std::sqrt(first_moment(rho)));
    const auto b = entropy_decomposition(rho);
    min_cell = std::min(min_cell, b.min_cell_integrand);
    o.require(b.e1 >= 0.0, "E1 >= 0");
  }
  o.detail << "min E + C1 + sqrt(M1) " << worst << ", min cell integrand of E1 " << min_cell << "; ";
  o.require(worst >= 0.0, "entropy bound");
  o.require(min_cell >= -1e-14, "E1 cellwise");
}

void criterion6(Outcome& o) {
  std::mt19937_64 rng(606);
  const auto mu = random_centered_measure(rng, 1, 5);
  const auto r = displacement_convexity_suite(100, mu, 606);
  o.detail << r.pairs << " pairs, entropy violations " << r.entropy_violations << ", correlation violations "
           << r.correlation_violations << ", worst excess " << r.worst_entropy_excess << " / "
           << r.worst_correlation_excess << "; ";
  o.require(r.pairs == 100, "pair count");
  o.require(r.entropy_violations == 0, "entropy midpoint convexity");
  o.require(r.correlation_violations == 0, "correlation midpoint convexity");
}

void criterion7(Outcome& o) {
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> ua(0.1, 0.8), ub(0.3, 2.0), uc(-1.0, 1.0);

  // Entropy derivative along (1-h) id + h T for a smooth increasing T.
  double worst_entropy = 0.0;
  std::uniform_real_distribution<double> um(-2.0, 2.0), us(0.5, 2.0);
  for (int s = 0; s < 50; ++s) {
    // Random Gaussian on a grid covering +-8 standard deviations.
    const double m = um(rng), sd = us(rng);
    std::vector<double> vals(1000);
    const double step = 16.0 * sd / 1000.0, lo = m - 8.0 * sd;
    double total = 0.0;
    for (std::size_t k = 0; k < vals.size(); ++k) {
      const double z = (lo + (k + 0.5) * step - m) / sd;
      vals[k] = std::exp(-0.5 * z * z);
      total += vals[k] * step;
    }
    for (double& x : vals) x /= total;
    const auto rho = GridDensity::make({lo}, {step}, {vals.size()}, vals);
    const double a = ua(rng), b = ub(rng), c = uc(rng), shift = uc(rng);
    auto tmap = [&](double x) { return x + a * std::tanh(b * (x - c)) + shift; };
    auto tprime = [&](double x) { return 1.0 + a * b / std::pow(std::cosh(b * (x - c)), 2.0); };
    std::vector<double> tv;
    for (std::size_t k = 0; k < rho.size(); ++k) tv.push_back(tmap(rho.cell_center(k)[0]));
    const double analytic = entropy_geodesic_derivative(rho, tv);
    // E(rho_h) - E(rho) = -int rho ln(1 + h (T' - 1)) by change of variables.
    const double h = 1e-4, dx = rho.spacing()[0];
    const auto& gl = gauss_legendre(8);
    double diff = 0.0;
    for (std::size_t k = 0; k < rho.size(); ++k) {
      if (rho.values()[k] <= 0.0) continue;
      const double mid = rho.cell_center(k)[0];
      double cell = 0.0;
      for (std::size_t q = 0; q < gl.nodes.size(); ++q)
        cell += 0.5 * gl.weights[q] * std::log1p(h * (tprime(mid + 0.5 * dx * gl.nodes[q]) - 1.0));
      diff -= rho.values()[k] * cell * dx;
    }
    const double fd = diff / h;
    worst_entropy = std::max(worst_entropy, std::fabs(analytic - fd) / std::fabs(fd));
  }

  // gradient_J against central differences.
  double worst_grad = 0.0;
  std::normal_distribution<double> nd(0.0, 0.3);
  for (int t = 0; t < 50; ++t) {
    const int d = t < 40 ? 1 : 2;
    const auto mu = random_centered_measure(rng, d, 5);
    std::vector<double> v(mu.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * dot(mu.atom(i), mu.atom(i)) + nd(rng);
    const auto g = gradient_J(v, mu);
    const double h = 1e-5;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto p = v, q = v;
      p[i] += h;
      q[i] -= h;
      worst_grad = std::max(worst_grad, std::fabs(g[i] - (objective_J(p, mu) - objective_J(q, mu)) / (2 * h)));
    }
  }

  // One-sided derivative of T(rho_t, mu) at t = 0.
  double worst_slope = INFINITY;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const auto g0 = random_grid_density(2000 + s), g1 = random_grid_density(3000 + s);
    const auto mu = random_centered_measure(rng, 1, 4);
    const auto path = geodesic(g0, g1);
    const double h = 1e-4;
    const double slope =
        (max_correlation_grid(path.at(h), mu).value - max_correlation_grid(path.at(0.0), mu).value) / h;
    const auto p0 = PiecewiseDensity1D::from_grid(g0), p1 = PiecewiseDensity1D::from_grid(g1);
    std::vector<std::size_t> order(mu.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return mu.atom(a)[0] < mu.atom(b)[0]; });
    double bound = 0.0, cum = 0.0;
    for (std::size_t j : order) {
      const double next = std::min(1.0, cum + mu.weight(j));
      bound += mu.atom(j)[0] * (p1.quantile_integral(cum, next) - p0.quantile_integral(cum, next));
      cum = next;
    }
    worst_slope = std::min(worst_slope, slope - bound);
  }

  o.detail << "entropy derivative rel err " << worst_entropy << ", gradient abs err " << worst_grad
           << ", min slope - bound " << worst_slope << "; ";
  o.require(worst_entropy <= 1e-3, "entropy derivative");
  o.require(worst_grad <= 1e-5, "gradient");
  o.require(worst_slope >= -1e-3, "one-sided derivative bound");
}

void criterion8(Outcome& o) {
  std::mt19937_64 rng(808);
  double worst_gap = 0.0, worst_support = INFINITY;
  bool monotone = true;
  for (int t = 0; t < 60; ++t) {
    const int d = 1 + t % 3;
    const auto rho = random_source_measure(rng, d, 5 + t % 20);
    const auto mu = random_source_measure(rng, d, 3 + t % 15);
    const auto r = max_correlation(rho, mu);
    worst_gap = std::max(worst_gap, std::fabs(r.value - r.dual_value));
    monotone = monotone && check_cyclical_monotonicity(r.plan, rho, mu);
    for (const auto& e : r.plan.entries)
      worst_support = std::min(worst_support, dot(rho.atom(e.source), mu.atom(e.target)) + r.value);
  }
  o.detail << "worst duality gap " << worst_gap << ", min x.y + T " << worst_support << "; ";
  o.require(worst_gap <= 1e-8, "duality gap");
  o.require(monotone, "cyclical monotonicity");
  o.require(worst_support >= -1e-9, "support bound");
}

void criterion9(Outcome& o) {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> uw(-2.0, 2.0);
  double worst_translation = 0.0, worst_const = 0.0, worst_jtrans = 0.0, worst_bary = 0.0;
  bool monotone = true;
  double worst_limit = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int d = 1 + t % 2;
    const auto rho = random_source_measure(rng, d, 12);
    const auto mu = random_centered_measure(rng, d, 6);
    Point w(d);
    for (auto& x : w) x = uw(rng);
    std::vector<Point> moved = rho.atoms();
    for (auto& p : moved)
      for (int k = 0; k < d; ++k) p[k] += w[k];
    const double base = max_correlation(rho, mu).value;
    worst_translation = std::max(
        worst_translation, std::fabs(max_correlation(DiscreteMeasure::from_atoms(moved, rho.weights()), mu).value - base));

    std::vector<double> v(mu.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * dot(mu.atom(i), mu.atom(i)) + 0.1 * uw(rng);
    const double j0 = objective_J(v, mu);
    auto vc = v, vt = v;
    for (std::size_t i = 0; i < v.size(); ++i) {
      vc[i] += 1.25;
      vt[i] += dot(mu.atom(i), w);
    }
    worst_const = std::max(worst_const, std::fabs(objective_J(vc, mu) - j0));
    worst_jtrans = std::max(worst_jtrans, std::fabs(objective_J(vt, mu) - j0));

    const auto src = random_source_measure(rng, d, 30);
    double prev = -INFINITY;
    for (double n : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 100.0}) {
      const auto mu_n = truncate_with_atom(src, n);
      worst_bary = std::max(worst_bary, norm(barycenter(mu_n)));
      const double tn = max_correlation(rho, mu_n).value;
      monotone = monotone && tn >= prev - 1e-9;
      prev = tn;
    }
    worst_limit = std::max(worst_limit, std::fabs(prev - max_correlation(rho, src).value));
  }
  o.detail << "T translation " << worst_translation << ", J constant " << worst_const << ", J translation "
           << worst_jtrans << ", truncation barycenter " << worst_bary << ", limit gap " << worst_limit << "; ";
  o.require(worst_translation <= 1e-9, "T translation invariance");
  o.require(worst_const <= 1e-12, "J constant gauge");
  o.require(worst_jtrans <= 1e-9, "J translation gauge");
  o.require(worst_bary <= 1e-12, "truncation barycenter");
  o.require(monotone, "T(rho, mu_n) nondecreasing");
  o.require(worst_limit <= 1e-9, "T(rho, mu_n) -> T(rho, mu)");
}

void criterion10(Outcome& o) {
  const auto rows = hyperplane_divergence_demo(DiscreteMeasure::from_atoms({{0.0}}, {1.0}), {1, 5, 50, 500});
  for (std::size_t k = 0; k < rows.size(); ++k) {
    o.detail << "E(" << rows[k].n << ") = " << rows[k].entropy << " ";
    o.require(std::fabs(rows[k].entropy + std::log(2.0 * rows[k].n)) <= 1e-12, "E(rho_n) = -ln(2n)");
    if (k > 0) o.require(rows[k].objective_upper_bound < rows[k - 1].objective_upper_bound, "strict decrease");
  }
  o.detail << "; ";
}

void criterion11(Outcome& o) {
  std::mt19937_64 rng(1111);
  std::normal_distribution<double> nd(0.0, 0.5);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const int d = t < 7 ? 1 : 2;
    const auto mu = random_centered_measure(rng, d, 5);
    std::vector<SolveReport> reps;
    for (int k = 0; k < 2; ++k) {
      SolveOptions opts;
      opts.tol = 1e-11;
      std::vector<double> init(mu.size());
      for (std::size_t i = 0; i < init.size(); ++i) init[i] = 0.5 * dot(mu.atom(i), mu.atom(i)) + nd(rng);
      opts.initial_offsets = init;
      reps.push_back(solve(mu, opts));
      o.require(reps.back().converged, "converged");
    }
    worst = std::max(worst, max_abs_diff(reps[0].offsets, reps[1].offsets));
  }
  o.detail << "worst offset discrepancy " << worst << "; ";
  o.require(worst <= 1e-6, "uniqueness");
}

void criterion12(Outcome& o) {
  std::mt19937_64 rng(1212);
  double worst = 0.0;
  for (int t = 0; t < 60; ++t) {
    const int d = t < 50 ? 1 : 2;
    const auto u = random_max_affine(rng, d, 4 + t % 6);
    const auto r = verify_moment_identity(u);
    worst = std::max(worst, std::fabs(r.gap) / r.z);
  }
  o.detail << "worst |gap| / Z " << worst << "; ";
  o.require(worst <= 1e-6, "moment identity");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"two-atom exact solve", criterion1},
      {"Gaussian consistency", criterion2},
      {"primal-dual match", criterion3},
      {"correlation lower bound", criterion4},
      {"entropy lower bound", criterion5},
      {"displacement convexity", criterion6},
      {"derivative formulas", criterion7},
      {"duality and monotonicity", criterion8},
      {"invariances", criterion9},
      {"hyperplane non-existence demo", criterion10},
      {"uniqueness up to translation", criterion11},
      {"moment identity", criterion12},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[k].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %zu (%s): %s[%.2f s]\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                o.detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
