#include "mmflow/suites.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "mmflow/density1d.hpp"
#include "mmflow/entropy.hpp"
#include "mmflow/error.hpp"
#include "mmflow/moment_solver.hpp"
#include "mmflow/ot_core.hpp"
#include "mmflow/primal_verify.hpp"

namespace mmflow {

DiscreteMeasure random_centered_measure(std::mt19937_64& rng, int d, std::size_t n) {
  if (n < static_cast<std::size_t>(d) + 1) {
    throw ValidationError("a full-dimensional measure in d dimensions needs at least d + 1 atoms");
  }
  std::uniform_real_distribution<double> coord(-2.0, 2.0), weight(0.2, 1.0);
  for (;;) {
    std::vector<Point> atoms(n, Point(d));
    std::vector<double> w(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (double& c : atoms[i]) c = coord(rng);
      w[i] = weight(rng);
      total += w[i];
    }
    for (double& x : w) x /= total;
    auto mu = center(DiscreteMeasure::from_atoms(std::move(atoms), std::move(w)));
    if (mu.size() == n && !hyperplane_check(mu).degenerate) return mu;
  }
}

MaxAffineConvex random_max_affine(std::mt19937_64& rng, int d, std::size_t n, double offset_scale) {
  const auto mu = random_centered_measure(rng, d, n);
  std::normal_distribution<double> g(0.0, offset_scale);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return MaxAffineConvex(mu.atoms(), std::move(v));
}

DiscreteMeasure random_source_measure(std::mt19937_64& rng, int d, std::size_t n) {
  std::normal_distribution<double> coord(0.0, 1.5);
  std::uniform_real_distribution<double> weight(0.1, 1.0);
  std::vector<Point> atoms(n, Point(d));
  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (double& c : atoms[i]) c = coord(rng);
    w[i] = weight(rng);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return center(DiscreteMeasure::from_atoms(std::move(atoms), std::move(w)));
}

namespace {

class Suite {
 public:
  Suite(std::vector<SuiteCheck>& out, std::string module) : out_(out), module_(std::move(module)) {}

  // Runs `body` for each sample and records the worst value against `limit`.
  void check(const std::string& name, std::size_t samples, double limit,
             const std::function<double(std::size_t)>& body) {
    double worst = 0.0;
    std::string error;
    try {
      for (std::size_t s = 0; s < samples; ++s) worst = std::max(worst, body(s));
    } catch (const std::exception& e) {
      error = e.what();
    }
    std::ostringstream detail;
    detail.precision(3);
    if (error.empty()) {
      detail << "worst " << worst << " (limit " << limit << ", " << samples << " cases)";
    } else {
      detail << "error: " << error;
    }
    out_.push_back({module_, name, error.empty() && worst <= limit, detail.str()});
  }

 private:
  std::vector<SuiteCheck>& out_;
  std::string module_;
};

bool wanted(const SuiteOptions& opts, const std::string& module) {
  return opts.modules.empty() || std::find(opts.modules.begin(), opts.modules.end(), module) != opts.modules.end();
}

void measures_suite(std::vector<SuiteCheck>& out, const SuiteOptions& opts, std::mt19937_64& rng) {
  Suite s(out, "measures");
  s.check("centering gives barycenter 0", opts.samples, 1e-12, [&](std::size_t) {
    const auto mu = random_source_measure(rng, 2, 12);
    return norm(barycenter(mu));
  });
  s.check("truncation keeps the barycenter", opts.samples, 1e-12, [&](std::size_t) {
    const auto mu = random_source_measure(rng, 2, 30);
    return norm(barycenter(truncate_with_atom(mu, 1.0)));
  });
  s.check("c(mu) closed forms", 1, 1e-6, [&](std::size_t) {
    const auto two = DiscreteMeasure::from_atoms({{-1.0}, {1.0}}, {0.5, 0.5});
    const auto corners = DiscreteMeasure::from_atoms({{1, 1}, {-1, 1}, {1, -1}, {-1, -1}}, {0.25, 0.25, 0.25, 0.25});
    return std::max(std::fabs(c_mu(two) - 0.5), std::fabs(c_mu(corners) - std::sqrt(2.0) / 8.0));
  });
}

void entropy_suite(std::vector<SuiteCheck>& out, const SuiteOptions& opts, std::mt19937_64& rng) {
  Suite s(out, "entropy");
  s.check("C_1 = 4/e", 1, 1e-8, [&](std::size_t) { return std::fabs(entropy_lower_bound_constant(1) - 4.0 / std::numbers::e); });
  s.check("E >= -C_1 - sqrt(M1)", opts.samples, 0.0, [&](std::size_t) {
    const auto rho = random_grid_density(rng(), 3.0);
    return -(entropy(rho) + entropy_lower_bound_constant(1) + std::sqrt(first_moment(rho)));
  });
  s.check("decomposition: E1 cellwise >= 0 and sums to E", opts.samples, 1e-10, [&](std::size_t) {
    const auto rho = random_grid_density(rng(), 3.0);
    const auto b = entropy_decomposition(rho);
    return std::max(-b.min_cell_integrand - 1e-14, std::fabs(b.total + b.box_tail - entropy(rho)));
  });
}

void ot_suite(std::vector<SuiteCheck>& out, const SuiteOptions& opts, std::mt19937_64& rng) {
  Suite s(out, "ot_core");
  std::uniform_int_distribution<int> dims(1, 2);
  std::uniform_int_distribution<std::size_t> sizes(3, 25);
  s.check("duality gap", opts.samples, 1e-8, [&](std::size_t) {
    const int d = dims(rng);
    const auto r = max_correlation(random_source_measure(rng, d, sizes(rng)), random_centered_measure(rng, d, sizes(rng)));
    return std::fabs(r.value - r.dual_value);
  });
  s.check("dual feasibility and slackness", opts.samples, 1e-9, [&](std::size_t) {
    const int d = dims(rng);
    const auto rho = random_source_measure(rng, d, sizes(rng));
    const auto mu = random_centered_measure(rng, d, sizes(rng));
    const auto r = max_correlation(rho, mu);
    double worst = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      for (std::size_t j = 0; j < mu.size(); ++j) {
        worst = std::max(worst, dot(rho.atom(i), mu.atom(j)) - r.duals.u_source[i] - r.duals.u_star_target[j]);
      }
    }
    for (const auto& e : r.plan.entries) {
      worst = std::max(worst, std::fabs(r.duals.u_source[e.source] + r.duals.u_star_target[e.target] -
                                        dot(rho.atom(e.source), mu.atom(e.target))));
    }
    return worst;
  });
  s.check("optimal plans are cyclically monotone", opts.samples, 0.0, [&](std::size_t) {
    const int d = dims(rng);
    const auto rho = random_source_measure(rng, d, sizes(rng));
    const auto mu = random_centered_measure(rng, d, sizes(rng));
    return check_cyclical_monotonicity(max_correlation(rho, mu).plan, rho, mu) ? 0.0 : 1.0;
  });
  s.check("support bound x.y >= -T", opts.samples, 1e-9, [&](std::size_t) {
    const int d = dims(rng);
    const auto rho = random_source_measure(rng, d, sizes(rng));
    const auto mu = random_centered_measure(rng, d, sizes(rng));
    const auto r = max_correlation(rho, mu);
    double worst = 0.0;
    for (const auto& e : r.plan.entries) worst = std::max(worst, -r.value - dot(rho.atom(e.source), mu.atom(e.target)));
    return worst;
  });
  s.check("translation invariance", opts.samples, 1e-9, [&](std::size_t) {
    const int d = dims(rng);
    const auto rho = random_source_measure(rng, d, sizes(rng));
    const auto mu = random_centered_measure(rng, d, sizes(rng));
    std::normal_distribution<double> g;
    Point w(d);
    for (double& c : w) c = g(rng);
    std::vector<Point> shifted = rho.atoms();
    for (auto& x : shifted) {
      for (int a = 0; a < d; ++a) x[a] += w[a];
    }
    const auto moved = DiscreteMeasure::from_atoms(shifted, rho.weights());
    return std::fabs(max_correlation(moved, mu).value - max_correlation(rho, mu).value);
  });
  s.check("T = (M2 + M2 - W2^2) / 2", opts.samples, 1e-8, [&](std::size_t) {
    const int d = dims(rng);
    const auto rho = random_source_measure(rng, d, sizes(rng));
    const auto mu = random_centered_measure(rng, d, sizes(rng));
    const double w = w2_distance(rho, mu);
    return std::fabs(max_correlation(rho, mu).value - 0.5 * (second_moment(rho) + second_moment(mu) - w * w));
  });
  s.check("T >= c(mu) M1(rho)", opts.samples, 1e-6, [&](std::size_t) {
    const int d = dims(rng);
    const auto rho = random_source_measure(rng, d, sizes(rng));
    const auto mu = random_centered_measure(rng, d, sizes(rng));
    return c_mu(mu) * first_moment(rho) - max_correlation(rho, mu).value;
  });
}

void convex_suite(std::vector<SuiteCheck>& out, const SuiteOptions& opts, std::mt19937_64& rng) {
  Suite s(out, "convex");
  IntegrationOptions io;
  io.threads = opts.threads;
  std::uniform_int_distribution<int> dims(1, 2);
  std::uniform_int_distribution<std::size_t> sizes(3, 12);
  s.check("cell masses sum to Z", opts.samples, 1e-9, [&](std::size_t) {
    const auto u = random_max_affine(rng, dims(rng), sizes(rng));
    const auto ci = integrate_cells(u, io);
    double total = 0.0;
    for (double f : ci.mass_fraction) total += f;
    return std::fabs(total - 1.0);
  });
  s.check("argmax matches the containing cell", opts.samples, 0.0, [&](std::size_t) {
    const auto u = prune(random_max_affine(rng, 1, sizes(rng)));
    const auto dec = cells(u);
    std::normal_distribution<double> g(0.0, 3.0);
    double bad = 0.0;
    for (int k = 0; k < 200; ++k) {
      const double x = g(rng);
      const auto ev = evaluate(u, std::span<const double>(&x, 1));
      for (const auto& iv : dec.intervals) {
        if (x > iv.lo && x < iv.hi && iv.piece != ev.index) bad = 1.0;
      }
    }
    return bad;
  });
  s.check("constant shift scales Z by e^c", opts.samples, 1e-10, [&](std::size_t) {
    const auto u = random_max_affine(rng, dims(rng), sizes(rng));
    std::vector<double> v = u.offsets();
    for (double& x : v) x += 0.7;
    const double z0 = integrate_exp_neg(u, io).z, z1 = integrate_exp_neg(u.with_offsets(v), io).z;
    return std::fabs(z1 / (z0 * std::exp(0.7)) - 1.0);
  });
  s.check("translation moves the barycenter", opts.samples, 1e-8, [&](std::size_t) {
    const auto u = random_max_affine(rng, dims(rng), sizes(rng));
    Point w(u.dim(), 0.3);
    std::vector<double> v = u.offsets();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += dot(u.site(i), w);
    const auto b0 = barycenter_exp_neg(u, io), b1 = barycenter_exp_neg(u.with_offsets(v), io);
    double worst = std::fabs(integrate_exp_neg(u.with_offsets(v), io).z / integrate_exp_neg(u, io).z - 1.0);
    for (int a = 0; a < u.dim(); ++a) worst = std::max(worst, std::fabs(b1[a] - b0[a] - w[a]));
    return worst;
  });
  s.check("double conjugate of a convex function", 1, 1e-6, [&](std::size_t) {
    std::vector<double> xs, fs;
    for (int k = 0; k <= 600; ++k) {
      xs.push_back(-3.0 + 0.01 * k);
      fs.push_back(0.5 * xs.back() * xs.back());
    }
    const auto f2 = conjugate_grid(xs, conjugate_grid(xs, fs, xs), xs);
    double worst = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) worst = std::max(worst, std::fabs(f2[k] - fs[k]));
    return worst;
  });
}

void solver_suite(std::vector<SuiteCheck>& out, const SuiteOptions& opts, std::mt19937_64& rng) {
  Suite s(out, "moment_solver");
  std::uniform_int_distribution<std::size_t> sizes(3, 8);
  s.check("gradient matches central differences", opts.samples, 1e-5, [&](std::size_t) {
    const auto mu = random_centered_measure(rng, 1, sizes(rng));
    std::normal_distribution<double> g(0.0, 0.5);
    std::vector<double> v(mu.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * mu.atom(i)[0] * mu.atom(i)[0] + g(rng);
    const auto grad = gradient_J(v, mu);
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto vp = v, vm = v;
      vp[i] += 1e-5;
      vm[i] -= 1e-5;
      worst = std::max(worst, std::fabs(grad[i] - (objective_J(vp, mu) - objective_J(vm, mu)) / 2e-5));
    }
    return worst;
  });
  s.check("J gauge invariances", opts.samples, 1e-9, [&](std::size_t) {
    const auto mu = random_centered_measure(rng, 1, sizes(rng));
    std::vector<double> v(mu.size()), vc(mu.size()), vt(mu.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = 0.5 * mu.atom(i)[0] * mu.atom(i)[0];
      vc[i] = v[i] + 1.3;
      vt[i] = v[i] + 0.4 * mu.atom(i)[0];
    }
    const double j0 = objective_J(v, mu);
    return std::max(std::fabs(objective_J(vc, mu) - j0), std::fabs(objective_J(vt, mu) - j0));
  });
  s.check("solve reaches the residual", std::max<std::size_t>(1, opts.samples / 4), 1e-8, [&](std::size_t) {
    const auto rep = solve(random_centered_measure(rng, 1, sizes(rng)));
    return rep.converged ? rep.residual : 1.0;
  });
  s.check("moment identity", opts.samples, 1e-6, [&](std::size_t) {
    const auto id = verify_moment_identity(random_max_affine(rng, 1, sizes(rng)));
    return std::fabs(id.gap) / id.z;
  });
}

void primal_suite(std::vector<SuiteCheck>& out, const SuiteOptions& opts, std::mt19937_64& rng) {
  Suite s(out, "primal_verify");
  s.check("displacement convexity of E and T", 1, 0.0, [&](std::size_t) {
    const auto mu = random_centered_measure(rng, 1, 5);
    const auto rep = displacement_convexity_suite(opts.samples, mu, rng());
    return static_cast<double>(rep.entropy_violations + rep.correlation_violations + rep.strictness_violations);
  });
  s.check("hyperplane demo entropy = -ln(2n)", 1, 1e-12, [&](std::size_t) {
    const auto rows = hyperplane_divergence_demo(DiscreteMeasure::from_atoms({{0.0}}, {1.0}), {1, 5, 50, 500});
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, std::fabs(r.entropy + std::log(2.0 * r.n)));
    return worst;
  });
}

}  // namespace

std::vector<SuiteCheck> run_invariant_suites(const SuiteOptions& opts) {
  std::vector<SuiteCheck> out;
  // Each module draws from its own stream so selecting modules does not
  // change the instances another module sees.
  const std::pair<const char*, void (*)(std::vector<SuiteCheck>&, const SuiteOptions&, std::mt19937_64&)> table[] = {
      {"measures", measures_suite}, {"entropy", entropy_suite},      {"ot_core", ot_suite},
      {"convex", convex_suite},     {"moment_solver", solver_suite}, {"primal_verify", primal_suite},
  };
  for (const std::string& m : opts.modules) {
    bool known = false;
    for (const auto& [name, fn] : table) known = known || m == name;
    if (!known) throw ValidationError("unknown module '" + m + "'");
  }
  std::uint64_t k = 0;
  for (const auto& [name, fn] : table) {
    std::mt19937_64 rng(opts.seed * 1000003ULL + (k++));
    if (wanted(opts, name)) fn(out, opts, rng);
  }
  return out;
}

}  // namespace mmflow
