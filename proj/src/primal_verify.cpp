#include "mmflow/primal_verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mmflow/density1d.hpp"
#include "mmflow/entropy.hpp"
#include "mmflow/error.hpp"
#include "mmflow/ot_core.hpp"

namespace mmflow {

double objective_P(const GridDensity& rho, const DiscreteMeasure& mu) {
  if (rho.dim() != 1 || mu.dim() != 1) throw ValidationError("objective_P is implemented for d = 1 only");
  return entropy(rho) + max_correlation_grid(rho, mu).value;
}

namespace {

GridDensity grid_density(const GridSpec& g, const std::vector<double>& values) {
  CompensatedSum total;
  for (double v : values) total += v * g.spacing();
  std::vector<double> normalized(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) normalized[k] = values[k] / total.value();
  return GridDensity::make({g.lo}, {g.spacing()}, {g.cells}, std::move(normalized));
}

}  // namespace

PrimalReport solve_fixed_point(const DiscreteMeasure& mu, const GridSpec& grid, const PrimalOptions& opts) {
  if (mu.dim() != 1) throw ValidationError("the primal fixed point is implemented for d = 1 only");
  if (norm(barycenter(mu)) > 1e-9) throw ValidationError("barycenter of mu is not 0: center mu first");
  if (hyperplane_check(mu).degenerate) throw ValidationError("mu is supported on a hyperplane");
  if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw ValidationError("damping must lie in (0, 1]");

  GridSpec g = grid;
  std::vector<double> rho(g.cells, 1.0 / (g.hi - g.lo));
  PrimalReport rep{grid_density(g, rho), g, {}, 0.0, 0, false, false};
  for (std::size_t k = 0;; ++k) {
    const GridDensity current = grid_density(g, rho);
    const auto corr = max_correlation_grid(current, mu);
    rep.objective_trace.push_back(entropy(current) + corr.value);
    const GridDensity target = density_on_grid(corr.potential, g);
    const auto& tv = target.values();
    if (opts.auto_expand && !rep.expanded && std::max(tv.front(), tv.back()) > opts.boundary_threshold) {
      const std::size_t pad = (g.cells + 1) / 2;
      const double h = g.spacing();
      GridSpec wider{g.lo - static_cast<double>(pad) * h, g.hi + static_cast<double>(pad) * h, g.cells + 2 * pad};
      std::vector<double> padded(wider.cells, 0.0);
      std::copy(rho.begin(), rho.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));
      g = wider;
      rho = std::move(padded);
      rep.expanded = true;
      rep.objective_trace.pop_back();
      continue;
    }
    double residual = 0.0;
    const auto& cv = current.values();
    for (std::size_t i = 0; i < cv.size(); ++i) residual = std::max(residual, std::fabs(cv[i] - tv[i]));
    rep.fixed_point_residual = residual;
    rep.final_density = current;
    rep.grid = g;
    rep.iterations = k;
    if (residual <= opts.tol) {
      rep.converged = true;
      break;
    }
    if (k >= opts.max_iter) break;
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = (1.0 - opts.damping) * cv[i] + opts.damping * tv[i];
  }
  return rep;
}

std::vector<HyperplaneRow> hyperplane_divergence_demo(const DiscreteMeasure& mu, const std::vector<double>& n_list) {
  const int d = mu.dim();
  for (const auto& y : mu.atoms()) {
    if (std::fabs(y[d - 1]) > 1e-12) {
      throw ValidationError("mu is not concentrated on the hyperplane {x_d = 0}");
    }
  }
  const double bound = std::sqrt(static_cast<double>(d)) * first_moment(mu);
  std::vector<HyperplaneRow> rows;
  for (double n : n_list) {
    if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("slab half-length n must be positive");
    Point origin(d, -1.0), spacing(d, 2.0);
    origin[d - 1] = -n;
    spacing[d - 1] = 2.0 * n;
    const double value = 1.0 / (std::pow(2.0, d) * n);
    const auto slab = GridDensity::make(origin, spacing, std::vector<std::size_t>(d, 1), {value});
    const double e = entropy(slab);
    rows.push_back({n, e, bound, e + bound});
  }
  return rows;
}

GridDensity random_grid_density(std::uint64_t seed, double center_spread) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t cells = 40 + static_cast<std::size_t>(unit(rng) * 120.0);
  const double width = 1.0 + 5.0 * unit(rng);
  const double lo = center_spread * (2.0 * unit(rng) - 1.0) - 0.5 * width;
  const double h = width / static_cast<double>(cells);
  const int bumps = 1 + static_cast<int>(unit(rng) * 3.0);
  std::vector<double> centers, scales, heights;
  for (int b = 0; b < bumps; ++b) {
    centers.push_back(lo + width * unit(rng));
    scales.push_back(width * (0.05 + 0.3 * unit(rng)));
    heights.push_back(0.2 + unit(rng));
  }
  const double floor = 0.01 + 0.1 * unit(rng);
  std::vector<double> values(cells);
  CompensatedSum total;
  for (std::size_t k = 0; k < cells; ++k) {
    const double x = lo + (static_cast<double>(k) + 0.5) * h;
    double v = floor;
    for (int b = 0; b < bumps; ++b) {
      const double z = (x - centers[b]) / scales[b];
      v += heights[b] * std::exp(-0.5 * z * z);
    }
    values[k] = v;
    total += v * h;
  }
  for (double& v : values) v /= total.value();
  return GridDensity::make({lo}, {h}, {cells}, std::move(values));
}

ConvexitySuiteReport displacement_convexity_suite(std::size_t samples, const DiscreteMeasure& mu, std::uint64_t seed) {
  if (mu.dim() != 1) throw ValidationError("the convexity suite is implemented for d = 1 only");
  ConvexitySuiteReport rep;
  std::mt19937_64 rng(seed);
  const double ts[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (std::size_t s = 0; s < samples; ++s) {
    const GridDensity g0 = random_grid_density(rng());
    const GridDensity g1 = random_grid_density(rng());
    const GeodesicPath1D path(g0, g1);
    double e[5], c[5];
    for (int k = 0; k < 5; ++k) {
      const PiecewiseDensity1D p = path.at(ts[k]);
      e[k] = p.entropy();
      c[k] = max_correlation_grid(p, mu).value;
    }
    for (int k = 1; k <= 3; ++k) {
      const double ex_e = e[k] - 0.5 * (e[k - 1] + e[k + 1]);
      const double ex_c = c[k] - 0.5 * (c[k - 1] + c[k + 1]);
      rep.worst_entropy_excess = std::max(rep.worst_entropy_excess, ex_e);
      rep.worst_correlation_excess = std::max(rep.worst_correlation_excess, ex_c);
      if (ex_e > 1e-7) ++rep.entropy_violations;
      if (ex_c > 1e-7) ++rep.correlation_violations;
    }
    // Range of T(x) - x over the support of rho0.
    std::vector<double> xs;
    const auto p0 = PiecewiseDensity1D::from_grid(g0);
    for (const auto& seg : p0.segments()) {
      if (seg.mass > 0.0) {
        xs.push_back(seg.lo);
        xs.push_back(0.5 * (seg.lo + seg.hi));
      }
    }
    const auto mapped = path.map_at(xs);
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      lo = std::min(lo, mapped[i] - xs[i]);
      hi = std::max(hi, mapped[i] - xs[i]);
    }
    if (hi - lo > 1e-3) {
      ++rep.strict_checks;
      if (!(e[2] < 0.5 * (e[0] + e[4]) - 1e-9)) ++rep.strictness_violations;
    }
    ++rep.pairs;
  }
  return rep;
}

}  // namespace mmflow
