#include "mmflow/entropy.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <numbers>

#include "mmflow/error.hpp"

namespace mmflow {

double entropy(const GridDensity& rho) {
  const double vol = rho.cell_volume();
  CompensatedSum s;
  for (double v : rho.values()) {
    if (v > 0.0) s += v * std::log(v) * vol;
  }
  return s.value();
}

double entropy_lower_bound_constant(int d) {
  if (d != 1 && d != 2) throw ValidationError("unsupported dimension");
  // Radial form: |S^{d-1}| * int_0^inf r^{d-1} exp(-sqrt r - 1) dr.
  boost::math::quadrature::exp_sinh<double> integrator;
  const double sphere = (d == 1) ? 2.0 : 2.0 * std::numbers::pi;
  auto radial = [d](double r) {
    const double w = (d == 1) ? 1.0 : r;
    return w * std::exp(-std::sqrt(r) - 1.0);
  };
  double error = 0.0;
  const double value = integrator.integrate(radial, 1e-12, &error);
  if (error > 1e-8 * value) throw SolverError("radial quadrature did not reach 1e-8");
  return sphere * value;
}

namespace {

// Odd antiderivatives on R: d/dx A = sqrt|x|, d/dx B = exp(-sqrt|x|).
double antideriv_sqrt(double x) {
  const double a = std::fabs(x);
  return std::copysign(2.0 / 3.0 * a * std::sqrt(a), x);
}

double antideriv_exp_sqrt(double x) {
  const double s = std::sqrt(std::fabs(x));
  return std::copysign(2.0 - 2.0 * (1.0 + s) * std::exp(-s), x);
}

// int_{|x| >= a} over one side, for a >= 0: 2 (1 + sqrt a) e^{-sqrt a}.
double exp_sqrt_tail(double a) {
  const double s = std::sqrt(a);
  return 2.0 * (1.0 + s) * std::exp(-s);
}

struct CellAverages {
  double h;    // average of -sqrt|x|
  double eh1;  // average of exp(-sqrt|x| - 1)
};

}  // namespace

EntropyBreakdown entropy_decomposition(const GridDensity& rho) {
  const int d = rho.dim();
  const double c_d = entropy_lower_bound_constant(d);
  const double vol = rho.cell_volume();

  EntropyBreakdown out;
  out.min_cell_integrand = 0.0;
  CompensatedSum e1, e2, box_exp;

  auto accumulate = [&](double value, const CellAverages& avg) {
    double plogp = value > 0.0 ? value * std::log(value) : 0.0;
    double integrand = (plogp + avg.eh1 - value * avg.h) * vol;
    out.min_cell_integrand = std::min(out.min_cell_integrand, integrand);
    if (integrand < 0.0 && integrand >= -1e-14) integrand = 0.0;
    e1 += integrand;
    e2 += value * avg.h * vol;
    box_exp += avg.eh1 * vol;
  };

  if (d == 1) {
    const double h = rho.spacing()[0];
    for (std::size_t k = 0; k < rho.size(); ++k) {
      const double a = rho.origin()[0] + static_cast<double>(k) * h;
      const double b = a + h;
      CellAverages avg;
      avg.h = -(antideriv_sqrt(b) - antideriv_sqrt(a)) / h;
      avg.eh1 = std::exp(-1.0) * (antideriv_exp_sqrt(b) - antideriv_exp_sqrt(a)) / h;
      accumulate(rho.values()[k], avg);
    }
    const double lo = rho.lower(0), hi = rho.upper(0);
    double tail = 0.0;
    // Pieces of R outside [lo, hi].
    tail += (hi >= 0.0) ? exp_sqrt_tail(hi) : 4.0 - exp_sqrt_tail(-hi);
    tail += (lo <= 0.0) ? exp_sqrt_tail(-lo) : 4.0 - exp_sqrt_tail(lo);
    out.box_tail = std::exp(-1.0) * tail;
  } else {
    // Tensor Gauss rule per cell. Jensen still gives a nonnegative E1
    // integrand since the weights are positive.
    const GaussRule& g = gauss_legendre(8);
    const std::size_t n = g.nodes.size();
    for (std::size_t k = 0; k < rho.size(); ++k) {
      const Point c = rho.cell_center(k);
      CompensatedSum sh, se;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double x[2] = {c[0] + 0.5 * rho.spacing()[0] * g.nodes[i],
                         c[1] + 0.5 * rho.spacing()[1] * g.nodes[j]};
          const double w = 0.25 * g.weights[i] * g.weights[j];
          const double hval = -std::sqrt(std::sqrt(x[0] * x[0] + x[1] * x[1]));
          sh += w * hval;
          se += w * std::exp(hval - 1.0);
        }
      }
      accumulate(rho.values()[k], CellAverages{sh.value(), se.value()});
    }
    out.box_tail = c_d - box_exp.value();
  }

  out.e1 = e1.value();
  out.e2 = e2.value();
  out.e3 = -c_d;
  out.total = out.e1 + out.e2 + out.e3;
  return out;
}

}  // namespace mmflow
