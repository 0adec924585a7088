#include "mmflow/numerics.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

namespace mmflow {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double log_sum_exp(std::span<const double> xs) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double x : xs) peak = std::max(peak, x);
  if (!std::isfinite(peak)) return peak;
  CompensatedSum s;
  for (double x : xs) s += std::exp(x - peak);
  return peak + std::log(s.value());
}

double log_sinhc(double z) {
  const double a = std::fabs(z);
  if (a < 1e-4) return a * a / 6.0;
  if (a < 20.0) return std::log(std::sinh(a) / a);
  return a + std::log1p(-std::exp(-2.0 * a)) - std::log(2.0 * a);
}

double langevin(double z) {
  const double a = std::fabs(z);
  double v;
  if (a < 1e-3) {
    v = a / 3.0 - a * a * a / 45.0;
  } else if (a > 40.0) {
    v = 1.0 - 1.0 / a;
  } else {
    v = 1.0 / std::tanh(a) - 1.0 / a;
  }
  return z < 0 ? -v : v;
}

namespace {

GaussRule compute_gauss(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  static std::mutex guard;
  static std::map<int, GaussRule> cache;
  std::lock_guard lock(guard);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss(n)).first;
  return it->second;
}

}  // namespace mmflow
