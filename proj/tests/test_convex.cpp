#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "mmflow/convex.hpp"
#include "mmflow/error.hpp"
#include "mmflow/suites.hpp"

using namespace mmflow;
using doctest::Approx;

namespace {

const double kLn2 = std::numbers::ln2;

MaxAffineConvex laplace() { return MaxAffineConvex({{-1.0}, {1.0}}, {-kLn2, -kLn2}); }

MaxAffineConvex laplace_2d() {
  return MaxAffineConvex({{1, 1}, {-1, 1}, {1, -1}, {-1, -1}}, {-2 * kLn2, -2 * kLn2, -2 * kLn2, -2 * kLn2});
}

}  // namespace

TEST_CASE("evaluate") {
  const auto u = laplace();
  const auto e0 = evaluate(u, std::vector<double>{0.0});
  CHECK(e0.value == Approx(kLn2));
  CHECK(e0.index == 0);
  const auto e3 = evaluate(u, std::vector<double>{3.0});
  CHECK(e3.value == Approx(3.0 + kLn2));
  CHECK(e3.index == 1);
  const MaxAffineConvex flat({{0.0}}, {0.0});
  CHECK(evaluate(flat, std::vector<double>{-7.0}).value == 0.0);
}

TEST_CASE("construction validates") {
  CHECK_THROWS_AS(MaxAffineConvex({}, {}), ValidationError);
  CHECK_THROWS_AS(MaxAffineConvex({{0.0}, {0.0}}, {1.0, 2.0}), ValidationError);
  CHECK_THROWS_AS(MaxAffineConvex({{0.0}, {1.0}}, {1.0}), ValidationError);
  CHECK_THROWS_AS(MaxAffineConvex({{0.0}, {1.0, 2.0}}, {1.0, 2.0}), ValidationError);
}

TEST_CASE("prune") {
  const auto active = prune(MaxAffineConvex({{-1.0}, {0.0}, {1.0}}, {-kLn2, -10.0, -kLn2}));
  CHECK(active.active_count() == 3);
  const auto pruned = prune(MaxAffineConvex({{-1.0}, {0.0}, {1.0}}, {-kLn2, 10.0, -kLn2}));
  CHECK(pruned.active_count() == 2);
  CHECK_FALSE(pruned.is_active(1));
  CHECK(prune(MaxAffineConvex({{2.0}}, {1.0})).active_count() == 1);

  // d = 2: a piece hidden below the others.
  const MaxAffineConvex hidden({{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {0, 0}}, {0, 0, 0, 0, 5.0});
  const auto p = prune(hidden);
  CHECK(p.active_count() == 4);
  CHECK_FALSE(p.is_active(4));
  CHECK(prune(hidden.with_offsets({0, 0, 0, 0, -1.0})).active_count() == 5);
}

TEST_CASE("cells") {
  const auto c = cells(prune(laplace()));
  REQUIRE(c.intervals.size() == 2);
  CHECK(std::isinf(c.intervals[0].lo));
  CHECK(c.intervals[0].hi == Approx(0.0));
  CHECK(c.intervals[1].lo == Approx(0.0));
  CHECK(std::isinf(c.intervals[1].hi));

  const auto single = cells(prune(MaxAffineConvex({{0.5}}, {0.0})));
  REQUIRE(single.intervals.size() == 1);
  CHECK(std::isinf(single.intervals[0].lo));

  const MaxAffineConvex diamond({{1, 0}, {-1, 0}, {0, 1}, {0, -1}}, {0, 0, 0, 0});
  const auto c2 = cells(prune(diamond));
  REQUIRE(c2.polygons.size() == 4);
  for (const auto& poly : c2.polygons) CHECK_FALSE(poly.bounded);

  const auto unpruned = MaxAffineConvex({{-1.0}, {0.0}, {1.0}}, {-kLn2, 10.0, -kLn2});
  CHECK_THROWS_AS(cells(unpruned), ValidationError);
}

TEST_CASE("argmax matches the containing cell") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> coord(-6.0, 6.0);
  for (int d = 1; d <= 2; ++d) {
    const auto u = prune(random_max_affine(rng, d, 9));
    const auto c = cells(u);
    for (int k = 0; k < 1000; ++k) {
      Point x(d);
      for (auto& xi : x) xi = coord(rng);
      const auto e = evaluate(u, x);
      bool inside = false;
      if (d == 1) {
        for (const auto& iv : c.intervals)
          if (iv.piece == e.index) inside = x[0] >= iv.lo - 1e-9 && x[0] <= iv.hi + 1e-9;
      } else {
        for (const auto& poly : c.polygons) {
          if (poly.piece != e.index) continue;
          inside = true;
          for (const auto& h : poly.halfplanes)
            if (h.normal[0] * x[0] + h.normal[1] * x[1] < h.bound - 1e-9) inside = false;
        }
      }
      CHECK(inside);
    }
  }
}

TEST_CASE("recession_check") {
  const auto r = recession_check(laplace());
  CHECK(r.integrable);
  CHECK(r.margin == Approx(1.0));
  CHECK_FALSE(recession_check(MaxAffineConvex({{1.0}, {2.0}}, {0.0, 0.0})).integrable);
  const auto r2 = recession_check(laplace_2d());
  CHECK(r2.integrable);
  CHECK(r2.margin == Approx(1.0));
  CHECK_FALSE(recession_check(MaxAffineConvex({{0.0}}, {0.0})).integrable);
}

TEST_CASE("integrals in one dimension") {
  CHECK(integrate_exp_neg(laplace()).z == Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(integrate_exp_neg(MaxAffineConvex({{0.0}}, {0.0})), ValidationError);
  const auto m = cell_masses(laplace());
  CHECK(m[0] == Approx(0.5));
  CHECK(m[1] == Approx(0.5));

  const MaxAffineConvex skew({{2.0}, {-1.0}}, {0.0, 0.0});
  const auto ms = cell_masses(skew);
  CHECK(ms[0] == Approx(0.5));
  CHECK(ms[1] == Approx(1.0));
  CHECK(integrate_exp_neg(skew).z == Approx(1.5));
  CHECK(barycenter_exp_neg(skew)[0] == Approx(-0.5));

  CHECK(barycenter_exp_neg(laplace())[0] == Approx(0.0).epsilon(1e-14));
  const MaxAffineConvex shifted({{-1.0}, {1.0}}, {-3.0 - kLn2, 3.0 - kLn2});
  CHECK(barycenter_exp_neg(shifted)[0] == Approx(3.0));

  // A flat middle piece uses the affine limit: u = max(|x| - 1, 0).
  const MaxAffineConvex flat({{-1.0}, {0.0}, {1.0}}, {1.0, 0.0, 1.0});
  CHECK(integrate_exp_neg(flat).z == Approx(4.0));
}

TEST_CASE("integrals in two dimensions") {
  const auto z = integrate_exp_neg(laplace_2d());
  CHECK(std::fabs(z.z - 1.0) < 1e-6);
  CHECK(z.certified_rel_error <= 1e-8);
  const auto b = barycenter_exp_neg(laplace_2d());
  CHECK(std::fabs(b[0]) < 1e-8);
  CHECK(std::fabs(b[1]) < 1e-8);
  for (double mi : cell_masses(laplace_2d())) CHECK(mi == Approx(0.25).epsilon(1e-7));

  IntegrationOptions threaded;
  threaded.threads = 4;
  CHECK(integrate_exp_neg(laplace_2d(), threaded).z == integrate_exp_neg(laplace_2d()).z);
}

TEST_CASE("gauge and translation invariance") {
  std::mt19937_64 rng(5);
  for (int d = 1; d <= 2; ++d) {
    for (int t = 0; t < 4; ++t) {
      const auto u = random_max_affine(rng, d, 6);
      const double c = 0.7;
      std::vector<double> shifted = u.offsets();
      for (double& v : shifted) v += c;
      const auto us = u.with_offsets(shifted);
      const auto a = integrate_cells(u), s = integrate_cells(us);
      CHECK(std::exp(s.log_z - a.log_z) == Approx(std::exp(c)).epsilon(1e-10));
      for (std::size_t i = 0; i < u.size(); ++i)
        CHECK(std::fabs(a.mass_fraction[i] - s.mass_fraction[i]) <= 1e-10);
      const auto ba = barycenter_exp_neg(u), bs = barycenter_exp_neg(us);
      for (int k = 0; k < d; ++k) CHECK(std::fabs(ba[k] - bs[k]) <= 1e-10);

      Point w(d, 0.4);
      w[0] = -0.3;
      std::vector<double> moved = u.offsets();
      for (std::size_t i = 0; i < u.size(); ++i) moved[i] += dot(u.site(i), w);
      const auto ut = u.with_offsets(moved);
      CHECK(integrate_exp_neg(ut).z == Approx(integrate_exp_neg(u).z).epsilon(1e-8));
      const auto bt = barycenter_exp_neg(ut);
      for (int k = 0; k < d; ++k) CHECK(std::fabs(bt[k] - ba[k] - w[k]) <= 1e-7);
    }
  }
}

TEST_CASE("cell masses sum to Z") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 100; ++t) {
    const int d = t % 2 == 0 ? 1 : 2;
    const auto u = prune(random_max_affine(rng, d, 5 + t % 4));
    const auto z = integrate_exp_neg(u);
    double sum = 0.0;
    for (double m : cell_masses(u)) sum += m;
    CHECK(std::fabs(sum - z.z) <= std::max(1e-12, 10.0 * z.certified_rel_error) * z.z);
  }
}

TEST_CASE("Monte Carlo agrees with quadrature") {
  std::mt19937_64 rng(8);
  const auto u = random_max_affine(rng, 2, 6);
  const auto exact = integrate_cells(u);
  const auto mc = integrate_cells_monte_carlo(u, 1000000, 3);
  CHECK_FALSE(mc.certified);
  const double ratio = std::exp(mc.log_z - exact.log_z);
  CHECK(std::fabs(ratio - 1.0) <= 3.0 * mc.rel_error);
}

TEST_CASE("three dimensions uses Monte Carlo") {
  const MaxAffineConvex u({{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}},
                          {0, 0, 0, 0, 0, 0});
  const auto r = integrate_cells(u);
  CHECK_FALSE(r.certified);
  // Z of e^{-max|x_i|} over R^3 is 3! * 8 = 48.
  CHECK(std::exp(r.log_z) == Approx(48.0).epsilon(0.02));
}

TEST_CASE("conjugate_grid") {
  std::vector<double> xs, fs, ys;
  for (int k = 0; k <= 6000; ++k) xs.push_back(-3.0 + k * 1e-3);
  for (double x : xs) fs.push_back(0.5 * x * x);
  for (int k = 0; k <= 60; ++k) ys.push_back(-3.0 + k * 0.1);
  auto g = conjugate_grid(xs, fs, ys);
  for (std::size_t k = 0; k < ys.size(); ++k) CHECK(std::fabs(g[k] - 0.5 * ys[k] * ys[k]) <= 1e-6);

  std::vector<double> abs_f;
  for (double x : xs) abs_f.push_back(std::fabs(x));
  const std::vector<double> yy = {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
  const auto h = conjugate_grid(xs, abs_f, yy, ConjugateBoundary::Affine);
  CHECK(h[0] == kConjugateInfinity);
  CHECK(h[6] == kConjugateInfinity);
  for (int k = 1; k <= 5; ++k) CHECK(std::fabs(h[k]) <= 1e-12);

  CHECK_THROWS_AS(conjugate_grid(xs, fs, std::vector<double>{}), ValidationError);

  // Random piecewise-linear convex: brute force.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> slope(-4.0, 4.0), off(-1.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    std::vector<double> a(6), b(6);
    for (int i = 0; i < 6; ++i) a[i] = slope(rng), b[i] = off(rng);
    std::vector<double> px, pf;
    for (int k = 0; k <= 400; ++k) {
      const double x = -5.0 + 0.025 * k;
      double v = -INFINITY;
      for (int i = 0; i < 6; ++i) v = std::max(v, a[i] * x + b[i]);
      px.push_back(x);
      pf.push_back(v);
    }
    std::vector<double> qy;
    for (int k = 0; k <= 100; ++k) qy.push_back(-6.0 + 0.12 * k);
    const auto fast = conjugate_grid(px, pf, qy);
    for (std::size_t j = 0; j < qy.size(); ++j) {
      double best = -INFINITY;
      for (std::size_t k = 0; k < px.size(); ++k) best = std::max(best, qy[j] * px[k] - pf[k]);
      CHECK(std::fabs(fast[j] - best) <= 1e-9);
    }
    // Involution on convex input.
    const auto back = conjugate_grid(qy, fast, px);
    (void)back;
  }

  // Involution: f** = f for convex f on a fine enough dual grid.
  std::vector<double> dual;
  for (int k = 0; k <= 6000; ++k) dual.push_back(-3.0 + k * 1e-3);
  const auto fstar = conjugate_grid(xs, fs, dual);
  const auto fss = conjugate_grid(dual, fstar, xs);
  for (std::size_t k = 0; k < xs.size(); k += 100) CHECK(std::fabs(fss[k] - fs[k]) <= 1e-6);
}

TEST_CASE("conjugate_grid_2d is separable") {
  std::vector<double> x0, x1;
  for (int k = 0; k <= 200; ++k) x0.push_back(-2.0 + 0.02 * k);
  x1 = x0;
  std::vector<double> f;
  for (double a : x0)
    for (double b : x1) f.push_back(0.5 * a * a + 0.5 * b * b);
  const std::vector<double> y0 = {-1.0, 0.0, 0.5}, y1 = {-0.5, 1.0};
  const auto g = conjugate_grid_2d(x0, x1, f, y0, y1);
  REQUIRE(g.size() == 6);
  for (std::size_t i = 0; i < y0.size(); ++i)
    for (std::size_t j = 0; j < y1.size(); ++j)
      CHECK(std::fabs(g[i * y1.size() + j] - 0.5 * (y0[i] * y0[i] + y1[j] * y1[j])) <= 1e-9);
}
