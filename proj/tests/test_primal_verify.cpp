#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "mmflow/entropy.hpp"
#include "mmflow/error.hpp"
#include "mmflow/moment_solver.hpp"
#include "mmflow/ot_core.hpp"
#include "mmflow/primal_verify.hpp"
#include "mmflow/suites.hpp"
#include "test_helpers.hpp"

using namespace mmflow;
using doctest::Approx;

TEST_CASE("objective_P") {
  const auto lap = testing::sampled_grid(-30.0, 30.0, 60000, [](double x) { return std::exp(-std::fabs(x)); });
  CHECK(std::fabs(objective_P(lap, testing::two_atoms()) + std::numbers::ln2) <= 1e-4);
  const auto unif = testing::uniform_grid(-0.5, 0.5, 100);
  CHECK(std::fabs(objective_P(unif, DiscreteMeasure::from_atoms({{0.0}}, {1.0}))) <= 1e-12);
  const auto g2 = GridDensity::make({0.0, 0.0}, {1.0, 1.0}, {1, 1}, {1.0});
  CHECK_THROWS_AS(objective_P(g2, testing::two_atoms()), ValidationError);
}

TEST_CASE("fixed point on two atoms") {
  const auto mu = testing::two_atoms();
  const auto rep = solve_fixed_point(mu, GridSpec{-10.0, 10.0, 2048});
  REQUIRE(rep.converged);
  CHECK(rep.fixed_point_residual <= 1e-6);
  double sup = 0.0;
  const auto& g = rep.final_density;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double x = g.cell_center(k)[0];
    if (std::fabs(x) <= 10.0) sup = std::max(sup, std::fabs(g.values()[k] - 0.5 * std::exp(-std::fabs(x))));
  }
  CHECK(sup <= 1e-3);
  CHECK(rep.objective_trace.back() <= rep.objective_trace.front());
  const double p = objective_P(g, mu);
  const auto dual = solve(mu);
  CHECK(std::fabs(p - dual.objective) <= 1e-3);
  CHECK(std::fabs(p + std::numbers::ln2) <= 1e-3);
}

TEST_CASE("fixed point on a random measure") {
  std::mt19937_64 rng(31);
  const auto mu = random_centered_measure(rng, 1, 5);
  const auto dual = solve(mu);
  const auto grid = grid_for(dual.u_final(), 4096);
  const auto rep = solve_fixed_point(mu, grid);
  CHECK(rep.converged);
  CHECK(std::fabs(objective_P(rep.final_density, mu) - dual.objective) <= 1e-3);
}

TEST_CASE("fixed point preconditions") {
  CHECK_THROWS_AS(solve_fixed_point(DiscreteMeasure::from_atoms({{1.0}, {2.0}}, {0.5, 0.5}), GridSpec{}),
                  ValidationError);
  CHECK_THROWS_AS(solve_fixed_point(testing::four_corners(), GridSpec{}), ValidationError);
}

TEST_CASE("hyperplane demo") {
  const auto delta = DiscreteMeasure::from_atoms({{0.0}}, {1.0});
  const auto rows = hyperplane_divergence_demo(delta, {1, 5, 50, 500});
  REQUIRE(rows.size() == 4);
  CHECK(rows[1].entropy == Approx(-2.302585).epsilon(1e-6));
  CHECK(rows[1].correlation_bound == 0.0);
  CHECK(rows[2].entropy == Approx(-4.605170).epsilon(1e-6));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(std::fabs(rows[k].entropy + std::log(2.0 * rows[k].n)) <= 1e-12);
    if (k > 0) CHECK(rows[k].objective_upper_bound < rows[k - 1].objective_upper_bound);
  }
  const auto line = DiscreteMeasure::from_atoms({{-1.0, 0.0}, {1.0, 0.0}}, {0.5, 0.5});
  const auto r2 = hyperplane_divergence_demo(line, {5});
  CHECK(r2[0].entropy == Approx(-std::log(20.0)));
  CHECK(r2[0].correlation_bound == Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(hyperplane_divergence_demo(testing::two_atoms(), {1}), ValidationError);
}

TEST_CASE("displacement convexity suite") {
  const auto mu = testing::two_atoms();
  const auto rep = displacement_convexity_suite(30, mu, 7);
  CHECK(rep.pairs == 30);
  CHECK(rep.entropy_violations == 0);
  CHECK(rep.correlation_violations == 0);
  CHECK(rep.strictness_violations == 0);
  const auto again = displacement_convexity_suite(30, mu, 7);
  CHECK(again.worst_entropy_excess == rep.worst_entropy_excess);
}

TEST_CASE("translation geodesic keeps entropy constant") {
  const auto g0 = random_grid_density(3);
  const auto g1 = g0.translated(std::vector<double>{2.0});
  const auto path = geodesic(g0, g1);
  CHECK(path.at(0.5).entropy() == Approx(entropy(g0)).epsilon(1e-9));
}
