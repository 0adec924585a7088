#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "mmflow/entropy.hpp"
#include "mmflow/error.hpp"
#include "mmflow/primal_verify.hpp"
#include "test_helpers.hpp"

using namespace mmflow;
using doctest::Approx;

TEST_CASE("entropy closed forms") {
  CHECK(entropy(testing::uniform_grid(0.0, 1.0, 64)) == Approx(0.0).epsilon(1e-14));
  CHECK(entropy(testing::uniform_grid(-5.0, 5.0, 100)) == Approx(-std::log(10.0)).epsilon(1e-14));
  const auto gauss = testing::sampled_grid(-8.0, 8.0, 4096, [](double x) { return std::exp(-0.5 * x * x); });
  CHECK(std::fabs(entropy(gauss) + 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e)) < 1e-3);
}

TEST_CASE("entropy lower bound constants") {
  CHECK(std::fabs(entropy_lower_bound_constant(1) - 4.0 / std::numbers::e) < 1e-8);
  CHECK(std::fabs(entropy_lower_bound_constant(2) - 24.0 * std::numbers::pi / std::numbers::e) < 1e-7);
  CHECK_THROWS_WITH_AS(entropy_lower_bound_constant(3), "unsupported dimension", ValidationError);
}

TEST_CASE("entropy decomposition") {
  SUBCASE("uniform on [0,1]") {
    const auto b = entropy_decomposition(testing::uniform_grid(0.0, 1.0, 50));
    CHECK(b.e1 >= 0.0);
    CHECK(std::fabs(b.total + b.box_tail - 0.0) < 1e-12);
    CHECK(b.e3 == Approx(-4.0 / std::numbers::e));
  }
  SUBCASE("random densities") {
    for (std::uint64_t s = 1; s <= 30; ++s) {
      const auto rho = random_grid_density(s, 3.0);
      const auto b = entropy_decomposition(rho);
      CHECK(b.min_cell_integrand >= -1e-14);
      CHECK(b.e1 >= 0.0);
      CHECK(std::fabs(b.total + b.box_tail - entropy(rho)) <= 1e-9);
      CHECK(entropy(rho) >= -entropy_lower_bound_constant(1) - std::sqrt(first_moment(rho)));
    }
  }
  SUBCASE("two dimensions") {
    std::vector<double> v(30 * 30);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = 1.0 + 0.5 * std::sin(0.3 * static_cast<double>(k));
    double total = 0.0;
    for (double x : v) total += x * 0.04;
    for (double& x : v) x /= total;
    const auto rho = GridDensity::make({-0.7, -0.4}, {0.2, 0.2}, {30, 30}, v);
    const auto b = entropy_decomposition(rho);
    CHECK(b.e1 >= 0.0);
    CHECK(std::fabs(b.total + b.box_tail - entropy(rho)) <= 1e-8);
    CHECK(entropy(rho) >= -entropy_lower_bound_constant(2) - std::sqrt(first_moment(rho)));
  }
}
