#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mmflow/convex.hpp"
#include "mmflow/measures.hpp"

namespace mmflow {

/// Centered, full-dimensional discrete measure with n atoms in [-2, 2]^d
/// (before centering) and weights bounded away from zero. Needs n >= d + 1.
DiscreteMeasure random_centered_measure(std::mt19937_64& rng, int d, std::size_t n);

/// Max-affine u whose sites are a random centered measure's atoms, so e^{-u}
/// is integrable, with offsets of size `offset_scale`.
MaxAffineConvex random_max_affine(std::mt19937_64& rng, int d, std::size_t n, double offset_scale = 1.0);

/// Random centered discrete measure in d dimensions (not necessarily full
/// dimensional), used as a transport source.
DiscreteMeasure random_source_measure(std::mt19937_64& rng, int d, std::size_t n);

struct SuiteCheck {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteOptions {
  std::uint64_t seed = 1;
  std::size_t samples = 20;
  int threads = 1;
  std::vector<std::string> modules;  // empty: all
};

/// Property checks of every module on seeded random instances.
std::vector<SuiteCheck> run_invariant_suites(const SuiteOptions& opts);

}  // namespace mmflow
