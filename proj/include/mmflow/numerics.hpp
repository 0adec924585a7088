#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mmflow {

using Point = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// Neumaier compensated summation. Order-dependent but deterministic.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double log_sum_exp(std::span<const double> xs);

// log(sinh(z)/z), finite for every z.
double log_sinhc(double z);

// coth(z) - 1/z, the mean offset of a truncated exponential.
double langevin(double z);

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Gauss-Legendre rule with n points, computed by Newton iteration on P_n.
// Cached per n.
const GaussRule& gauss_legendre(int n);

}  // namespace mmflow
