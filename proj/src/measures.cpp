#include "mmflow/measures.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

#include "mmflow/error.hpp"

namespace mmflow {

namespace {

constexpr double kLoadMassTolerance = 1e-6;

std::string mass_message(double total) {
  std::ostringstream os;
  os.precision(12);
  os << "mass " << total << " ≠ 1";
  return os.str();
}

}  // namespace

DiscreteMeasure DiscreteMeasure::from_atoms(std::vector<Point> atoms, std::vector<double> weights) {
  if (atoms.empty()) throw ValidationError("measure has no atoms");
  if (atoms.size() != weights.size()) {
    throw ValidationError("atoms and weights have different lengths");
  }
  const std::size_t dim = atoms.front().size();
  if (dim == 0) throw ValidationError("atoms must have positive dimension");
  for (const auto& a : atoms) {
    if (a.size() != dim) throw ValidationError("dimension mismatch among atoms");
    for (double c : a) {
      if (!std::isfinite(c)) throw ValidationError("non-finite atom coordinate");
    }
  }
  CompensatedSum total;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("weights must be positive");
    total += w;
  }
  if (std::fabs(total.value() - 1.0) > kLoadMassTolerance) {
    throw ValidationError(mass_message(total.value()));
  }

  DiscreteMeasure m;
  m.dim_ = static_cast<int>(dim);
  std::map<Point, std::size_t> seen;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    auto [it, inserted] = seen.emplace(atoms[i], m.atoms_.size());
    if (inserted) {
      m.atoms_.push_back(std::move(atoms[i]));
      m.weights_.push_back(weights[i]);
    } else {
      m.weights_[it->second] += weights[i];
    }
  }
  CompensatedSum merged;
  for (double w : m.weights_) merged += w;
  const double scale = merged.value();
  for (double& w : m.weights_) w /= scale;
  return m;
}

GridDensity GridDensity::make(Point origin, Point spacing, std::vector<std::size_t> shape,
                              std::vector<double> values) {
  const std::size_t d = shape.size();
  if (d == 0) throw ValidationError("grid must have positive dimension");
  if (origin.size() != d || spacing.size() != d) {
    throw ValidationError("grid origin/spacing/shape dimension mismatch");
  }
  std::size_t count = 1;
  for (std::size_t a = 0; a < d; ++a) {
    if (shape[a] == 0) throw ValidationError("grid shape entries must be positive");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw ValidationError("grid spacing must be positive");
    }
    if (!std::isfinite(origin[a])) throw ValidationError("grid origin must be finite");
    count *= shape[a];
  }
  if (values.size() != count) throw ValidationError("grid values do not match shape");
  double volume = 1.0;
  for (double h : spacing) volume *= h;
  CompensatedSum mass;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("grid values must be nonnegative");
    mass += v * volume;
  }
  if (std::fabs(mass.value() - 1.0) > kLoadMassTolerance) {
    throw ValidationError(mass_message(mass.value()));
  }
  GridDensity g;
  g.origin_ = std::move(origin);
  g.spacing_ = std::move(spacing);
  g.shape_ = std::move(shape);
  g.values_ = std::move(values);
  const double scale = mass.value();
  for (double& v : g.values_) v /= scale;
  return g;
}

double GridDensity::cell_volume() const {
  double v = 1.0;
  for (double h : spacing_) v *= h;
  return v;
}

std::vector<std::size_t> GridDensity::unflatten(std::size_t flat) const {
  std::vector<std::size_t> idx(shape_.size());
  for (std::size_t a = shape_.size(); a-- > 0;) {
    idx[a] = flat % shape_[a];
    flat /= shape_[a];
  }
  return idx;
}

Point GridDensity::cell_center(std::size_t flat) const {
  const auto idx = unflatten(flat);
  Point c(shape_.size());
  for (std::size_t a = 0; a < shape_.size(); ++a) {
    c[a] = origin_[a] + (static_cast<double>(idx[a]) + 0.5) * spacing_[a];
  }
  return c;
}

GridDensity GridDensity::translated(std::span<const double> shift) const {
  GridDensity g = *this;
  for (std::size_t a = 0; a < origin_.size(); ++a) g.origin_[a] += shift[a];
  return g;
}

Point barycenter(const DiscreteMeasure& m) {
  std::vector<CompensatedSum> acc(m.dim());
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (int a = 0; a < m.dim(); ++a) acc[a] += m.weight(i) * m.atom(i)[a];
  }
  Point b(m.dim());
  for (int a = 0; a < m.dim(); ++a) b[a] = acc[a].value();
  return b;
}

Point barycenter(const GridDensity& m) {
  std::vector<CompensatedSum> acc(m.dim());
  const double vol = m.cell_volume();
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (m.values()[k] == 0.0) continue;
    const Point c = m.cell_center(k);
    for (int a = 0; a < m.dim(); ++a) acc[a] += m.values()[k] * vol * c[a];
  }
  Point b(m.dim());
  for (int a = 0; a < m.dim(); ++a) b[a] = acc[a].value();
  return b;
}

DiscreteMeasure center(const DiscreteMeasure& m) {
  const Point b = barycenter(m);
  std::vector<Point> atoms = m.atoms();
  for (auto& y : atoms) {
    for (int a = 0; a < m.dim(); ++a) y[a] -= b[a];
  }
  return DiscreteMeasure::from_atoms(std::move(atoms), m.weights());
}

GridDensity center(const GridDensity& m) {
  Point b = barycenter(m);
  for (double& c : b) c = -c;
  return m.translated(b);
}

double first_moment(const DiscreteMeasure& m) {
  CompensatedSum s;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.weight(i) * norm(m.atom(i));
  return s.value();
}

double second_moment(const DiscreteMeasure& m) {
  CompensatedSum s;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.weight(i) * dot(m.atom(i), m.atom(i));
  return s.value();
}

double first_moment(const GridDensity& m) {
  CompensatedSum s;
  const double vol = m.cell_volume();
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (m.values()[k] != 0.0) s += m.values()[k] * vol * norm(m.cell_center(k));
  }
  return s.value();
}

double second_moment(const GridDensity& m) {
  CompensatedSum s;
  const double vol = m.cell_volume();
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (m.values()[k] == 0.0) continue;
    const Point c = m.cell_center(k);
    s += m.values()[k] * vol * dot(c, c);
  }
  return s.value();
}

HyperplaneReport hyperplane_check(const DiscreteMeasure& mu) {
  const int d = mu.dim();
  const Point b = barycenter(mu);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    Eigen::VectorXd c(d);
    for (int a = 0; a < d; ++a) c[a] = mu.atom(i)[a] - b[a];
    cov += mu.weight(i) * c * c.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  HyperplaneReport report;
  if (eig.eigenvalues()[0] > 1e-12) return report;
  report.degenerate = true;
  Eigen::VectorXd e = eig.eigenvectors().col(0).normalized();
  for (int a = 0; a < d; ++a) {
    if (std::fabs(e[a]) > 1e-12) {
      if (e[a] < 0) e = -e;
      break;
    }
  }
  report.normal.assign(e.data(), e.data() + d);
  report.offset = dot(b, report.normal);
  return report;
}

double weighted_median(std::span<const double> values, std::span<const double> weights) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double total = 0.0;
  for (double w : weights) total += w;
  double cumulative = 0.0;
  for (std::size_t k : order) {
    cumulative += weights[k];
    if (cumulative >= 0.5 * total - 1e-14 * total) return values[k];
  }
  return values[order.back()];
}

namespace {

// sum_i w_i |y_i.e - l| minimized over l, plus the minimizing l.
std::pair<double, double> spread_along(const DiscreteMeasure& mu, std::span<const double> e) {
  std::vector<double> proj(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) proj[i] = dot(mu.atom(i), e);
  const double ell = weighted_median(proj, mu.weights());
  CompensatedSum s;
  for (std::size_t i = 0; i < mu.size(); ++i) s += mu.weight(i) * std::fabs(proj[i] - ell);
  return {s.value(), ell};
}

double max_radius(const DiscreteMeasure& mu) {
  double r = 0.0;
  for (const auto& y : mu.atoms()) r = std::max(r, norm(y));
  return r;
}

CMuResult c_mu_planar(const DiscreteMeasure& mu) {
  constexpr int kAngles = 720;
  constexpr double kTarget = 1e-6;
  constexpr long kMaxEvaluations = 4'000'000;
  const double scale = 1.0 / 4.0;
  const double lipschitz = scale * max_radius(mu);
  const double period = std::numbers::pi;
  long evaluations = 0;

  auto f = [&](double theta) {
    ++evaluations;
    const double e[2] = {std::cos(theta), std::sin(theta)};
    return scale * spread_along(mu, e).first;
  };

  const double step = period / kAngles;
  std::vector<double> grid(kAngles);
  for (int k = 0; k < kAngles; ++k) grid[k] = f(k * step);

  double best = grid[0];
  double best_theta = 0.0;
  for (int k = 0; k < kAngles; ++k) {
    if (grid[k] < best) {
      best = grid[k];
      best_theta = k * step;
    }
  }

  // Golden-section polish around every discrete local minimum.
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int k = 0; k < kAngles; ++k) {
    const double prev = grid[(k + kAngles - 1) % kAngles];
    const double next = grid[(k + 1) % kAngles];
    if (grid[k] > prev || grid[k] > next) continue;
    double a = (k - 1) * step, b = (k + 1) * step;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > 1e-12) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - invphi * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + invphi * (b - a);
        fd = f(d);
      }
    }
    for (double t : {c, d}) {
      const double v = (t == c) ? fc : fd;
      if (v < best) {
        best = v;
        best_theta = t;
      }
    }
  }

  // Branch and bound on the Lipschitz lower bound f(mid) - L*halfwidth.
  struct Interval {
    double lo, hi, value;
  };
  std::vector<Interval> work;
  for (int k = 0; k < kAngles; ++k) {
    const double lo = k * step;
    work.push_back({lo, lo + step, 0.0});
  }
  double lower_bound = best;
  bool exhausted = false;
  while (!work.empty()) {
    std::vector<Interval> next_level;
    for (auto iv : work) {
      const double mid = 0.5 * (iv.lo + iv.hi);
      const double v = f(mid);
      if (v < best) {
        best = v;
        best_theta = mid;
      }
      const double bound = v - lipschitz * 0.5 * (iv.hi - iv.lo);
      if (bound >= best - kTarget) {
        lower_bound = std::min(lower_bound, bound);
        continue;
      }
      if (evaluations > kMaxEvaluations) {
        exhausted = true;
        lower_bound = std::min(lower_bound, bound);
        continue;
      }
      next_level.push_back({iv.lo, mid, 0.0});
      next_level.push_back({mid, iv.hi, 0.0});
    }
    work = std::move(next_level);
  }

  CMuResult r;
  r.value = best;
  r.direction = {std::cos(best_theta), std::sin(best_theta)};
  r.offset = spread_along(mu, r.direction).second;
  r.error_bound = std::max(0.0, best - std::min(lower_bound, best));
  r.certified = !exhausted && r.error_bound <= kTarget;
  return r;
}

CMuResult c_mu_random(const DiscreteMeasure& mu, std::uint64_t seed) {
  const int d = mu.dim();
  const double scale = 1.0 / (2.0 * d);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  auto random_direction = [&] {
    Point e(d);
    double n = 0.0;
    while (n < 1e-12) {
      for (double& c : e) c = gauss(rng);
      n = norm(e);
    }
    for (double& c : e) c /= n;
    return e;
  };
  auto value = [&](const Point& e) { return scale * spread_along(mu, e).first; };

  std::vector<std::pair<double, Point>> starts;
  for (int a = 0; a < d; ++a) {
    Point e(d, 0.0);
    e[a] = 1.0;
    starts.emplace_back(value(e), e);
  }
  for (int k = 0; k < 2000; ++k) {
    Point e = random_direction();
    starts.emplace_back(value(e), std::move(e));
  }
  std::sort(starts.begin(), starts.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  starts.resize(std::min<std::size_t>(starts.size(), 16));

  CMuResult best;
  best.value = starts.front().first;
  best.direction = starts.front().second;
  for (auto& [v0, e0] : starts) {
    double v = v0;
    Point e = e0;
    double radius = 0.1;
    while (radius > 1e-9) {
      bool improved = false;
      for (int trial = 0; trial < 8 * d; ++trial) {
        Point cand = e;
        const Point jitter = random_direction();
        for (int a = 0; a < d; ++a) cand[a] += radius * jitter[a];
        const double n = norm(cand);
        for (double& c : cand) c /= n;
        const double vc = value(cand);
        if (vc < v) {
          v = vc;
          e = std::move(cand);
          improved = true;
        }
      }
      if (!improved) radius *= 0.5;
    }
    if (v < best.value) {
      best.value = v;
      best.direction = e;
    }
  }
  best.offset = spread_along(mu, best.direction).second;
  best.certified = false;
  best.error_bound = 0.0;
  return best;
}

}  // namespace

CMuResult c_mu_detailed(const DiscreteMeasure& mu, std::uint64_t seed) {
  if (mu.dim() == 1) {
    const double e[1] = {1.0};
    auto [spread, ell] = spread_along(mu, e);
    CMuResult r;
    r.value = 0.5 * spread;
    r.direction = {1.0};
    r.offset = ell;
    r.certified = true;
    return r;
  }
  if (mu.dim() == 2) return c_mu_planar(mu);
  return c_mu_random(mu, seed);
}

double c_mu(const DiscreteMeasure& mu, std::uint64_t seed) { return c_mu_detailed(mu, seed).value; }

DiscreteMeasure truncate_with_atom(const DiscreteMeasure& mu, double n) {
  std::vector<Point> atoms;
  std::vector<double> weights;
  CompensatedSum tail_mass;
  std::vector<CompensatedSum> tail_moment(mu.dim());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (norm(mu.atom(i)) <= n) {
      atoms.push_back(mu.atom(i));
      weights.push_back(mu.weight(i));
    } else {
      tail_mass += mu.weight(i);
      for (int a = 0; a < mu.dim(); ++a) tail_moment[a] += mu.weight(i) * mu.atom(i)[a];
    }
  }
  if (tail_mass.value() > 0.0) {
    Point v(mu.dim());
    for (int a = 0; a < mu.dim(); ++a) v[a] = tail_moment[a].value() / tail_mass.value();
    atoms.push_back(std::move(v));
    weights.push_back(tail_mass.value());
  }
  return DiscreteMeasure::from_atoms(std::move(atoms), std::move(weights));
}

GridDensity restrict_renormalize(const GridDensity& rho, double n) {
  std::vector<double> values(rho.size(), 0.0);
  CompensatedSum kept;
  const double vol = rho.cell_volume();
  for (std::size_t k = 0; k < rho.size(); ++k) {
    if (rho.values()[k] > 0.0 && norm(rho.cell_center(k)) <= n) {
      values[k] = rho.values()[k];
      kept += values[k] * vol;
    }
  }
  if (kept.value() <= 1e-12) {
    throw ValidationError("restricted mass is zero: no grid cell lies in the ball");
  }
  for (double& v : values) v /= kept.value();
  return GridDensity::make(rho.origin(), rho.spacing(), rho.shape(), std::move(values));
}

}  // namespace mmflow
