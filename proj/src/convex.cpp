#include "mmflow/convex.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "mmflow/error.hpp"

namespace mmflow {

MaxAffineConvex::MaxAffineConvex(std::vector<Point> sites, std::vector<double> offsets)
    : MaxAffineConvex(std::move(sites), std::move(offsets), {}) {}

MaxAffineConvex::MaxAffineConvex(std::vector<Point> sites, std::vector<double> offsets,
                                 std::vector<bool> active)
    : sites_(std::move(sites)), offsets_(std::move(offsets)), active_(std::move(active)) {
  if (sites_.empty()) throw ValidationError("convex function needs at least one piece");
  if (sites_.size() != offsets_.size()) throw ValidationError("sites and offsets differ in length");
  if (active_.empty()) active_.assign(sites_.size(), true);
  if (active_.size() != sites_.size()) throw ValidationError("active mask has the wrong length");
  dim_ = static_cast<int>(sites_.front().size());
  if (dim_ == 0) throw ValidationError("sites must have positive dimension");
  std::set<Point> seen;
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    if (static_cast<int>(sites_[i].size()) != dim_) throw ValidationError("site dimension mismatch");
    if (!std::isfinite(offsets_[i])) throw ValidationError("non-finite offset");
    if (!seen.insert(sites_[i]).second) throw ValidationError("sites must be pairwise distinct");
  }
  if (active_count() == 0) throw ValidationError("convex function has no active piece");
}

std::size_t MaxAffineConvex::active_count() const {
  return static_cast<std::size_t>(std::count(active_.begin(), active_.end(), true));
}

MaxAffineConvex MaxAffineConvex::with_offsets(std::vector<double> offsets) const {
  return MaxAffineConvex(sites_, std::move(offsets), active_);
}

MaxAffineConvex MaxAffineConvex::with_active(std::vector<bool> active) const {
  return MaxAffineConvex(sites_, offsets_, std::move(active));
}

Evaluation evaluate(const MaxAffineConvex& u, std::span<const double> x) {
  Evaluation best{-std::numeric_limits<double>::infinity(), 0};
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!u.is_active(i)) continue;
    const double v = dot(x, u.site(i)) - u.offset(i);
    if (v > best.value) best = {v, i};
  }
  return best;
}

namespace {

using Vec2 = std::array<double, 2>;

double piece_value(const MaxAffineConvex& u, std::size_t i, const Vec2& x) {
  return x[0] * u.site(i)[0] + x[1] * u.site(i)[1] - u.offset(i);
}

std::vector<std::size_t> active_indices(const MaxAffineConvex& u) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u.is_active(i)) idx.push_back(i);
  }
  return idx;
}

// ---- one dimension -------------------------------------------------------

// Active pieces in slope order with the envelope breakpoints between them.
struct Envelope1D {
  std::vector<std::size_t> order;
  std::vector<double> breaks;  // breaks[k] between order[k] and order[k+1]
};

double crossing(const MaxAffineConvex& u, std::size_t a, std::size_t b) {
  return (u.offset(b) - u.offset(a)) / (u.site(b)[0] - u.site(a)[0]);
}

Envelope1D upper_envelope_1d(const MaxAffineConvex& u) {
  auto idx = active_indices(u);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return u.site(a)[0] < u.site(b)[0]; });
  Envelope1D env;
  for (std::size_t c : idx) {
    while (!env.order.empty()) {
      const std::size_t b = env.order.back();
      const double x_bc = crossing(u, b, c);
      const double start_b = env.breaks.empty() ? -std::numeric_limits<double>::infinity() : env.breaks.back();
      if (x_bc > start_b) {
        env.breaks.push_back(x_bc);
        break;
      }
      env.order.pop_back();
      if (!env.breaks.empty()) env.breaks.pop_back();
    }
    env.order.push_back(c);
  }
  return env;
}

// ---- two dimensions ------------------------------------------------------

std::vector<Vec2> clip(const std::vector<Vec2>& poly, const Halfplane& h) {
  std::vector<Vec2> out;
  const std::size_t n = poly.size();
  if (n == 0) return out;
  auto side = [&](const Vec2& p) { return h.normal[0] * p[0] + h.normal[1] * p[1] - h.bound; };
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2& a = poly[k];
    const Vec2& b = poly[(k + 1) % n];
    const double sa = side(a), sb = side(b);
    if (sa >= 0) out.push_back(a);
    if ((sa >= 0) != (sb >= 0)) {
      const double t = sa / (sa - sb);
      out.push_back({a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])});
    }
  }
  return out;
}

double polygon_area(const std::vector<Vec2>& p) {
  double a = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const Vec2& u = p[k];
    const Vec2& v = p[(k + 1) % p.size()];
    a += u[0] * v[1] - u[1] * v[0];
  }
  return 0.5 * a;
}

Polygon cell_polygon(const MaxAffineConvex& u, std::size_t i, const std::vector<std::size_t>& pieces,
                     double box) {
  Polygon poly;
  poly.piece = i;
  std::vector<Vec2> verts = {Vec2{-box, -box}, Vec2{box, -box}, Vec2{box, box}, Vec2{-box, box}};
  for (std::size_t j : pieces) {
    if (j == i) continue;
    Halfplane h{{u.site(i)[0] - u.site(j)[0], u.site(i)[1] - u.site(j)[1]}, u.offset(i) - u.offset(j)};
    poly.halfplanes.push_back(h);
    verts = clip(verts, h);
    if (verts.empty()) break;
  }
  poly.vertices = std::move(verts);
  poly.bounded = true;
  for (const auto& v : poly.vertices) {
    if (std::fabs(v[0]) >= box * (1 - 1e-12) || std::fabs(v[1]) >= box * (1 - 1e-12)) {
      poly.bounded = false;
    }
  }
  return poly;
}

// Half-width of a box holding every vertex of the envelope and every
// pairwise bisector's closest point to the origin, with room to spare.
double vertex_box(const MaxAffineConvex& u, const std::vector<std::size_t>& pieces) {
  double r = 1.0;
  for (std::size_t a = 0; a < pieces.size(); ++a) {
    for (std::size_t b = a + 1; b < pieces.size(); ++b) {
      const std::size_t i = pieces[a], j = pieces[b];
      const double dx = u.site(i)[0] - u.site(j)[0], dy = u.site(i)[1] - u.site(j)[1];
      r = std::max(r, std::fabs(u.offset(i) - u.offset(j)) / std::hypot(dx, dy));
    }
  }
  double scale = 1.0;
  for (std::size_t i : pieces) scale = std::max({scale, std::fabs(u.offset(i)), norm(u.site(i))});
  for (std::size_t a = 0; a < pieces.size(); ++a) {
    for (std::size_t b = a + 1; b < pieces.size(); ++b) {
      for (std::size_t c = b + 1; c < pieces.size(); ++c) {
        const std::size_t i = pieces[a], j = pieces[b], k = pieces[c];
        const double a00 = u.site(i)[0] - u.site(j)[0], a01 = u.site(i)[1] - u.site(j)[1];
        const double a10 = u.site(i)[0] - u.site(k)[0], a11 = u.site(i)[1] - u.site(k)[1];
        const double det = a00 * a11 - a01 * a10;
        if (std::fabs(det) < 1e-14 * scale * scale) continue;
        const double b0 = u.offset(i) - u.offset(j), b1 = u.offset(i) - u.offset(k);
        const Vec2 x = {(b0 * a11 - a01 * b1) / det, (a00 * b1 - b0 * a10) / det};
        const double radius = std::hypot(x[0], x[1]);
        if (radius <= r) continue;
        const double vi = piece_value(u, i, x);
        const double tol = 1e-9 * (1.0 + std::fabs(vi));
        bool on_envelope = true;
        for (std::size_t m : pieces) {
          if (piece_value(u, m, x) > vi + tol) {
            on_envelope = false;
            break;
          }
        }
        if (on_envelope) r = radius;
      }
    }
  }
  return 2.0 * r + 1.0;
}

std::vector<Vec2> lower_hull_2d(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;  // counterclockwise convex hull
}

}  // namespace

MaxAffineConvex prune(const MaxAffineConvex& u) {
  std::vector<bool> active(u.size(), false);
  if (u.dim() == 1) {
    for (std::size_t i : upper_envelope_1d(u).order) active[i] = true;
    return u.with_active(std::move(active));
  }
  if (u.dim() == 2) {
    const auto pieces = active_indices(u);
    if (pieces.size() == 1) return u;
    const double box = vertex_box(u, pieces);
    for (std::size_t i : pieces) {
      const Polygon p = cell_polygon(u, i, pieces, box);
      if (p.vertices.size() >= 3 && polygon_area(p.vertices) > 1e-14 * box * box) active[i] = true;
    }
    return u.with_active(std::move(active));
  }
  // d >= 3: a piece is kept when it wins at some sampled point. Not exact.
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss;
  double scale = 1.0;
  for (std::size_t i = 0; i < u.size(); ++i) scale = std::max(scale, std::fabs(u.offset(i)));
  Point x(u.dim());
  for (int s = 0; s < 200000; ++s) {
    for (double& c : x) c = gauss(rng) * scale;
    active[evaluate(u, x).index] = true;
  }
  return u.with_active(std::move(active));
}

CellDecomposition cells(const MaxAffineConvex& u) {
  CellDecomposition out;
  out.dim = u.dim();
  if (u.dim() == 1) {
    const Envelope1D env = upper_envelope_1d(u);
    if (env.order.size() != u.active_count()) {
      throw ValidationError("cells() needs a pruned function: an active piece has an empty cell");
    }
    double lo = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < env.order.size(); ++k) {
      const double hi = (k < env.breaks.size()) ? env.breaks[k] : std::numeric_limits<double>::infinity();
      out.intervals.push_back({env.order[k], lo, hi});
      lo = hi;
    }
    return out;
  }
  if (u.dim() != 2) throw ValidationError("cells() supports d = 1 and d = 2");
  const auto pieces = active_indices(u);
  out.box_half_width = vertex_box(u, pieces);
  for (std::size_t i : pieces) {
    Polygon p = cell_polygon(u, i, pieces, out.box_half_width);
    if (p.vertices.size() < 3 || polygon_area(p.vertices) <= 1e-14 * out.box_half_width * out.box_half_width) {
      throw ValidationError("cells() needs a pruned function: an active piece has an empty cell");
    }
    out.polygons.push_back(std::move(p));
  }
  return out;
}

RecessionReport recession_check(const MaxAffineConvex& u) {
  RecessionReport r;
  const auto pieces = active_indices(u);
  if (u.dim() == 1) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i : pieces) {
      lo = std::min(lo, u.site(i)[0]);
      hi = std::max(hi, u.site(i)[0]);
    }
    r.integrable = lo < 0.0 && hi > 0.0;
    r.margin = r.integrable ? std::min(-lo, hi) : 0.0;
    return r;
  }
  if (u.dim() == 2) {
    std::vector<Vec2> pts;
    for (std::size_t i : pieces) pts.push_back({u.site(i)[0], u.site(i)[1]});
    const auto hull = lower_hull_2d(pts);
    if (hull.size() < 3) return r;
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < hull.size(); ++k) {
      const Vec2& a = hull[k];
      const Vec2& b = hull[(k + 1) % hull.size()];
      // Signed distance of the origin to the edge line, positive inside.
      const double cross = (b[0] - a[0]) * (0.0 - a[1]) - (b[1] - a[1]) * (0.0 - a[0]);
      margin = std::min(margin, cross / std::hypot(b[0] - a[0], b[1] - a[1]));
    }
    r.integrable = margin > 0.0;
    r.margin = r.integrable ? margin : 0.0;
    return r;
  }
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  double margin = std::numeric_limits<double>::infinity();
  Point e(u.dim());
  for (int s = 0; s < 20000; ++s) {
    for (double& c : e) c = gauss(rng);
    const double n = norm(e);
    for (double& c : e) c /= n;
    double support = -std::numeric_limits<double>::infinity();
    for (std::size_t i : pieces) support = std::max(support, dot(u.site(i), e));
    margin = std::min(margin, support);
  }
  r.integrable = margin > 1e-12;
  r.margin = r.integrable ? margin : 0.0;
  return r;
}

namespace {

void require_integrable(const RecessionReport& rec) {
  if (!rec.integrable) {
    throw ValidationError("e^{-u} is not integrable: 0 is not interior to the hull of the sites");
  }
}

CellIntegrals integrate_1d(const MaxAffineConvex& pruned) {
  const auto decomposition = cells(pruned);
  const std::size_t n = pruned.size();
  std::vector<double> log_mass(decomposition.intervals.size());
  std::vector<double> mean(decomposition.intervals.size());
  for (std::size_t k = 0; k < decomposition.intervals.size(); ++k) {
    const Interval& iv = decomposition.intervals[k];
    const double y = pruned.site(iv.piece)[0];
    const double v = pruned.offset(iv.piece);
    if (std::isinf(iv.lo)) {
      // (-inf, hi], y < 0 guaranteed by the recession check.
      log_mass[k] = v - y * iv.hi - std::log(-y);
      mean[k] = iv.hi + 1.0 / y;
    } else if (std::isinf(iv.hi)) {
      log_mass[k] = v - y * iv.lo - std::log(y);
      mean[k] = iv.lo + 1.0 / y;
    } else {
      const double len = iv.hi - iv.lo;
      const double mid = 0.5 * (iv.lo + iv.hi);
      if (std::fabs(y) <= 1e-12) {
        log_mass[k] = v + std::log(len);
        mean[k] = mid;
      } else {
        const double z = 0.5 * y * len;
        log_mass[k] = v - y * mid + std::log(len) + log_sinhc(z);
        mean[k] = mid - 0.5 * len * langevin(z);
      }
    }
  }
  CellIntegrals out;
  out.log_z = log_sum_exp(log_mass);
  out.mass_fraction.assign(n, 0.0);
  out.cell_mean.assign(n, Point{});
  for (std::size_t k = 0; k < decomposition.intervals.size(); ++k) {
    const std::size_t i = decomposition.intervals[k].piece;
    out.mass_fraction[i] = std::exp(log_mass[k] - out.log_z);
    out.cell_mean[i] = {mean[k]};
  }
  out.rel_error = 1e-14;
  out.certified = true;
  return out;
}

struct TriangleSums {
  double mass = 0.0;
  double mx = 0.0;
  double my = 0.0;
  double error = 0.0;
};

class TriangleIntegrator {
 public:
  TriangleIntegrator(const Vec2& slope, double constant, double abs_tol_density)
      : slope_(slope), constant_(constant), abs_tol_density_(abs_tol_density), rule_(gauss_legendre(12)) {}

  // Integrates exp(constant - slope.x), x exp(..) over the triangle.
  TriangleSums integrate(const Vec2& a, const Vec2& b, const Vec2& c, int depth = 0) const {
    const TriangleSums coarse = rule(a, b, c);
    const Vec2 ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    const Vec2 kids[4][3] = {{a, ab, ca}, {ab, b, bc}, {ca, bc, c}, {ab, bc, ca}};
    TriangleSums fine;
    for (const auto& t : kids) add(fine, rule(t[0], t[1], t[2]));
    const double diff = std::fabs(fine.mass - coarse.mass);
    const double area = std::fabs(signed_area(a, b, c));
    if (diff <= std::max(1e-11 * fine.mass, abs_tol_density_ * area) || depth >= kMaxDepth) {
      fine.error = diff;
      return fine;
    }
    TriangleSums total;
    for (const auto& t : kids) add(total, integrate(t[0], t[1], t[2], depth + 1));
    return total;
  }

 private:
  static constexpr int kMaxDepth = 14;

  static Vec2 mid(const Vec2& p, const Vec2& q) { return {0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])}; }
  static double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
  }
  static void add(TriangleSums& acc, const TriangleSums& t) {
    acc.mass += t.mass;
    acc.mx += t.mx;
    acc.my += t.my;
    acc.error += t.error;
  }

  // Collapsed (Duffy) tensor Gauss rule.
  TriangleSums rule(const Vec2& a, const Vec2& b, const Vec2& c) const {
    const double det = std::fabs((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]));
    TriangleSums s;
    const std::size_t n = rule_.nodes.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = 0.5 * (rule_.nodes[i] + 1.0);
      const double wi = 0.5 * rule_.weights[i];
      for (std::size_t j = 0; j < n; ++j) {
        const double eta = 0.5 * (rule_.nodes[j] + 1.0);
        const double w = wi * 0.5 * rule_.weights[j] * xi * det;
        const double px = a[0] + xi * (b[0] - a[0]) + xi * eta * (c[0] - b[0]);
        const double py = a[1] + xi * (b[1] - a[1]) + xi * eta * (c[1] - b[1]);
        const double f = w * std::exp(constant_ - slope_[0] * px - slope_[1] * py);
        s.mass += f;
        s.mx += f * px;
        s.my += f * py;
      }
    }
    return s;
  }

  Vec2 slope_;
  double constant_;
  double abs_tol_density_;
  const GaussRule& rule_;
};

CellIntegrals integrate_2d(const MaxAffineConvex& pruned, const RecessionReport& rec, int threads) {
  const auto pieces = active_indices(pruned);
  const double alpha = rec.margin;
  double beta = -std::numeric_limits<double>::infinity();
  double lmax = 0.0;
  for (std::size_t i : pieces) {
    beta = std::max(beta, pruned.offset(i));
    lmax = std::max(lmax, norm(pruned.site(i)));
  }
  const double origin[2] = {0.0, 0.0};
  const double u0 = evaluate(pruned, origin).value;
  // Z >= e^{-u(0)} 2 pi / L^2 since u(x) <= u(0) + L|x|. Choose R so that the
  // tail bound e^{beta} 2 pi e^{-alpha R} (R/alpha + 1/alpha^2) is below
  // 1e-10 of that.
  const double log_z_lower = -u0 + std::log(2.0 * std::numbers::pi) - 2.0 * std::log(lmax);
  auto log_tail = [&](double r) {
    return beta + std::log(2.0 * std::numbers::pi) - alpha * r + std::log(r / alpha + 1.0 / (alpha * alpha));
  };
  const double budget = std::log(1e-10);
  double radius = std::max(1.0, vertex_box(pruned, pieces));
  while (log_tail(radius) > log_z_lower + budget) radius *= 1.25;

  std::vector<Polygon> polys;
  for (std::size_t i : pieces) polys.push_back(cell_polygon(pruned, i, pieces, radius));

  // Shift so the integrand never exceeds 1: u >= min over polygon vertices.
  double u_min = std::numeric_limits<double>::infinity();
  for (const auto& p : polys) {
    for (const auto& v : p.vertices) u_min = std::min(u_min, piece_value(pruned, p.piece, v));
  }
  const double z_lower_scaled = std::exp(log_z_lower + u_min);
  const double abs_tol_density = 1e-13 * z_lower_scaled / (4.0 * radius * radius);

  std::vector<TriangleSums> sums(polys.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t k = first; k < polys.size(); k += stride) {
      const Polygon& p = polys[k];
      const Vec2 slope = {pruned.site(p.piece)[0], pruned.site(p.piece)[1]};
      TriangleIntegrator integ(slope, pruned.offset(p.piece) + u_min, abs_tol_density);
      TriangleSums acc;
      for (std::size_t t = 1; t + 1 < p.vertices.size(); ++t) {
        const auto s = integ.integrate(p.vertices[0], p.vertices[t], p.vertices[t + 1]);
        acc.mass += s.mass;
        acc.mx += s.mx;
        acc.my += s.my;
        acc.error += s.error;
      }
      sums[k] = acc;
    }
  };
  const std::size_t nthreads = std::max(1, std::min<int>(threads, static_cast<int>(polys.size())));
  if (nthreads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(work, t, nthreads);
  }

  CompensatedSum total, err;
  for (const auto& s : sums) {
    total += s.mass;
    err += s.error;
  }
  if (!(total.value() > 0.0) || !std::isfinite(total.value())) {
    throw SolverError("quadrature of e^{-u} failed");
  }
  CellIntegrals out;
  out.log_z = -u_min + std::log(total.value());
  out.mass_fraction.assign(pruned.size(), 0.0);
  out.cell_mean.assign(pruned.size(), Point{});
  for (std::size_t k = 0; k < polys.size(); ++k) {
    const std::size_t i = polys[k].piece;
    out.mass_fraction[i] = sums[k].mass / total.value();
    if (sums[k].mass > 0.0) {
      out.cell_mean[i] = {sums[k].mx / sums[k].mass, sums[k].my / sums[k].mass};
    } else {
      out.cell_mean[i] = {0.0, 0.0};
    }
  }
  const double tail = std::exp(log_tail(radius) + u_min);
  out.rel_error = (err.value() + tail) / total.value();
  out.certified = out.rel_error <= 1e-8;
  return out;
}

}  // namespace

CellIntegrals integrate_cells_monte_carlo(const MaxAffineConvex& u, std::size_t samples,
                                          std::uint64_t seed) {
  const auto rec = recession_check(u);
  require_integrable(rec);
  const int d = u.dim();
  const double lambda = 0.5 * rec.margin;
  // Proposal q(x) = lambda^d / (Gamma(d) |S^{d-1}|) exp(-lambda |x|).
  const double log_sphere = std::log(2.0) + 0.5 * d * std::log(std::numbers::pi) - std::lgamma(0.5 * d);
  const double log_q0 = d * std::log(lambda) - std::lgamma(static_cast<double>(d)) - log_sphere;
  const Point zero(d, 0.0);
  const double shift = evaluate(u, zero).value;

  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> radius(static_cast<double>(d), 1.0 / lambda);
  std::normal_distribution<double> gauss;
  std::vector<CompensatedSum> mass(u.size());
  std::vector<std::vector<CompensatedSum>> moment(u.size(), std::vector<CompensatedSum>(d));
  CompensatedSum sum, sum_sq;
  Point x(d);
  for (std::size_t s = 0; s < samples; ++s) {
    double n = 0.0;
    while (n < 1e-300) {
      for (double& c : x) c = gauss(rng);
      n = norm(x);
    }
    const double r = radius(rng);
    for (double& c : x) c *= r / n;
    const Evaluation ev = evaluate(u, x);
    const double w = std::exp(-(ev.value - shift) - (log_q0 - lambda * r));
    sum += w;
    sum_sq += w * w;
    mass[ev.index] += w;
    for (int a = 0; a < d; ++a) moment[ev.index][a] += w * x[a];
  }
  const double count = static_cast<double>(samples);
  const double mean = sum.value() / count;
  const double var = std::max(0.0, sum_sq.value() / count - mean * mean);
  CellIntegrals out;
  out.log_z = -shift + std::log(mean);
  out.mass_fraction.assign(u.size(), 0.0);
  out.cell_mean.assign(u.size(), Point{});
  for (std::size_t i = 0; i < u.size(); ++i) {
    out.mass_fraction[i] = mass[i].value() / sum.value();
    out.cell_mean[i] = Point(d, 0.0);
    if (mass[i].value() > 0.0) {
      for (int a = 0; a < d; ++a) out.cell_mean[i][a] = moment[i][a].value() / mass[i].value();
    }
  }
  out.rel_error = std::sqrt(var / count) / mean;  // one standard error
  out.certified = false;
  return out;
}

CellIntegrals integrate_cells(const MaxAffineConvex& u, const IntegrationOptions& opts) {
  const auto rec = recession_check(u);
  require_integrable(rec);
  if (u.dim() >= 3) return integrate_cells_monte_carlo(u, opts.monte_carlo_samples, opts.seed);
  const MaxAffineConvex pruned = prune(u);
  if (u.dim() == 1) return integrate_1d(pruned);
  return integrate_2d(pruned, recession_check(pruned), opts.threads);
}

ZResult integrate_exp_neg(const MaxAffineConvex& u, const IntegrationOptions& opts) {
  const auto ci = integrate_cells(u, opts);
  return {std::exp(ci.log_z), ci.rel_error};
}

std::vector<double> cell_masses(const MaxAffineConvex& u, const IntegrationOptions& opts) {
  const auto ci = integrate_cells(u, opts);
  const double z = std::exp(ci.log_z);
  std::vector<double> m(ci.mass_fraction.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = ci.mass_fraction[i] * z;
  return m;
}

Point barycenter_exp_neg(const MaxAffineConvex& u, const IntegrationOptions& opts) {
  const auto ci = integrate_cells(u, opts);
  std::vector<CompensatedSum> acc(u.dim());
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (ci.mass_fraction[i] <= 0.0) continue;
    for (int a = 0; a < u.dim(); ++a) acc[a] += ci.mass_fraction[i] * ci.cell_mean[i][a];
  }
  Point b(u.dim());
  for (int a = 0; a < u.dim(); ++a) b[a] = acc[a].value();
  return b;
}

std::vector<double> conjugate_grid(std::span<const double> xs, std::span<const double> fs,
                                   std::span<const double> ys, ConjugateBoundary boundary) {
  if (ys.empty()) throw ValidationError("empty dual grid");
  if (xs.empty() || xs.size() != fs.size()) throw ValidationError("primal grid and values differ");
  for (std::size_t k = 1; k < xs.size(); ++k) {
    if (!(xs[k] > xs[k - 1])) throw ValidationError("primal grid must be strictly increasing");
  }
  for (std::size_t k = 1; k < ys.size(); ++k) {
    if (ys[k] < ys[k - 1]) throw ValidationError("dual grid must be sorted");
  }
  // Lower convex hull of (x, f).
  std::vector<std::size_t> hull;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (!std::isfinite(fs[k])) continue;
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2], b = hull.back();
      const double cross = (xs[b] - xs[a]) * (fs[k] - fs[a]) - (fs[b] - fs[a]) * (xs[k] - xs[a]);
      if (cross > 0) break;
      hull.pop_back();
    }
    hull.push_back(k);
  }
  if (hull.empty()) throw ValidationError("function is +inf on the whole grid");
  std::vector<double> slopes;
  for (std::size_t k = 0; k + 1 < hull.size(); ++k) {
    const std::size_t a = hull[k], b = hull[k + 1];
    slopes.push_back((fs[b] - fs[a]) / (xs[b] - xs[a]));
  }
  std::vector<double> out(ys.size());
  std::size_t pos = 0;
  for (std::size_t j = 0; j < ys.size(); ++j) {
    const double y = ys[j];
    if (boundary == ConjugateBoundary::Affine && !slopes.empty()) {
      const double lo = slopes.front(), hi = slopes.back();
      if (y < lo - 1e-12 * (1.0 + std::fabs(lo)) || y > hi + 1e-12 * (1.0 + std::fabs(hi))) {
        out[j] = kConjugateInfinity;
        continue;
      }
    }
    while (pos < slopes.size() && slopes[pos] < y) ++pos;
    const std::size_t k = hull[pos];
    out[j] = xs[k] * y - fs[k];
  }
  return out;
}

std::vector<double> conjugate_grid_2d(std::span<const double> x0, std::span<const double> x1,
                                      std::span<const double> fs, std::span<const double> y0,
                                      std::span<const double> y1) {
  if (fs.size() != x0.size() * x1.size()) throw ValidationError("2D grid values do not match shape");
  if (y0.empty() || y1.empty()) throw ValidationError("empty dual grid");
  // g(x0_i, y1_j) = sup_{x1} x1 y1_j - f(x0_i, x1)
  std::vector<double> g(x0.size() * y1.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const auto row = conjugate_grid(x1, fs.subspan(i * x1.size(), x1.size()), y1);
    std::copy(row.begin(), row.end(), g.begin() + static_cast<std::ptrdiff_t>(i * y1.size()));
  }
  std::vector<double> out(y0.size() * y1.size());
  std::vector<double> column(x0.size());
  for (std::size_t j = 0; j < y1.size(); ++j) {
    for (std::size_t i = 0; i < x0.size(); ++i) column[i] = -g[i * y1.size() + j];
    const auto res = conjugate_grid(x0, column, y0);
    for (std::size_t k = 0; k < y0.size(); ++k) out[k * y1.size() + j] = res[k];
  }
  return out;
}

}  // namespace mmflow
