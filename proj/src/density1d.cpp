#include "mmflow/density1d.hpp"

#include <algorithm>
#include <cmath>

#include "mmflow/error.hpp"

namespace mmflow {

PiecewiseDensity1D PiecewiseDensity1D::from_grid(const GridDensity& rho) {
  if (rho.dim() != 1) throw ValidationError("expected a one-dimensional grid density");
  std::vector<Segment> segs;
  const double h = rho.spacing()[0];
  const double vol = rho.cell_volume();
  for (std::size_t k = 0; k < rho.size(); ++k) {
    const double lo = rho.origin()[0] + static_cast<double>(k) * h;
    const double hi = rho.origin()[0] + static_cast<double>(k + 1) * h;
    segs.push_back({lo, hi, rho.values()[k] * vol});
  }
  return from_segments(std::move(segs));
}

PiecewiseDensity1D PiecewiseDensity1D::from_segments(std::vector<Segment> segments) {
  if (segments.empty()) throw ValidationError("density has no segments");
  CompensatedSum total;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const auto& s = segments[k];
    if (!(s.hi > s.lo)) throw ValidationError("segment with nonpositive length");
    if (!(s.mass >= 0.0)) throw ValidationError("segment with negative mass");
    if (k > 0 && s.lo < segments[k - 1].hi) throw ValidationError("segments overlap");
    total += s.mass;
  }
  if (std::fabs(total.value() - 1.0) > 1e-9) throw ValidationError("segment masses do not sum to 1");
  PiecewiseDensity1D d;
  // Close gaps with empty segments so the breakpoints are contiguous.
  for (auto& s : segments) {
    if (!d.segments_.empty() && s.lo > d.segments_.back().hi) {
      d.segments_.push_back({d.segments_.back().hi, s.lo, 0.0});
    }
    s.mass /= total.value();
    d.segments_.push_back(s);
  }
  d.build_pieces();
  return d;
}

void PiecewiseDensity1D::build_pieces() {
  pieces_.clear();
  double p = 0.0;
  for (const auto& s : segments_) {
    if (s.mass <= 0.0) continue;
    pieces_.push_back({p, p + s.mass, s.lo, s.hi});
    p += s.mass;
  }
  pieces_.back().p1 = 1.0;
}

double PiecewiseDensity1D::cdf(double x) const {
  double p = 0.0;
  for (const auto& s : segments_) {
    if (x >= s.hi) {
      p += s.mass;
    } else {
      if (x > s.lo) p += s.mass * (x - s.lo) / (s.hi - s.lo);
      break;
    }
  }
  return std::min(1.0, p);
}

double PiecewiseDensity1D::quantile(double p) const {
  auto it = std::lower_bound(pieces_.begin(), pieces_.end(), p,
                             [](const QuantilePiece& q, double v) { return q.p1 < v; });
  if (it == pieces_.end()) return pieces_.back().z1;
  return it->at(std::max(p, it->p0));
}

double PiecewiseDensity1D::quantile_integral(double p0, double p1) const {
  CompensatedSum s;
  for (const auto& q : pieces_) {
    const double a = std::max(p0, q.p0), b = std::min(p1, q.p1);
    if (b <= a) continue;
    s += 0.5 * (q.at(a) + q.at(b)) * (b - a);
  }
  return s.value();
}

double PiecewiseDensity1D::mean() const {
  CompensatedSum s;
  for (const auto& seg : segments_) s += seg.mass * 0.5 * (seg.lo + seg.hi);
  return s.value();
}

double PiecewiseDensity1D::first_abs_moment() const {
  CompensatedSum s;
  for (const auto& seg : segments_) {
    if (seg.mass <= 0.0) continue;
    const double len = seg.hi - seg.lo;
    // int |x| over [lo, hi] / len
    auto prim = [](double x) { return 0.5 * x * std::fabs(x); };
    s += seg.mass * (prim(seg.hi) - prim(seg.lo)) / len;
  }
  return s.value();
}

double PiecewiseDensity1D::second_moment() const {
  CompensatedSum s;
  for (const auto& seg : segments_) {
    s += seg.mass * (seg.lo * seg.lo + seg.lo * seg.hi + seg.hi * seg.hi) / 3.0;
  }
  return s.value();
}

double PiecewiseDensity1D::entropy() const {
  CompensatedSum s;
  for (const auto& seg : segments_) {
    if (seg.mass > 0.0) s += seg.mass * std::log(seg.mass / (seg.hi - seg.lo));
  }
  return s.value();
}

GridDensity PiecewiseDensity1D::to_grid(double origin, double spacing, std::size_t cells) const {
  std::vector<double> values(cells, 0.0);
  std::size_t s = 0;
  for (std::size_t k = 0; k < cells; ++k) {
    const double a = origin + static_cast<double>(k) * spacing;
    const double b = a + spacing;
    while (s < segments_.size() && segments_[s].hi <= a) ++s;
    double mass = 0.0;
    for (std::size_t t = s; t < segments_.size() && segments_[t].lo < b; ++t) {
      const auto& seg = segments_[t];
      const double lo = std::max(a, seg.lo), hi = std::min(b, seg.hi);
      if (hi > lo) mass += seg.mass * (hi - lo) / (seg.hi - seg.lo);
    }
    values[k] = mass;
  }
  CompensatedSum total;
  for (double v : values) total += v;
  if (total.value() <= 0.0) throw ValidationError("density has no mass on the requested grid");
  for (double& v : values) v /= total.value() * spacing;
  return GridDensity::make({origin}, {spacing}, {cells}, std::move(values));
}

PiecewiseDensity1D PiecewiseDensity1D::translated(double shift) const {
  PiecewiseDensity1D d = *this;
  for (auto& s : d.segments_) {
    s.lo += shift;
    s.hi += shift;
  }
  for (auto& q : d.pieces_) {
    q.z0 += shift;
    q.z1 += shift;
  }
  return d;
}

std::vector<QuantilePair> merge_quantiles(const PiecewiseDensity1D& a, const PiecewiseDensity1D& b) {
  const auto& qa = a.quantile_pieces();
  const auto& qb = b.quantile_pieces();
  std::vector<QuantilePair> out;
  std::size_t i = 0, j = 0;
  double p = 0.0;
  while (i < qa.size() && j < qb.size()) {
    const double next = std::min(qa[i].p1, qb[j].p1);
    if (next > p) {
      out.push_back({p, next, qa[i].at(p), qa[i].at(next), qb[j].at(p), qb[j].at(next)});
      p = next;
    }
    if (qa[i].p1 <= next) ++i;
    if (j < qb.size() && qb[j].p1 <= next) ++j;
  }
  return out;
}

PiecewiseDensity1D displacement_interpolate(const PiecewiseDensity1D& a, const PiecewiseDensity1D& b,
                                            double t) {
  if (t <= 0.0) return a;
  if (t >= 1.0) return b;
  std::vector<PiecewiseDensity1D::Segment> segs;
  double pending = 0.0;  // mass of leading pieces that collapsed to a point
  for (const auto& q : merge_quantiles(a, b)) {
    double lo = (1.0 - t) * q.a0 + t * q.b0;
    const double hi = (1.0 - t) * q.a1 + t * q.b1;
    const double mass = q.p1 - q.p0;
    // Adjacent pieces share a breakpoint up to roundoff.
    if (!segs.empty()) lo = std::max(lo, segs.back().hi);
    if (hi > lo) {
      segs.push_back({lo, hi, mass + pending});
      pending = 0.0;
    } else if (!segs.empty()) {
      segs.back().mass += mass;
    } else {
      pending += mass;
    }
  }
  return PiecewiseDensity1D::from_segments(std::move(segs));
}

double w2_distance(const PiecewiseDensity1D& a, const PiecewiseDensity1D& b) {
  CompensatedSum s;
  for (const auto& q : merge_quantiles(a, b)) {
    const double d0 = q.a0 - q.b0, d1 = q.a1 - q.b1;
    s += (q.p1 - q.p0) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
  }
  return std::sqrt(std::max(0.0, s.value()));
}

}  // namespace mmflow
