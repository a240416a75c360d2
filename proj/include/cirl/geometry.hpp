// Small 2D geometry kit: convex polygons, clipping, overlap areas, discs.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cirl/common.hpp"

namespace cirl::geom {

struct Vec2 {
  double x = 0, y = 0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double norm2() const { return x * x + y * y; }
  Vec2 normalized() const {
    double n = norm();
    return n > 0 ? Vec2{x / n, y / n} : Vec2{0, 0};
  }
  /// 90 degrees counterclockwise.
  Vec2 perp_left() const { return {-y, x}; }
  /// 90 degrees clockwise.
  Vec2 perp_right() const { return {y, -x}; }
  Vec2 rotated(double angle) const {
    double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
  bool operator==(const Vec2&) const = default;
};

/// Convex polygon, counterclockwise winding.
using Poly = std::vector<Vec2>;

inline double poly_area(const Poly& p) {
  double a = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    const Vec2& u = p[i];
    const Vec2& v = p[(i + 1) % p.size()];
    a += u.cross(v);
  }
  return 0.5 * a;
}

struct Aabb {
  Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};

  void grow(Vec2 p) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  }
  void pad(double m) {
    lo.x -= m;
    lo.y -= m;
    hi.x += m;
    hi.y += m;
  }
  bool overlaps(const Aabb& o) const {
    return lo.x <= o.hi.x && o.lo.x <= hi.x && lo.y <= o.hi.y && o.lo.y <= hi.y;
  }
  bool contains(Vec2 p) const { return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y; }

  static Aabb of(const Poly& p) {
    Aabb b;
    for (Vec2 v : p) b.grow(v);
    return b;
  }
};

/// Axis-aligned rectangle as a CCW polygon.
inline Poly rect(Vec2 lo, Vec2 hi) {
  return {{lo.x, lo.y}, {hi.x, lo.y}, {hi.x, hi.y}, {lo.x, hi.y}};
}

/// Oriented rectangle (vehicle footprint) as a CCW polygon.
inline Poly oriented_rect(Vec2 center, double heading, double half_len, double half_wid) {
  Vec2 f = Vec2{std::cos(heading), std::sin(heading)};
  Vec2 l = f.perp_left();
  Vec2 fl = f * half_len, lw = l * half_wid;
  return {center + fl + lw, center - fl + lw, center - fl - lw, center + fl - lw};
}

inline bool point_in_convex(Vec2 p, const Poly& poly) {
  for (size_t i = 0; i < poly.size(); ++i) {
    Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
    if ((b - a).cross(p - a) < 0) return false;
  }
  return true;
}

/// Sutherland-Hodgman clip of a convex subject against a convex CCW clip
/// polygon; the result is convex (possibly empty).
inline Poly clip_convex(const Poly& subject, const Poly& clip) {
  Poly out = subject;
  for (size_t i = 0; i < clip.size() && !out.empty(); ++i) {
    Vec2 a = clip[i], b = clip[(i + 1) % clip.size()];
    Vec2 edge = b - a;
    Poly in = std::move(out);
    out.clear();
    for (size_t j = 0; j < in.size(); ++j) {
      Vec2 p = in[j], q = in[(j + 1) % in.size()];
      double dp = edge.cross(p - a);
      double dq = edge.cross(q - a);
      if (dp >= 0) out.push_back(p);
      if ((dp >= 0) != (dq >= 0)) {
        double t = dp / (dp - dq);
        out.push_back(p + (q - p) * t);
      }
    }
  }
  return out;
}

inline double intersection_area(const Poly& a, const Poly& b) {
  Poly c = clip_convex(a, b);
  return c.size() >= 3 ? poly_area(c) : 0.0;
}

/// Separating-axis test for convex polygons (touching counts as intersecting).
inline bool polys_intersect(const Poly& a, const Poly& b) {
  auto separated_by_edges_of = [](const Poly& p, const Poly& q) {
    for (size_t i = 0; i < p.size(); ++i) {
      Vec2 axis = (p[(i + 1) % p.size()] - p[i]).perp_left();
      double pmin = 1e300, pmax = -1e300, qmin = 1e300, qmax = -1e300;
      for (Vec2 v : p) {
        double d = axis.dot(v);
        pmin = std::min(pmin, d);
        pmax = std::max(pmax, d);
      }
      for (Vec2 v : q) {
        double d = axis.dot(v);
        qmin = std::min(qmin, d);
        qmax = std::max(qmax, d);
      }
      if (pmax < qmin || qmax < pmin) return true;
    }
    return false;
  };
  return !separated_by_edges_of(a, b) && !separated_by_edges_of(b, a);
}

struct Disc {
  Vec2 center;
  double radius = 0;
};

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double len2 = ab.norm2();
  double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + ab * t)).norm();
}

inline bool poly_intersects_disc(const Poly& poly, const Disc& d) {
  if (point_in_convex(d.center, poly)) return true;
  for (size_t i = 0; i < poly.size(); ++i)
    if (point_segment_distance(d.center, poly[i], poly[(i + 1) % poly.size()]) <= d.radius)
      return true;
  return false;
}

namespace detail {
inline void union_rec(const Poly& cur, std::span<const Poly* const> regions, size_t start,
                      double sign, double& total) {
  for (size_t i = start; i < regions.size(); ++i) {
    Poly p = clip_convex(cur, *regions[i]);
    if (p.size() < 3) continue;
    double a = poly_area(p);
    if (a <= 1e-12) continue;
    total += sign * a;
    union_rec(p, regions, i + 1, -sign, total);
  }
}
}  // namespace detail

/// Area of footprint ∩ (union of convex regions), by inclusion-exclusion.
/// Exact for convex pieces; regions may overlap each other.
inline double union_overlap_area(const Poly& footprint, std::span<const Poly* const> regions) {
  double total = 0;
  detail::union_rec(footprint, regions, 0, 1.0, total);
  return total;
}

/// Miter data for one polyline vertex: unit left-offset direction and the
/// scale that keeps offset polylines parallel through corners.
struct MiterNormal {
  Vec2 dir;
  double scale = 1.0;
};

inline std::vector<MiterNormal> miter_normals(const std::vector<Vec2>& pts) {
  std::vector<MiterNormal> out(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    Vec2 n_prev = i > 0 ? (pts[i] - pts[i - 1]).normalized().perp_left() : Vec2{};
    Vec2 n_next = i + 1 < pts.size() ? (pts[i + 1] - pts[i]).normalized().perp_left() : Vec2{};
    Vec2 m;
    double denom = 1.0;
    if (i == 0) {
      m = n_next;
    } else if (i + 1 == pts.size()) {
      m = n_prev;
    } else {
      m = (n_prev + n_next).normalized();
      denom = std::max(0.2, m.dot(n_next));  // clamp against near-reversals
    }
    out[i] = {m, 1.0 / denom};
  }
  return out;
}

/// Parallel offset of an open polyline; positive distance offsets to the
/// right of the travel direction. Corners are mitered, so offsets of the
/// same polyline at different distances never cross each other.
inline std::vector<Vec2> offset_polyline(const std::vector<Vec2>& pts, double right_dist) {
  auto miters = miter_normals(pts);
  std::vector<Vec2> out(pts.size());
  for (size_t i = 0; i < pts.size(); ++i)
    out[i] = pts[i] + miters[i].dir * (-right_dist * miters[i].scale);
  return out;
}

inline double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

}  // namespace cirl::geom
