#pragma once

// Planar convex-polygon primitives: points, half-plane clipping, areas and
// moments. Everything is double precision with absolute tolerances tuned for
// unit-scale domains.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "monge/error.hpp"

namespace monge {

/// Absolute tolerance on areas and lengths for unit-scale domains.
inline constexpr double kTolGeo = 1e-10;
/// Two sites closer than this are considered duplicates.
inline constexpr double kEpsSite = 1e-12;
/// Consecutive polygon vertices closer than this are merged.
inline constexpr double kEpsVertex = 1e-14;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Point2& operator+=(const Point2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Point2& operator-=(const Point2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Point2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  friend constexpr Point2 operator+(Point2 a, const Point2& b) { return a += b; }
  friend constexpr Point2 operator-(Point2 a, const Point2& b) { return a -= b; }
  friend constexpr Point2 operator-(const Point2& a) { return {-a.x, -a.y}; }
  friend constexpr Point2 operator*(Point2 a, double s) { return a *= s; }
  friend constexpr Point2 operator*(double s, Point2 a) { return a *= s; }
  friend constexpr bool operator==(const Point2&, const Point2&) = default;
};

constexpr double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
constexpr double norm2(const Point2& a) { return dot(a, a); }
inline double norm(const Point2& a) { return std::hypot(a.x, a.y); }
inline double distance(const Point2& a, const Point2& b) { return norm(a - b); }
inline bool is_finite(const Point2& p) { return std::isfinite(p.x) && std::isfinite(p.y); }

struct BoundingBox {
  Point2 lo{+INFINITY, +INFINITY};
  Point2 hi{-INFINITY, -INFINITY};

  void extend(const Point2& p) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  }
  bool empty() const { return lo.x > hi.x; }
  bool overlaps(const BoundingBox& o) const {
    return !(o.lo.x > hi.x || o.hi.x < lo.x || o.lo.y > hi.y || o.hi.y < lo.y);
  }
};

/// Convex polygon with counter-clockwise vertices. An empty vertex list is the
/// empty polygon.
struct ConvexPolygon {
  std::vector<Point2> vertices;

  bool empty() const { return vertices.size() < 3; }
  std::size_t size() const { return vertices.size(); }
  const Point2& operator[](std::size_t k) const { return vertices[k]; }
};

/// Shoelace signed area (positive for CCW).
inline double signed_area(std::span<const Point2> v) {
  const std::size_t n = v.size();
  if (n < 3) return 0.0;
  double a = 0.0;
  // Anchor on v[0] to limit cancellation for small polygons far from origin.
  for (std::size_t k = 1; k + 1 < n; ++k) a += cross(v[k] - v[0], v[k + 1] - v[0]);
  return 0.5 * a;
}

inline double area(const ConvexPolygon& p) { return signed_area(p.vertices); }

/// First moment \int_P x dx.
inline Point2 first_moment(std::span<const Point2> v) {
  const std::size_t n = v.size();
  if (n < 3) return {};
  Point2 m{};
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double a = 0.5 * cross(v[k] - v[0], v[k + 1] - v[0]);
    m += (a / 3.0) * (v[0] + v[k] + v[k + 1]);
  }
  return m;
}

inline Point2 first_moment(const ConvexPolygon& p) { return first_moment(p.vertices); }

inline Point2 centroid(const ConvexPolygon& p) {
  const double a = area(p);
  if (a <= 0.0) return {};
  return first_moment(p) * (1.0 / a);
}

inline BoundingBox bounding_box(std::span<const Point2> v) {
  BoundingBox b;
  for (const auto& p : v) b.extend(p);
  return b;
}

inline BoundingBox bounding_box(const ConvexPolygon& p) { return bounding_box(p.vertices); }

inline double perimeter(const ConvexPolygon& p) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += distance(p[k], p[(k + 1) % p.size()]);
  return s;
}

/// Smallest radius R with P contained in the closed ball B(0, R).
inline double max_radius(const ConvexPolygon& p) {
  double r = 0.0;
  for (const auto& v : p.vertices) r = std::max(r, norm(v));
  return r;
}

inline double diameter(std::span<const Point2> pts) {
  double d = 0.0;
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b) d = std::max(d, distance(pts[a], pts[b]));
  return d;
}

inline double diameter(const ConvexPolygon& p) { return diameter(p.vertices); }

/// Point-in-polygon with tolerance (boundary counts as inside).
inline bool contains(const ConvexPolygon& p, const Point2& q, double tol = kTolGeo) {
  if (p.empty()) return false;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const Point2& a = p[k];
    const Point2& b = p[(k + 1) % p.size()];
    const Point2 e = b - a;
    if (cross(e, q - a) < -tol * std::max(1.0, norm(e))) return false;
  }
  return true;
}

/// Minimum cross product of consecutive edges; >= 0 (up to rounding) for a
/// convex CCW polygon.
inline double min_turn(const ConvexPolygon& p) {
  double t = INFINITY;
  const std::size_t n = p.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Point2 e0 = p[(k + 1) % n] - p[k];
    const Point2 e1 = p[(k + 2) % n] - p[(k + 1) % n];
    t = std::min(t, cross(e0, e1));
  }
  return t;
}

inline ConvexPolygon unit_square() { return {{{0, 0}, {1, 0}, {1, 1}, {0, 1}}}; }

inline ConvexPolygon rectangle(double x0, double y0, double x1, double y1) {
  return {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

inline bool is_unit_square(const ConvexPolygon& p, double tol = kTolGeo) {
  if (p.size() != 4) return false;
  const auto b = bounding_box(p);
  return std::abs(b.lo.x) <= tol && std::abs(b.lo.y) <= tol && std::abs(b.hi.x - 1) <= tol &&
         std::abs(b.hi.y - 1) <= tol && std::abs(area(p) - 1.0) <= tol;
}

/// Regular k-gon inscribed in the unit circle, first vertex at (1, 0).
inline ConvexPolygon regular_polygon_disc(int k) {
  if (k < 3) throw Error(ErrorCode::InvalidArgument, "geometry", "regular polygon needs k >= 3");
  ConvexPolygon p;
  p.vertices.reserve(static_cast<std::size_t>(k));
  for (int s = 0; s < k; ++s) {
    const double a = 2.0 * std::numbers::pi * s / k;
    p.vertices.push_back({std::cos(a), std::sin(a)});
  }
  return p;
}

namespace detail {

/// Polygon whose edge k (from vertex k to k+1) carries a label: the index of
/// the constraint that produced it, or -1 for the original boundary.
struct LabeledPolygon {
  std::vector<Point2> vertices;
  std::vector<int> labels;

  bool empty() const { return vertices.size() < 3; }
};

inline LabeledPolygon labeled(const ConvexPolygon& p, int label = -1) {
  return {p.vertices, std::vector<int>(p.vertices.size(), label)};
}

/// Drops consecutive near-duplicate vertices; keeps the outgoing label of the
/// surviving vertex.
inline void merge_duplicates(LabeledPolygon& p) {
  auto& v = p.vertices;
  auto& l = p.labels;
  std::size_t n = v.size();
  if (n == 0) return;
  std::vector<Point2> ov;
  std::vector<int> ol;
  ov.reserve(n);
  ol.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Point2& nxt = v[(k + 1) % n];
    if (norm2(nxt - v[k]) <= kEpsVertex * kEpsVertex && n > 1) {
      // Edge k has zero length: vertex k collapses onto vertex k+1.
      continue;
    }
    ov.push_back(v[k]);
    ol.push_back(l[k]);
  }
  if (ov.size() < 3) {
    ov.clear();
    ol.clear();
  }
  v = std::move(ov);
  l = std::move(ol);
}

/// Clips p to {x : <normal, x> <= offset}; the new edge (if any) gets `label`.
inline void clip_in_place(LabeledPolygon& p, const Point2& normal, double offset, int label,
                          std::vector<Point2>& scratch_v, std::vector<int>& scratch_l) {
  const std::size_t n = p.vertices.size();
  if (n < 3) return;
  // Quick accept: if every vertex is inside, nothing changes.
  bool any_out = false;
  bool any_in = false;
  thread_local std::vector<double> s;
  s.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s[k] = dot(normal, p.vertices[k]) - offset;
    if (s[k] > 0.0)
      any_out = true;
    else
      any_in = true;
  }
  if (!any_out) return;
  if (!any_in) {
    p.vertices.clear();
    p.labels.clear();
    return;
  }
  scratch_v.clear();
  scratch_l.clear();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k1 = (k + 1) % n;
    const Point2& a = p.vertices[k];
    const Point2& b = p.vertices[k1];
    const double sa = s[k];
    const double sb = s[k1];
    if (sa <= 0.0) {
      scratch_v.push_back(a);
      scratch_l.push_back(p.labels[k]);
      if (sb > 0.0) {
        const double t = sa / (sa - sb);
        scratch_v.push_back(a + t * (b - a));
        scratch_l.push_back(label);
      }
    } else if (sb <= 0.0) {
      const double t = sa / (sa - sb);
      scratch_v.push_back(a + t * (b - a));
      scratch_l.push_back(p.labels[k]);
    }
  }
  p.vertices.swap(scratch_v);
  p.labels.swap(scratch_l);
  merge_duplicates(p);
}

inline void clip_in_place(LabeledPolygon& p, const Point2& normal, double offset, int label) {
  thread_local std::vector<Point2> sv;
  thread_local std::vector<int> sl;
  clip_in_place(p, normal, offset, label, sv, sl);
}

/// Intersection of two convex polygons without sliver collapse.
inline ConvexPolygon intersect_raw(const ConvexPolygon& a, const ConvexPolygon& b) {
  if (a.empty() || b.empty()) return {};
  LabeledPolygon p = labeled(a);
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n && !p.empty(); ++k) {
    const Point2 e = b[(k + 1) % n] - b[k];
    const Point2 normal{e.y, -e.x};
    clip_in_place(p, normal, dot(normal, b[k]), -1);
  }
  if (p.empty() || signed_area(p.vertices) <= 0.0) return {};
  return {std::move(p.vertices)};
}

}  // namespace detail

/// poly ∩ {x : <normal, x> <= offset}. Results with area below kTolGeo
/// collapse to the empty polygon.
inline ConvexPolygon clip_halfplane(const ConvexPolygon& poly, const Point2& normal, double offset) {
  if (poly.empty()) return {};
  auto p = detail::labeled(poly);
  detail::clip_in_place(p, normal, offset, -1);
  if (p.empty() || signed_area(p.vertices) < kTolGeo) return {};
  return {std::move(p.vertices)};
}

/// Intersection of two convex polygons; slivers below kTolGeo collapse.
inline ConvexPolygon intersect(const ConvexPolygon& a, const ConvexPolygon& b) {
  auto p = detail::intersect_raw(a, b);
  if (area(p) < kTolGeo) return {};
  return p;
}

}  // namespace monge
