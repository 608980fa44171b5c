#pragma once

// Laguerre (power) diagrams clipped to a convex domain, and overlays of
// diagrams with each other and with the regular m x m grid of the unit
// square.
//
// Cell i for potential psi is
//   V_i = { x in X : <y_j - y_i, x> <= psi_j - psi_i  for all j },
// i.e. the set where <x, y_i> - psi_i is maximal. With psi_i = |y_i|^2 / 2
// these are the Voronoi cells.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "monge/error.hpp"
#include "monge/geometry.hpp"

namespace monge {

using Vector = Eigen::VectorXd;

/// Shared-edge length between two Laguerre cells, stored once with i < j.
struct Interface {
  int i = 0;
  int j = 0;
  double length = 0.0;
};

struct LaguerreDiagram {
  ConvexPolygon domain;
  std::vector<Point2> sites;
  Vector potential;
  std::vector<ConvexPolygon> cells;
  /// rho-mass of each cell (rho uniform probability on the domain).
  Vector masses;
  /// Sorted by (i, j); lengths are Euclidean, not rho-scaled.
  std::vector<Interface> interfaces;
  /// \int_{V_i} x rho(x) dx.
  std::vector<Point2> first_moments;
  /// 1 / area(domain).
  double density = 1.0;

  std::size_t size() const { return sites.size(); }

  double interface_length(int a, int b) const {
    if (a == b) return 0.0;
    const int i = std::min(a, b);
    const int j = std::max(a, b);
    auto it = std::lower_bound(interfaces.begin(), interfaces.end(), std::pair{i, j},
                               [](const Interface& f, const std::pair<int, int>& k) {
                                 return std::pair{f.i, f.j} < k;
                               });
    if (it != interfaces.end() && it->i == i && it->j == j) return it->length;
    return 0.0;
  }

  double min_mass() const { return masses.size() ? masses.minCoeff() : 0.0; }
};

namespace detail {

/// Uniform bucket grid over a point set, used to visit sites in rings of
/// increasing distance from a query site.
class SiteGrid {
 public:
  explicit SiteGrid(std::span<const Point2> pts) : pts_(pts) {
    const auto box = bounding_box(pts);
    lo_ = box.lo;
    const double w = std::max(box.hi.x - box.lo.x, 1e-12);
    const double h = std::max(box.hi.y - box.lo.y, 1e-12);
    const double cells = std::max(1.0, static_cast<double>(pts.size()) / 2.0);
    cell_ = std::sqrt(w * h / cells);
    cell_ = std::max(cell_, std::max(w, h) / 1024.0);
    nx_ = std::max(1, static_cast<int>(std::ceil(w / cell_)));
    ny_ = std::max(1, static_cast<int>(std::ceil(h / cell_)));
    start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    for (const auto& p : pts) ++start_[index(p) + 1];
    for (std::size_t k = 1; k < start_.size(); ++k) start_[k] += start_[k - 1];
    items_.resize(pts.size());
    std::vector<int> fill(start_.begin(), start_.end() - 1);
    for (std::size_t k = 0; k < pts.size(); ++k) items_[fill[index(pts[k])]++] = static_cast<int>(k);
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double cell_size() const { return cell_; }

  std::pair<int, int> bucket(const Point2& p) const {
    int bx = static_cast<int>(std::floor((p.x - lo_.x) / cell_));
    int by = static_cast<int>(std::floor((p.y - lo_.y) / cell_));
    return {std::clamp(bx, 0, nx_ - 1), std::clamp(by, 0, ny_ - 1)};
  }

  std::span<const int> items(int bx, int by) const {
    const std::size_t b = static_cast<std::size_t>(by) * nx_ + bx;
    return {items_.data() + start_[b], items_.data() + start_[b + 1]};
  }

  int max_ring(int bx, int by) const {
    return std::max({bx, nx_ - 1 - bx, by, ny_ - 1 - by});
  }

  /// Calls f(j) for every point in Chebyshev ring r around bucket (bx, by).
  template <class F>
  void for_ring(int bx, int by, int r, F&& f) const {
    if (r == 0) {
      for (int j : items(bx, by)) f(j);
      return;
    }
    for (int dx = -r; dx <= r; ++dx) {
      const int x = bx + dx;
      if (x < 0 || x >= nx_) continue;
      const bool edge_col = (dx == -r || dx == r);
      for (int dy = -r; dy <= r; dy += edge_col ? 1 : 2 * r) {
        const int y = by + dy;
        if (y < 0 || y >= ny_) continue;
        for (int j : items(x, y)) f(j);
      }
    }
  }

 private:
  std::size_t index(const Point2& p) const {
    auto [bx, by] = bucket(p);
    return static_cast<std::size_t>(by) * nx_ + bx;
  }

  std::span<const Point2> pts_;
  Point2 lo_;
  double cell_ = 1.0;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<int> start_;
  std::vector<int> items_;
};

inline void check_distinct(std::span<const Point2> sites, const SiteGrid& grid) {
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (!is_finite(sites[i]))
      throw Error(ErrorCode::InvalidArgument, "geometry", "non-finite site");
    auto [bx, by] = grid.bucket(sites[i]);
    for (int r = 0; r <= 1; ++r) {
      grid.for_ring(bx, by, r, [&](int j) {
        if (static_cast<std::size_t>(j) > i && distance(sites[i], sites[j]) <= kEpsSite)
          throw Error(ErrorCode::DuplicateSites, "geometry",
                      "sites " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
      });
    }
  }
}

/// Builds cell i by clipping the domain against the bisector half-planes of
/// the other sites, visited ring by ring. Stops once no farther site can cut
/// the current cell: with power weights w_j = |y_j|^2 - 2 psi_j and R the
/// radius of the cell around y_i, a site at distance d cannot cut when
/// (d - R)^2 - max_j w_j >= R^2 - w_i.
inline LabeledPolygon build_cell(int i, const ConvexPolygon& domain, std::span<const Point2> sites,
                                 const Vector& psi, const SiteGrid& grid, double w_max) {
  LabeledPolygon cell = labeled(domain);
  const Point2 yi = sites[i];
  const double wi = norm2(yi) - 2.0 * psi[i];
  auto [bx, by] = grid.bucket(yi);
  const int last = grid.max_ring(bx, by);
  const double h = grid.cell_size();
  for (int r = 0; r <= last && !cell.empty(); ++r) {
    if (r >= 2) {
      double rad2 = 0.0;
      for (const auto& v : cell.vertices) rad2 = std::max(rad2, norm2(v - yi));
      const double rad = std::sqrt(rad2);
      const double stop = rad + std::sqrt(std::max(0.0, rad2 - wi + w_max));
      if ((r - 1) * h > stop) break;
    }
    grid.for_ring(bx, by, r, [&](int j) {
      if (j == i || cell.empty()) return;
      const Point2 n = sites[j] - yi;
      clip_in_place(cell, n, psi[j] - psi[i], j);
    });
  }
  return cell;
}

}  // namespace detail

/// Laguerre diagram of `sites` with potential `psi`, clipped to `domain`.
/// Cells of zero area are kept as empty polygons so indices stay aligned.
inline LaguerreDiagram laguerre_diagram(const ConvexPolygon& domain, std::span<const Point2> sites,
                                        const Vector& psi) {
  if (static_cast<std::size_t>(psi.size()) != sites.size())
    throw Error(ErrorCode::InvalidArgument, "geometry", "potential/site size mismatch");
  if (sites.empty()) throw Error(ErrorCode::InvalidArgument, "geometry", "no sites");
  if (!psi.allFinite()) throw Error(ErrorCode::InvalidArgument, "geometry", "non-finite potential");
  const double domain_area = area(domain);
  if (!(domain_area > 0.0))
    throw Error(ErrorCode::InvalidArgument, "geometry", "domain must have positive area");

  const std::size_t n = sites.size();
  LaguerreDiagram d;
  d.domain = domain;
  d.sites.assign(sites.begin(), sites.end());
  d.potential = psi;
  d.density = 1.0 / domain_area;
  d.cells.resize(n);
  d.masses = Vector::Zero(static_cast<Eigen::Index>(n));
  d.first_moments.assign(n, Point2{});

  detail::SiteGrid grid(sites);
  detail::check_distinct(sites, grid);

  double w_max = -INFINITY;
  for (std::size_t j = 0; j < n; ++j) w_max = std::max(w_max, norm2(sites[j]) - 2.0 * psi[j]);

  struct HalfEdge {
    int i, j;
    double length;
  };
  std::vector<HalfEdge> half_edges;
  for (std::size_t i = 0; i < n; ++i) {
    auto cell = detail::build_cell(static_cast<int>(i), domain, sites, psi, grid, w_max);
    const double a = cell.empty() ? 0.0 : signed_area(cell.vertices);
    if (cell.empty() || !(a > 1e-16)) continue;
    const std::size_t m = cell.vertices.size();
    for (std::size_t k = 0; k < m; ++k) {
      if (cell.labels[k] < 0) continue;
      const double len = distance(cell.vertices[k], cell.vertices[(k + 1) % m]);
      const int j = cell.labels[k];
      half_edges.push_back({std::min<int>(static_cast<int>(i), j), std::max<int>(static_cast<int>(i), j), len});
    }
    d.masses[static_cast<Eigen::Index>(i)] = a * d.density;
    d.first_moments[i] = first_moment(cell.vertices) * d.density;
    d.cells[i].vertices = std::move(cell.vertices);
  }

  // Each shared edge is seen from both sides; store the mean so that the
  // map is symmetric by construction.
  std::sort(half_edges.begin(), half_edges.end(), [](const HalfEdge& a, const HalfEdge& b) {
    return std::pair{a.i, a.j} < std::pair{b.i, b.j};
  });
  for (std::size_t k = 0; k < half_edges.size();) {
    std::size_t e = k;
    double total = 0.0;
    while (e < half_edges.size() && half_edges[e].i == half_edges[k].i &&
           half_edges[e].j == half_edges[k].j) {
      total += half_edges[e].length;
      ++e;
    }
    const double len = 0.5 * total;
    if (len > 1e-13) d.interfaces.push_back({half_edges[k].i, half_edges[k].j, len});
    k = e;
  }
  return d;
}

/// Voronoi potential psi_i = |y_i|^2 / 2.
inline Vector voronoi_potential(std::span<const Point2> sites) {
  Vector psi(static_cast<Eigen::Index>(sites.size()));
  for (std::size_t i = 0; i < sites.size(); ++i) psi[static_cast<Eigen::Index>(i)] = 0.5 * norm2(sites[i]);
  return psi;
}

/// Index of the cell containing x: argmax_i <x, y_i> - psi_i (lowest index on
/// ties). Brute force; meant for tests and sampling.
inline int locate(std::span<const Point2> sites, const Vector& psi, const Point2& x) {
  int best = 0;
  double bv = -INFINITY;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const double v = dot(x, sites[i]) - psi[static_cast<Eigen::Index>(i)];
    if (v > bv) {
      bv = v;
      best = static_cast<int>(i);
    }
  }
  return best;
}

struct Overlap {
  int i = 0;
  int j = 0;
  double mass = 0.0;
};

inline bool same_domain(const ConvexPolygon& a, const ConvexPolygon& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (distance(a[k], b[k]) > kTolGeo) return false;
  return true;
}

/// rho-area of V_i(a) ∩ V_j(b) for every overlapping pair, sorted by (i, j).
inline std::vector<Overlap> diagram_overlay(const LaguerreDiagram& a, const LaguerreDiagram& b) {
  if (!same_domain(a.domain, b.domain))
    throw Error(ErrorCode::DomainMismatch, "geometry", "overlay of diagrams on different domains");
  std::vector<BoundingBox> boxes_b(b.cells.size());
  for (std::size_t j = 0; j < b.cells.size(); ++j) boxes_b[j] = bounding_box(b.cells[j]);

  // Sweep over x: order b-cells by their left edge.
  std::vector<int> order;
  for (std::size_t j = 0; j < b.cells.size(); ++j)
    if (!b.cells[j].empty()) order.push_back(static_cast<int>(j));
  std::sort(order.begin(), order.end(), [&](int p, int q) { return boxes_b[p].lo.x < boxes_b[q].lo.x; });
  std::vector<double> left(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) left[k] = boxes_b[order[k]].lo.x;

  std::vector<Overlap> out;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    const auto& ca = a.cells[i];
    if (ca.empty()) continue;
    const auto ba = bounding_box(ca);
    const auto end = std::upper_bound(left.begin(), left.end(), ba.hi.x) - left.begin();
    std::vector<Overlap> row;
    for (std::ptrdiff_t k = 0; k < end; ++k) {
      const int j = order[static_cast<std::size_t>(k)];
      if (!boxes_b[j].overlaps(ba)) continue;
      const auto piece = detail::intersect_raw(ca, b.cells[j]);
      const double ar = area(piece);
      if (ar > 0.0) row.push_back({static_cast<int>(i), j, ar * a.density});
    }
    std::sort(row.begin(), row.end(), [](const Overlap& p, const Overlap& q) { return p.j < q.j; });
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

struct GridOverlap {
  int cell = 0;
  int s = 0;  ///< column, x in [s/m, (s+1)/m)
  int t = 0;  ///< row, y in [t/m, (t+1)/m)
  double mass = 0.0;
};

/// rho-area of V_i ∩ X_{s,t} for the m x m grid of the unit square.
inline std::vector<GridOverlap> grid_overlay(const LaguerreDiagram& diag, int m) {
  if (m <= 0) throw Error(ErrorCode::InvalidArgument, "geometry", "grid resolution must be positive");
  if (!is_unit_square(diag.domain))
    throw Error(ErrorCode::UnsupportedDomain, "geometry", "grid overlay requires the unit square");
  std::vector<GridOverlap> out;
  const double h = 1.0 / m;
  auto cell_index = [&](double v) { return std::clamp(static_cast<int>(std::floor(v * m)), 0, m - 1); };
  for (std::size_t i = 0; i < diag.cells.size(); ++i) {
    const auto& c = diag.cells[i];
    if (c.empty()) continue;
    const auto box = bounding_box(c);
    const int s0 = cell_index(box.lo.x), s1 = cell_index(box.hi.x);
    for (int s = s0; s <= s1; ++s) {
      auto strip = detail::labeled(c);
      if (s > s0) detail::clip_in_place(strip, {-1, 0}, -s * h, -1);
      if (s < s1) detail::clip_in_place(strip, {1, 0}, (s + 1) * h, -1);
      if (strip.empty()) continue;
      const auto sb = bounding_box(strip.vertices);
      const int t0 = cell_index(sb.lo.y), t1 = cell_index(sb.hi.y);
      for (int t = t0; t <= t1; ++t) {
        auto piece = strip;
        if (t > t0) detail::clip_in_place(piece, {0, -1}, -t * h, -1);
        if (t < t1) detail::clip_in_place(piece, {0, 1}, (t + 1) * h, -1);
        if (piece.empty()) continue;
        const double ar = signed_area(piece.vertices);
        if (ar > 0.0) out.push_back({static_cast<int>(i), s, t, ar * diag.density});
      }
    }
  }
  return out;
}

}  // namespace monge
