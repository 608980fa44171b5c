#pragma once

// The Monge embedding mu -> T_mu, its grid vectorization on the unit square,
// and the distances and barycenters it induces.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "monge/error.hpp"
#include "monge/geometry.hpp"
#include "monge/laguerre.hpp"
#include "monge/solver.hpp"

namespace monge {

/// Piecewise-constant optimal map: sends V_i to diagram.sites[i].
struct MongeMap {
  LaguerreDiagram diagram;
  Vector weights;  ///< target measure weights, aligned with the sites
  int iterations = 0;
  double final_residual = 0.0;

  std::span<const Point2> targets() const { return diagram.sites; }
  const Vector& potential() const { return diagram.potential; }
};

inline MongeMap monge_map(const ConvexPolygon& domain, const DiscreteMeasure& measure,
                          const SolveConfig& config = {}) {
  auto report = solve_semidiscrete(domain, measure, config);
  return {std::move(report.diagram), measure.weights, report.iterations, report.final_residual};
}

/// Evaluates T at x (argmax of <x, y_i> - psi_i).
inline Point2 evaluate(const MongeMap& t, const Point2& x) {
  return t.diagram.sites[static_cast<std::size_t>(locate(t.diagram.sites, t.potential(), x))];
}

/// m x m grid of cell averages m^2 \int_{X_{s,t}} T drho, stored with s
/// (the x index) outermost.
struct VectorizedEmbedding {
  int m = 0;
  std::vector<Point2> values;

  Point2& at(int s, int t) { return values[static_cast<std::size_t>(s) * m + t]; }
  const Point2& at(int s, int t) const { return values[static_cast<std::size_t>(s) * m + t]; }
  friend bool operator==(const VectorizedEmbedding&, const VectorizedEmbedding&) = default;
};

inline VectorizedEmbedding vectorize(const MongeMap& map, int m) {
  const auto pieces = grid_overlay(map.diagram, m);
  VectorizedEmbedding v{m, std::vector<Point2>(static_cast<std::size_t>(m) * m)};
  const double scale = static_cast<double>(m) * m;
  for (const auto& p : pieces) v.at(p.s, p.t) += (scale * p.mass) * map.diagram.sites[static_cast<std::size_t>(p.cell)];
  return v;
}

/// ||T_a - T_b||_{L^2(rho)} computed exactly from the diagram overlay.
inline double exact_l2_distance(const MongeMap& a, const MongeMap& b) {
  double s = 0.0;
  for (const auto& o : diagram_overlay(a.diagram, b.diagram))
    s += o.mass * norm2(a.diagram.sites[static_cast<std::size_t>(o.i)] - b.diagram.sites[static_cast<std::size_t>(o.j)]);
  return std::sqrt(s);
}

/// L^2(rho) norm of the difference of two piecewise-constant grid maps.
inline double vector_distance(const VectorizedEmbedding& a, const VectorizedEmbedding& b) {
  if (a.m != b.m) throw Error(ErrorCode::ResolutionMismatch, "embedding", "grid resolutions differ");
  double s = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) s += norm2(a.values[k] - b.values[k]);
  return std::sqrt(s / (static_cast<double>(a.m) * a.m));
}

/// Weighted average of embeddings; the minimizer of sum_s l_s |. - v_s|^2.
inline VectorizedEmbedding barycenter_embedding(std::span<const VectorizedEmbedding> embeddings,
                                                std::span<const double> lambdas) {
  if (embeddings.empty() || embeddings.size() != lambdas.size())
    throw Error(ErrorCode::BadWeights, "embedding", "need one weight per embedding");
  double total = 0.0;
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw Error(ErrorCode::BadWeights, "embedding", "negative weight");
    total += l;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::BadWeights, "embedding", "weights must sum to 1");
  const int m = embeddings.front().m;
  VectorizedEmbedding out{m, std::vector<Point2>(embeddings.front().values.size())};
  for (std::size_t s = 0; s < embeddings.size(); ++s) {
    if (embeddings[s].m != m) throw Error(ErrorCode::ResolutionMismatch, "embedding", "grid resolutions differ");
    if (lambdas[s] == 0.0) continue;
    for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] += lambdas[s] * embeddings[s].values[k];
  }
  return out;
}

/// Merges atoms closer than `tol` (greedy, in x-sorted order).
inline DiscreteMeasure merge_close_atoms(std::span<const Point2> pts, std::span<const double> w, double tol) {
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::pair{pts[a].x, pts[a].y} < std::pair{pts[b].x, pts[b].y};
  });
  std::vector<Point2> reps;
  std::vector<double> mass;
  for (std::size_t k : order) {
    bool merged = false;
    for (std::size_t r = reps.size(); r-- > 0;) {
      if (pts[k].x - reps[r].x > tol) break;
      if (distance(reps[r], pts[k]) <= tol) {
        mass[r] += w[k];
        merged = true;
        break;
      }
    }
    if (!merged) {
      reps.push_back(pts[k]);
      mass.push_back(w[k]);
    }
  }
  return make_measure(std::move(reps), mass);
}

/// Pushforward of rho by the grid map: sum_{s,t} m^-2 delta_{v[s][t]}, with
/// atoms within 1e-9 merged.
inline DiscreteMeasure pushforward_measure(const VectorizedEmbedding& v, double merge_tol = 1e-9) {
  for (const auto& p : v.values)
    if (!is_finite(p)) throw Error(ErrorCode::InvalidArgument, "embedding", "non-finite embedding value");
  std::vector<double> w(v.values.size(), 1.0 / (static_cast<double>(v.m) * v.m));
  return merge_close_atoms(v.values, w, merge_tol);
}

}  // namespace monge
