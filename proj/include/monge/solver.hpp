#pragma once

// Semi-discrete optimal transport from the uniform density on a convex
// polygon to a finitely supported measure: Kantorovich dual value, mass
// residual, Jacobian of the cell-mass map and a damped Newton solver.

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "monge/error.hpp"
#include "monge/geometry.hpp"
#include "monge/laguerre.hpp"

namespace monge {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Finitely supported probability measure sum_i w_i delta_{y_i}.
struct DiscreteMeasure {
  std::vector<Point2> points;
  Vector weights;

  std::size_t size() const { return points.size(); }
};

/// Builds a measure from raw positive weights, normalizing them to sum 1.
inline DiscreteMeasure make_measure(std::vector<Point2> points, std::span<const double> raw) {
  if (points.size() != raw.size())
    throw Error(ErrorCode::BadWeights, "solver", "points/weights size mismatch");
  if (points.empty()) throw Error(ErrorCode::BadWeights, "solver", "empty measure");
  double total = 0.0;
  for (double w : raw) {
    if (!(w > 0.0) || !std::isfinite(w))
      throw Error(ErrorCode::BadWeights, "solver", "weights must be finite and positive");
    total += w;
  }
  DiscreteMeasure m;
  m.points = std::move(points);
  m.weights.resize(static_cast<Eigen::Index>(raw.size()));
  for (std::size_t k = 0; k < raw.size(); ++k) m.weights[static_cast<Eigen::Index>(k)] = raw[k] / total;
  return m;
}

/// Uniform weights 1/n.
inline DiscreteMeasure uniform_measure(std::vector<Point2> points) {
  std::vector<double> w(points.size(), 1.0);
  return make_measure(std::move(points), w);
}

/// Sums the weights of atoms at identical coordinates. Output is sorted
/// lexicographically.
inline DiscreteMeasure merge_coincident(const DiscreteMeasure& m) {
  std::vector<std::size_t> order(m.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::pair{m.points[a].x, m.points[a].y} < std::pair{m.points[b].x, m.points[b].y};
  });
  std::vector<Point2> pts;
  std::vector<double> w;
  for (std::size_t k : order) {
    if (!pts.empty() && pts.back() == m.points[k]) {
      w.back() += m.weights[static_cast<Eigen::Index>(k)];
    } else {
      pts.push_back(m.points[k]);
      w.push_back(m.weights[static_cast<Eigen::Index>(k)]);
    }
  }
  DiscreteMeasure out;
  out.points = std::move(pts);
  out.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  return out;
}

inline void validate_measure(const DiscreteMeasure& m) {
  if (m.points.empty()) throw Error(ErrorCode::BadWeights, "solver", "empty measure");
  if (static_cast<std::size_t>(m.weights.size()) != m.points.size())
    throw Error(ErrorCode::BadWeights, "solver", "points/weights size mismatch");
  for (Eigen::Index i = 0; i < m.weights.size(); ++i)
    if (!(m.weights[i] > 0.0))
      throw Error(ErrorCode::BadWeights, "solver",
                  "weight " + std::to_string(i) + " is not strictly positive; prune zero-weight atoms");
  if (std::abs(m.weights.sum() - 1.0) > 1e-12)
    throw Error(ErrorCode::BadWeights, "solver", "weights must sum to 1");
}

struct SolveConfig {
  double tol_residual = 1e-9;  ///< target for ||G(psi) - mu||_1
  int max_newton_iters = 100;
  int max_damping_halvings = 40;
};

struct SolveReport {
  Vector potential;  ///< normalized: <psi, G(psi)> = 0
  int iterations = 0;
  std::vector<double> residual_history;
  std::vector<double> min_mass_history;  ///< min_i G_i after each accepted iterate
  double eps0 = 0.0;                     ///< damping floor on cell masses
  double final_residual = 0.0;
  LaguerreDiagram diagram;  ///< at the returned potential
};

/// K(psi) = sum_i \int_{V_i} (<x, y_i> - psi_i) drho + sum_i mu_i psi_i.
inline double kantorovich_value(const LaguerreDiagram& d, const Vector& mu) {
  double k = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    k += dot(d.first_moments[i], d.sites[i]) - d.potential[ii] * d.masses[ii];
  }
  return k + mu.dot(d.potential);
}

inline double kantorovich_value(const ConvexPolygon& domain, const DiscreteMeasure& measure,
                                const Vector& psi) {
  return kantorovich_value(laguerre_diagram(domain, measure.points, psi), measure.weights);
}

/// G(psi) - mu.
inline Vector residual(const ConvexPolygon& domain, const DiscreteMeasure& measure, const Vector& psi) {
  return laguerre_diagram(domain, measure.points, psi).masses - measure.weights;
}

/// Jacobian DG(psi): off-diagonal rho * m_ij / |y_j - y_i|, rows summing to 0.
inline SparseMatrix hessian(const LaguerreDiagram& d) {
  const auto n = static_cast<Eigen::Index>(d.size());
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(d.masses[i] > 0.0))
      throw Error(ErrorCode::NotInSPlus, "solver",
                  "cell " + std::to_string(i) + " has zero mass; the Jacobian is defined on S+ only");
  std::vector<Eigen::Triplet<double>> trip;
  Vector diag = Vector::Zero(n);
  for (const auto& f : d.interfaces) {
    const double h = d.density * f.length / distance(d.sites[f.i], d.sites[f.j]);
    trip.emplace_back(f.i, f.j, h);
    trip.emplace_back(f.j, f.i, h);
    diag[f.i] -= h;
    diag[f.j] -= h;
  }
  for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(i, i, diag[i]);
  SparseMatrix h(n, n);
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

/// psi - <psi, G> / sum(G): shifts by a constant so that <psi, G(psi)> = 0.
inline Vector normalize_potential(const Vector& psi, const Vector& masses) {
  const double total = masses.sum();
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "solver", "total mass must be positive");
  return (psi.array() - psi.dot(masses) / total).matrix();
}

inline Vector normalize_potential(const Vector& psi, const LaguerreDiagram& d) {
  return normalize_potential(psi, d.masses);
}

namespace detail {

/// Solves -DG delta = rhs with delta_{N-1} pinned to 0.
inline Vector newton_direction(const LaguerreDiagram& d, const Vector& rhs) {
  const auto n = static_cast<Eigen::Index>(d.size());
  const Eigen::Index r = n - 1;
  std::vector<Eigen::Triplet<double>> trip;
  Vector diag = Vector::Zero(r);
  for (const auto& f : d.interfaces) {
    const double h = d.density * f.length / distance(d.sites[f.i], d.sites[f.j]);
    if (f.i < r) diag[f.i] += h;
    if (f.j < r) diag[f.j] += h;
    if (f.i < r && f.j < r) {
      trip.emplace_back(f.i, f.j, -h);
      trip.emplace_back(f.j, f.i, -h);
    }
  }
  for (Eigen::Index i = 0; i < r; ++i) trip.emplace_back(i, i, diag[i]);
  SparseMatrix lap(r, r);
  lap.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(lap);
  if (ldlt.info() != Eigen::Success)
    throw Error(ErrorCode::LinearSolveFailed, "solver", "factorization of the reduced Hessian failed");
  if (ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff()))
    throw Error(ErrorCode::LinearSolveFailed, "solver", "reduced Hessian is numerically singular");
  Vector delta = Vector::Zero(n);
  delta.head(r) = ldlt.solve(rhs.head(r));
  if (ldlt.info() != Eigen::Success || !delta.allFinite())
    throw Error(ErrorCode::LinearSolveFailed, "solver", "reduced Hessian solve failed");
  return delta;
}

}  // namespace detail

/// Damped Newton iteration for G(psi) = mu, started from the Voronoi
/// potential. A step tau in {1, 1/2, 1/4, ...} is accepted when every cell
/// keeps mass >= eps0 = min(min G(psi0), min mu) / 2 and the l1 residual
/// drops by a factor (1 - tau/2).
inline SolveReport solve_semidiscrete(const ConvexPolygon& domain, const DiscreteMeasure& measure,
                                      const SolveConfig& config = {}) {
  if (!(config.tol_residual > 0.0))
    throw Error(ErrorCode::InvalidArgument, "solver", "tol_residual must be positive");
  validate_measure(measure);
  const auto& mu = measure.weights;
  const std::size_t n = measure.size();

  SolveReport report;
  Vector psi = voronoi_potential(measure.points);
  LaguerreDiagram diag = laguerre_diagram(domain, measure.points, psi);
  for (std::size_t i = 0; i < n; ++i)
    if (!(diag.masses[static_cast<Eigen::Index>(i)] > 0.0))
      throw Error(ErrorCode::InitializationFailed, "solver",
                  "Voronoi cell of site " + std::to_string(i) + " has zero mass in the domain");

  const double eps0 = 0.5 * std::min(diag.min_mass(), mu.minCoeff());
  double err = (diag.masses - mu).lpNorm<1>();
  report.eps0 = eps0;
  report.residual_history.push_back(err);
  report.min_mass_history.push_back(diag.min_mass());

  int it = 0;
  while (err > config.tol_residual) {
    if (it >= config.max_newton_iters)
      throw Error(ErrorCode::NoConvergence, "solver",
                  "no convergence after " + std::to_string(it) + " Newton iterations (residual " +
                      std::to_string(err) + ")");
    const Vector delta = detail::newton_direction(diag, diag.masses - mu);
    double tau = 1.0;
    bool accepted = false;
    for (int h = 0; h <= config.max_damping_halvings; ++h, tau *= 0.5) {
      Vector trial = psi + tau * delta;
      LaguerreDiagram td = laguerre_diagram(domain, measure.points, trial);
      const double terr = (td.masses - mu).lpNorm<1>();
      if (td.min_mass() >= eps0 && terr <= (1.0 - 0.5 * tau) * err) {
        psi = std::move(trial);
        diag = std::move(td);
        err = terr;
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw Error(ErrorCode::NoConvergence, "solver", "damping exhausted without an acceptable step");
    ++it;
    report.residual_history.push_back(err);
    report.min_mass_history.push_back(diag.min_mass());
  }

  psi = normalize_potential(psi, diag);
  diag.potential = psi;
  report.potential = std::move(psi);
  report.iterations = it;
  report.final_residual = err;
  report.diagram = std::move(diag);
  return report;
}

}  // namespace monge
