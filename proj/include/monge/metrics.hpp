#pragma once

// Distances between discrete measures (exact W_p, entropic Sinkhorn, total
// variation) and the log-log regression used for empirical Hölder exponents.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "monge/error.hpp"
#include "monge/geometry.hpp"
#include "monge/network_simplex.hpp"
#include "monge/solver.hpp"

namespace monge {

inline constexpr std::size_t kMaxExactAtoms = 2000;

struct PlanEntry {
  int i = 0;
  int j = 0;
  double mass = 0.0;
};

/// Coupling between a row measure and a column measure, stored sparsely.
struct TransportPlan {
  Vector row_marginal;
  Vector col_marginal;
  std::vector<PlanEntry> entries;

  Vector row_sums() const {
    Vector r = Vector::Zero(row_marginal.size());
    for (const auto& e : entries) r[e.i] += e.mass;
    return r;
  }
  Vector col_sums() const {
    Vector c = Vector::Zero(col_marginal.size());
    for (const auto& e : entries) c[e.j] += e.mass;
    return c;
  }
};

struct WassersteinResult {
  double distance = 0.0;
  TransportPlan plan;
  /// min over arcs of the reduced cost; >= -tiny certifies optimality.
  double min_reduced_cost = 0.0;
};

inline double ground_cost(const Point2& a, const Point2& b, int p) {
  return p == 1 ? distance(a, b) : norm2(a - b);
}

/// Exact W_p (p in {1, 2}) by network simplex on the transportation LP.
inline WassersteinResult wasserstein_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p = 2) {
  if (p != 1 && p != 2) throw Error(ErrorCode::InvalidArgument, "metrics", "p must be 1 or 2");
  if (mu.size() > kMaxExactAtoms || nu.size() > kMaxExactAtoms)
    throw Error(ErrorCode::SizeLimit, "metrics",
                "exact solver limited to " + std::to_string(kMaxExactAtoms) + " atoms per measure");
  if (mu.size() == 0 || nu.size() == 0) throw Error(ErrorCode::BadWeights, "metrics", "empty measure");
  const std::size_t n1 = mu.size(), n2 = nu.size();
  std::vector<double> cost(n1 * n2);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) cost[i * n2 + j] = ground_cost(mu.points[i], nu.points[j], p);
  std::vector<double> a(mu.weights.data(), mu.weights.data() + n1);
  std::vector<double> b(nu.weights.data(), nu.weights.data() + n2);
  detail::TransportSimplex ns(a, b, cost);
  if (!ns.run()) throw Error(ErrorCode::NoConvergence, "metrics", "network simplex hit its pivot cap");

  WassersteinResult r;
  r.plan.row_marginal = mu.weights;
  r.plan.col_marginal = nu.weights;
  double total = 0.0;
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      const double f = ns.flow(static_cast<int>(i), static_cast<int>(j));
      if (f > 0.0) {
        r.plan.entries.push_back({static_cast<int>(i), static_cast<int>(j), f});
        total += f * cost[i * n2 + j];
      }
    }
  r.min_reduced_cost = ns.min_reduced_cost();
  r.distance = p == 1 ? total : std::sqrt(std::max(0.0, total));
  return r;
}

inline double wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p = 2) {
  return wasserstein_exact(mu, nu, p).distance;
}

struct SinkhornConfig {
  double epsilon = 2e-3;  ///< 1e-3 * diam([0,1]^2)^2
  int max_iters = 100000;
  double tol_marginal = 1e-8;
};

struct SinkhornResult {
  double distance = 0.0;  ///< sqrt of the transport cost of the entropic plan
  int iterations = 0;
  double marginal_violation = 0.0;
};

namespace detail {
inline double log_sum_exp(std::span<const double> v) {
  const double c = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(c)) return c;
  double s = 0.0;
  for (double x : v) s += std::exp(x - c);
  return c + std::log(s);
}
}  // namespace detail

/// Log-domain Sinkhorn for the squared Euclidean cost. Stops when the l1 row
/// marginal violation (columns are exact after each sweep) is <= tol.
inline SinkhornResult sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                               const SinkhornConfig& cfg = {}) {
  if (!(cfg.epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "metrics", "epsilon must be positive");
  const std::size_t n1 = mu.size(), n2 = nu.size();
  std::vector<double> c(n1 * n2);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) c[i * n2 + j] = norm2(mu.points[i] - nu.points[j]);
  const double eps = cfg.epsilon;
  std::vector<double> f(n1, 0.0), g(n2, 0.0), buf(std::max(n1, n2));
  std::vector<double> log_a(n1), log_b(n2);
  for (std::size_t i = 0; i < n1; ++i) log_a[i] = std::log(mu.weights[static_cast<Eigen::Index>(i)]);
  for (std::size_t j = 0; j < n2; ++j) log_b[j] = std::log(nu.weights[static_cast<Eigen::Index>(j)]);

  SinkhornResult res;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    for (std::size_t i = 0; i < n1; ++i) {
      for (std::size_t j = 0; j < n2; ++j) buf[j] = (g[j] - c[i * n2 + j]) / eps;
      f[i] = eps * (log_a[i] - detail::log_sum_exp({buf.data(), n2}));
    }
    for (std::size_t j = 0; j < n2; ++j) {
      for (std::size_t i = 0; i < n1; ++i) buf[i] = (f[i] - c[i * n2 + j]) / eps;
      g[j] = eps * (log_b[j] - detail::log_sum_exp({buf.data(), n1}));
    }
    double viol = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n2; ++j) row += std::exp((f[i] + g[j] - c[i * n2 + j]) / eps);
      viol += std::abs(row - mu.weights[static_cast<Eigen::Index>(i)]);
    }
    res.iterations = it;
    res.marginal_violation = viol;
    if (viol <= cfg.tol_marginal) {
      double cost = 0.0;
      for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j)
          cost += std::exp((f[i] + g[j] - c[i * n2 + j]) / eps) * c[i * n2 + j];
      res.distance = std::sqrt(std::max(0.0, cost));
      return res;
    }
  }
  throw Error(ErrorCode::NoConvergence, "metrics",
              "Sinkhorn marginal violation " + std::to_string(res.marginal_violation) + " after " +
                  std::to_string(cfg.max_iters) + " iterations");
}

/// sum over the merged support of |mu_i - nu_i| (range [0, 2]).
inline double tv_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  std::map<std::pair<double, double>, double> diff;
  for (std::size_t i = 0; i < mu.size(); ++i)
    diff[{mu.points[i].x, mu.points[i].y}] += mu.weights[static_cast<Eigen::Index>(i)];
  for (std::size_t j = 0; j < nu.size(); ++j)
    diff[{nu.points[j].x, nu.points[j].y}] -= nu.weights[static_cast<Eigen::Index>(j)];
  double s = 0.0;
  for (const auto& [k, v] : diff) s += std::abs(v);
  return s;
}

struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t count = 0;
};

/// Minimum span of the x values, in decades of log10, for a fit to count.
inline constexpr double kMinFitDecades = 0.9;

/// Least-squares fit of log y = slope * log x + intercept.
inline RegressionFit holder_fit(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 3) throw Error(ErrorCode::DegenerateInput, "metrics", "need at least 3 pairs");
  double xmin = INFINITY, xmax = 0.0;
  for (const auto& [x, y] : pairs) {
    if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y))
      throw Error(ErrorCode::DegenerateInput, "metrics", "pairs must be finite and strictly positive");
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
  }
  if (std::log10(xmax / xmin) < kMinFitDecades)
    throw Error(ErrorCode::DegenerateInput, "metrics", "x values span less than one decade");
  const double n = static_cast<double>(pairs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : pairs) {
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    syy += ly * ly;
  }
  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  const double cxy = sxy - sx * sy / n;
  RegressionFit fit;
  fit.count = pairs.size();
  fit.slope = cxy / vx;
  fit.intercept = (sy - fit.slope * sx) / n;
  fit.r2 = vy > 0.0 ? (cxy * cxy) / (vx * vy) : 1.0;
  return fit;
}

/// Fractional ranks (ties averaged), 1-based.
inline std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t k = 0; k < idx.size();) {
    std::size_t e = k;
    while (e + 1 < idx.size() && v[idx[e + 1]] == v[idx[k]]) ++e;
    const double avg = 0.5 * static_cast<double>(k + e) + 1.0;
    for (std::size_t q = k; q <= e; ++q) r[idx[q]] = avg;
    k = e + 1;
  }
  return r;
}

/// Spearman rank correlation.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (rx[k] - mx) * (ry[k] - my);
    sxx += (rx[k] - mx) * (rx[k] - mx);
    syy += (ry[k] - my) * (ry[k] - my);
  }
  return (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 0.0;
}

}  // namespace monge
