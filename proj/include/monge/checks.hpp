#pragma once

// Property suite aggregating the invariants of every module. Each entry
// returns a named pass/fail line; exceptions count as failures.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "monge/embedding.hpp"
#include "monge/experiments.hpp"
#include "monge/io.hpp"
#include "monge/metrics.hpp"
#include "monge/solver.hpp"

namespace monge {

struct SuiteConfig {
  std::uint64_t seed = 0;
  double tol = 1e-9;
  int m = 32;
};

namespace detail {

inline std::vector<Point2> uniform_sites(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point2> s(static_cast<std::size_t>(n));
  for (auto& p : s) p = {u(rng), u(rng)};
  return s;
}

inline DiscreteMeasure random_weighted(std::mt19937_64& rng, int n) {
  auto pts = uniform_sites(rng, n);
  std::uniform_real_distribution<double> uw(0.1, 1.0);
  std::vector<double> w(pts.size());
  for (auto& x : w) x = uw(rng);
  return make_measure(std::move(pts), w);
}

/// Voronoi potential plus noise, shrunk until every cell has positive mass.
inline Vector splus_potential(std::mt19937_64& rng, std::span<const Point2> sites, double spread) {
  for (;;) {
    std::uniform_real_distribution<double> u(-spread, spread);
    Vector psi = voronoi_potential(sites);
    for (auto& x : psi) x += u(rng);
    if (laguerre_diagram(unit_square(), sites, psi).min_mass() > 1e-8) return psi;
    spread *= 0.7;
  }
}

}  // namespace detail

inline std::vector<Check> run_invariant_suite(const SuiteConfig& cfg = {}) {
  std::vector<Check> out;
  auto run = [&](const std::string& name, const std::function<std::string()>& body) {
    try {
      const std::string failure = body();
      out.push_back({name, failure.empty(), failure});
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  };
  auto rng_for = [&](std::uint64_t stream) { return std::mt19937_64(item_seed(cfg.seed, 0, stream)); };
  const ConvexPolygon X = unit_square();
  SolveConfig solve;
  solve.tol_residual = cfg.tol;

  // geometry
  run("geometry.partition_of_unity", [&]() -> std::string {
    auto rng = rng_for(1);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int k = 0; k < 30; ++k) {
      const auto sites = detail::uniform_sites(rng, 2 + k * 5);
      Vector psi = voronoi_potential(sites);
      for (auto& x : psi) x += u(rng);
      const double s = laguerre_diagram(X, sites, psi).masses.sum();
      if (std::abs(s - 1.0) > kTolGeo) return "sum of masses " + format_double(s);
    }
    return {};
  });
  run("geometry.cell_convexity", [&]() -> std::string {
    auto rng = rng_for(2);
    for (int k = 0; k < 10; ++k) {
      const auto sites = detail::uniform_sites(rng, 50);
      const auto d = laguerre_diagram(X, sites, detail::splus_potential(rng, sites, 0.05));
      for (const auto& c : d.cells)
        if (!c.empty() && min_turn(c) < -kTolGeo) return "non-convex cell";
    }
    return {};
  });
  run("geometry.interface_symmetry", [&]() -> std::string {
    auto rng = rng_for(3);
    const auto sites = detail::uniform_sites(rng, 80);
    const auto d = laguerre_diagram(X, sites, detail::splus_potential(rng, sites, 0.05));
    for (const auto& f : d.interfaces)
      if (d.interface_length(f.i, f.j) != d.interface_length(f.j, f.i)) return "asymmetric interface";
    return {};
  });
  run("geometry.constant_shift_invariance", [&]() -> std::string {
    auto rng = rng_for(4);
    const auto sites = detail::uniform_sites(rng, 40);
    const Vector psi = detail::splus_potential(rng, sites, 0.05);
    const auto a = laguerre_diagram(X, sites, psi);
    const auto b = laguerre_diagram(X, sites, (psi.array() + 3.25).matrix());
    if ((a.masses - b.masses).cwiseAbs().maxCoeff() > 1e-12) return "masses changed under a constant shift";
    return {};
  });
  run("geometry.voronoi_reduction", [&]() -> std::string {
    auto rng = rng_for(5);
    const auto sites = detail::uniform_sites(rng, 60);
    const auto d = laguerre_diagram(X, sites, voronoi_potential(sites));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 2000; ++k) {
      const Point2 x{u(rng), u(rng)};
      std::size_t best = 0;
      for (std::size_t i = 1; i < sites.size(); ++i)
        if (distance(x, sites[i]) < distance(x, sites[best])) best = i;
      if (!contains(d.cells[best], x, 1e-9)) return "sample not in the cell of its nearest site";
    }
    return {};
  });

  // solver
  run("solver.gradient_correctness", [&]() -> std::string {
    auto rng = rng_for(6);
    for (int k = 0; k < 5; ++k) {
      const auto mu = detail::random_weighted(rng, 10);
      const Vector psi = detail::splus_potential(rng, mu.points, 0.03);
      const Vector g = mu.weights - laguerre_diagram(X, mu.points, psi).masses;
      for (Eigen::Index i = 0; i < psi.size(); ++i) {
        Vector p = psi, q = psi;
        p[i] += 1e-6;
        q[i] -= 1e-6;
        const double fd = (kantorovich_value(X, mu, p) - kantorovich_value(X, mu, q)) / 2e-6;
        if (std::abs(fd - g[i]) > 1e-5) return "finite-difference error " + format_double(std::abs(fd - g[i]));
      }
    }
    return {};
  });
  run("solver.constant_shift_invariance", [&]() -> std::string {
    auto rng = rng_for(7);
    const auto mu = detail::random_weighted(rng, 30);
    const Vector psi = detail::splus_potential(rng, mu.points, 0.03);
    const double a = kantorovich_value(X, mu, psi), b = kantorovich_value(X, mu, (psi.array() - 1.5).matrix());
    if (std::abs(a - b) > 1e-12) return "K changed by " + format_double(std::abs(a - b));
    return {};
  });
  run("solver.monotone_damping", [&]() -> std::string {
    auto rng = rng_for(8);
    for (int k = 0; k < 10; ++k) {
      const auto r = solve_semidiscrete(X, detail::random_weighted(rng, 20 + 30 * k), solve);
      for (std::size_t h = 1; h < r.residual_history.size(); ++h) {
        if (!(r.residual_history[h] < r.residual_history[h - 1])) return "residual did not decrease";
        if (r.min_mass_history[h] < r.eps0) return "cell mass fell below eps0";
      }
    }
    return {};
  });
  run("solver.hessian_kernel", [&]() -> std::string {
    auto rng = rng_for(9);
    for (int n : {5, 20, 60}) {
      const auto sites = detail::uniform_sites(rng, n);
      const auto d = laguerre_diagram(X, sites, detail::splus_potential(rng, sites, 0.03));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-Eigen::MatrixXd(hessian(d)));
      const auto ev = es.eigenvalues();
      const Eigen::VectorXd k0 = es.eigenvectors().col(0);
      if (std::abs(ev[0]) > 1e-10 || ev[1] <= 1e-8) return "kernel dimension is not one";
      if (std::abs(std::abs(k0.sum()) / std::sqrt(static_cast<double>(n)) - 1.0) > 1e-8) return "kernel not constant";
    }
    return {};
  });
  run("solver.brunn_minkowski", [&]() -> std::string {
    auto rng = rng_for(10);
    for (int k = 0; k < 10; ++k) {
      const auto sites = detail::uniform_sites(rng, 30);
      const Vector p0 = detail::splus_potential(rng, sites, 0.05), p1 = detail::splus_potential(rng, sites, 0.05);
      const Vector g0 = laguerre_diagram(X, sites, p0).masses, g1 = laguerre_diagram(X, sites, p1).masses;
      for (int j = 1; j <= 9; ++j) {
        const double t = 0.1 * j;
        const Vector gt = laguerre_diagram(X, sites, (1 - t) * p0 + t * p1).masses;
        for (Eigen::Index i = 0; i < gt.size(); ++i)
          if (std::sqrt(gt[i]) < (1 - t) * std::sqrt(g0[i]) + t * std::sqrt(g1[i]) - kTolGeo) return "sqrt-concavity violated";
        const double dt = (gt - g0).lpNorm<1>();
        if (dt > (g1 - g0).lpNorm<1>() + 1e-8 || dt > 2 * (1 - (1 - t) * (1 - t)) + 1e-8) return "l1 bound violated";
      }
    }
    return {};
  });
  run("solver.poincare_wirtinger", [&]() -> std::string {
    auto rng = rng_for(11);
    std::vector<double> constants;
    for (int n : {10, 50, 200}) {
      const auto mu = detail::random_weighted(rng, n);
      const auto d = solve_semidiscrete(X, mu, solve).diagram;
      const Eigen::MatrixXd dg = Eigen::MatrixXd(hessian(d));
      std::normal_distribution<double> nd;
      for (int r = 0; r < 20; ++r) {
        Vector v(n);
        for (auto& x : v) x = nd(rng);
        const double var = v.array().square().matrix().dot(d.masses) - std::pow(v.dot(d.masses), 2);
        if (var < -1e-14 || -v.dot(dg * v) < -1e-10) return "negative variance or Dirichlet form";
      }
      constants.push_back(poincare_ratio(d) / (diameter(mu.points) * std::pow(diameter(X), 3)));
    }
    const auto [lo, hi] = std::minmax_element(constants.begin(), constants.end());
    if (!std::isfinite(*hi) || *hi / *lo > 4.0) return "fitted C(2) unstable: ratio " + format_double(*hi / *lo);
    return {};
  });

  // embedding
  std::vector<DiscreteMeasure> pool;
  std::vector<MongeMap> maps;
  {
    auto rng = rng_for(12);
    for (int k = 0; k < 8; ++k) {
      pool.push_back(detail::random_weighted(rng, 20 + 10 * k));
      maps.push_back(monge_map(X, pool.back(), solve));
    }
  }
  run("embedding.reverse_lipschitz", [&]() -> std::string {
    for (std::size_t a = 0; a < pool.size(); ++a)
      for (std::size_t b = a + 1; b < pool.size(); ++b)
        if (wasserstein(pool[a], pool[b], 2) > exact_l2_distance(maps[a], maps[b]) + 1e-6) return "W2 exceeds map distance";
    return {};
  });
  run("embedding.injectivity", [&]() -> std::string {
    for (std::size_t a = 0; a < pool.size(); ++a) {
      const auto& d = maps[a].diagram;
      const DiscreteMeasure push{d.sites, d.masses};
      if (tv_distance(pool[a], push) > 10 * cfg.tol) return "pushforward of rho differs from mu";
      if (exact_l2_distance(maps[a], maps[a]) > 1e-8) return "self distance not zero";
    }
    return {};
  });
  run("embedding.projection_contraction", [&]() -> std::string {
    for (std::size_t a = 0; a + 1 < pool.size(); ++a) {
      const double ex = exact_l2_distance(maps[a], maps[a + 1]);
      for (int m : {4, 16, cfg.m})
        if (vector_distance(vectorize(maps[a], m), vectorize(maps[a + 1], m)) > ex + 1e-8) return "projection expanded";
    }
    return {};
  });
  run("embedding.refinement_monotonicity", [&]() -> std::string {
    for (std::size_t a = 0; a + 1 < pool.size(); ++a) {
      double prev = 0.0;
      for (int m = 1; m <= 32; m *= 2) {
        const double d = vector_distance(vectorize(maps[a], m), vectorize(maps[a + 1], m));
        if (d < prev - 1e-10) return "distance decreased under refinement";
        prev = d;
      }
    }
    return {};
  });
  run("embedding.dual_potential_bounds", [&]() -> std::string {
    const double mx = max_radius(X);
    for (std::size_t a = 0; a < pool.size(); ++a) {
      const auto& psi = maps[a].potential();
      const auto& y = pool[a].points;
      if (psi.cwiseAbs().maxCoeff() > mx * diameter(y) + 1e-9) return "sup bound violated";
      for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j)
          if (std::abs(psi[i] - psi[j]) > mx * distance(y[i], y[j]) + 1e-9) return "Lipschitz bound violated";
    }
    return {};
  });

  // metrics
  run("metrics.metric_axioms", [&]() -> std::string {
    for (std::size_t a = 0; a + 2 < pool.size(); ++a)
      for (int p : {1, 2}) {
        const auto &u = pool[a], &v = pool[a + 1], &w = pool[a + 2];
        const double uv = wasserstein(u, v, p);
        if (std::abs(uv - wasserstein(v, u, p)) > 1e-8) return "asymmetric";
        if (uv > wasserstein(u, w, p) + wasserstein(w, v, p) + 1e-8) return "triangle inequality violated";
      }
    return {};
  });
  run("metrics.wasserstein_ordering", [&]() -> std::string {
    for (std::size_t a = 0; a + 1 < pool.size(); ++a) {
      const double w1 = wasserstein(pool[a], pool[a + 1], 1), w2 = wasserstein(pool[a], pool[a + 1], 2);
      std::vector<Point2> all = pool[a].points;
      all.insert(all.end(), pool[a + 1].points.begin(), pool[a + 1].points.end());
      if (w1 > w2 + 1e-12 || w2 > std::sqrt(diameter(all) * w1) + 1e-12) return "ordering violated";
    }
    return {};
  });
  run("metrics.w1_duality_spot_check", [&]() -> std::string {
    auto rng = rng_for(13);
    std::uniform_real_distribution<double> u(0.0, 1.0), ua(0.0, 2 * std::numbers::pi);
    for (std::size_t a = 0; a + 1 < pool.size(); ++a) {
      const double w1 = wasserstein(pool[a], pool[a + 1], 1);
      for (int k = 0; k < 50; ++k) {
        const double ang = ua(rng);
        const Point2 dir{std::cos(ang), std::sin(ang)}, c{u(rng), u(rng)};
        auto f = [&](const Point2& x) { return k % 2 ? dot(dir, x) : distance(x, c); };
        double s = 0.0;
        for (std::size_t i = 0; i < pool[a].size(); ++i) s += pool[a].weights[static_cast<Eigen::Index>(i)] * f(pool[a].points[i]);
        for (std::size_t j = 0; j < pool[a + 1].size(); ++j)
          s -= pool[a + 1].weights[static_cast<Eigen::Index>(j)] * f(pool[a + 1].points[j]);
        if (std::abs(s) > w1 + 1e-10) return "dual value exceeds LP value";
      }
    }
    return {};
  });
  run("metrics.sinkhorn_bias_monotone", [&]() -> std::string {
    const double ex = wasserstein(pool[0], pool[1], 2);
    double prev = INFINITY;
    for (double eps : {1e-2, 5e-3, 2e-3}) {
      SinkhornConfig sc;
      sc.epsilon = eps;
      const double gap = std::abs(sinkhorn(pool[0], pool[1], sc).distance - ex);
      if (gap > prev + 1e-9) return "gap grew as epsilon decreased";
      prev = gap;
    }
    return {};
  });

  // experiments
  auto absorb = [&](const ExperimentRecord& rec) {
    for (const auto& c : rec.checks) out.push_back({"experiments." + c.name, c.passed, c.detail});
  };
  run("experiments.determinism", [&]() -> std::string {
    SamplingConfig sc;
    sc.Ns = {20, 40};
    sc.repeats = 2;
    sc.m = 16;
    sc.seed = cfg.seed;
    const auto a = sampling_curve(SamplingTarget::prescribed(PrescribedMap::Cross), sc);
    const auto b = sampling_curve(SamplingTarget::prescribed(PrescribedMap::Cross), sc);
    if (a.rows != b.rows) return "rows differ between identical runs";
    return {};
  });
  run("experiments.suites", [&]() -> std::string {
    ScatterConfig sc;  // keeps its own m = 64
    sc.seed = cfg.seed;
    sc.solve = solve;
    absorb(distance_scatter(sc));
    OnehalfConfig oc;
    oc.solve = solve;
    absorb(onehalf_experiment(oc));
    StabilityConfig st;
    st.seed = cfg.seed;
    absorb(stability_suite(st));
    SamplingConfig sm;
    sm.seed = cfg.seed;
    sm.m = cfg.m;
    sm.solve = solve;
    absorb(sampling_curve(SamplingTarget::prescribed(PrescribedMap::Square), sm));
    RegularBoundConfig rb;
    rb.seed = cfg.seed;
    rb.solve = solve;
    absorb(regular_bound_check(rb));
    return {};
  });

  // cli_io
  run("cli_io.embedding_roundtrip", [&]() -> std::string {
    const auto v = vectorize(maps[0], cfg.m);
    if (!(decode_embedding(encode_embedding(v)) == v)) return "decoded embedding differs";
    return {};
  });
  run("cli_io.pointcloud_roundtrip", [&]() -> std::string {
    const auto back = parse_point_cloud(format_point_cloud(pool[0]));
    if (back.size() != pool[0].size()) return "size changed";
    const auto sorted = merge_coincident(pool[0]);
    for (std::size_t i = 0; i < back.size(); ++i)
      if (distance(back.points[i], sorted.points[i]) > 1e-12 ||
          std::abs(back.weights[static_cast<Eigen::Index>(i)] - sorted.weights[static_cast<Eigen::Index>(i)]) > 1e-12)
        return "values changed";
    return {};
  });
  return out;
}

}  // namespace monge
