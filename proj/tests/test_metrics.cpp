#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "monge/metrics.hpp"
#include "test_support.hpp"

using namespace monge;
using monge::testing::random_measure;

namespace {

/// Brute-force optimal transport cost for tiny uniform-weight problems with
/// equal sizes: by Birkhoff the optimum is attained at a permutation.
double brute_force_uniform(const DiscreteMeasure& a, const DiscreteMeasure& b, int p) {
  std::vector<int> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) c += ground_cost(a.points[i], b.points[static_cast<std::size_t>(perm[i])], p);
    best = std::min(best, c / static_cast<double>(a.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return p == 1 ? best : std::sqrt(best);
}

/// Enumerates vertices of the 2 x n transportation polytope: the row-1 flow
/// is a greedy fill in some column order. Minimizing over all orders covers
/// every basic feasible solution.
double brute_force_two_rows(const DiscreteMeasure& a, const DiscreteMeasure& b, int p) {
  std::vector<int> order(b.size());
  std::iota(order.begin(), order.end(), 0);
  double best = INFINITY;
  do {
    double left = a.weights[0], c = 0.0;
    for (int j : order) {
      const double f = std::min(left, b.weights[j]);
      left -= f;
      c += f * ground_cost(a.points[0], b.points[static_cast<std::size_t>(j)], p) +
           (b.weights[j] - f) * ground_cost(a.points[1], b.points[static_cast<std::size_t>(j)], p);
    }
    best = std::min(best, c);
  } while (std::next_permutation(order.begin(), order.end()));
  return p == 1 ? best : std::sqrt(best);
}

}  // namespace

TEST(Wasserstein, DiracsAndIdentity) {
  auto a = uniform_measure({{0.1, 0.1}});
  auto b = uniform_measure({{0.4, 0.5}});
  EXPECT_NEAR(wasserstein(a, b, 1), 0.5, 1e-15);
  EXPECT_NEAR(wasserstein(a, b, 2), 0.5, 1e-15);
  std::mt19937_64 rng(3);
  auto m = random_measure(rng, 40);
  EXPECT_NEAR(wasserstein(m, m, 2), 0.0, 1e-12);
}

TEST(Wasserstein, TwoByTwoPolytope) {
  auto mu = uniform_measure({{0, 0}, {1, 0}});
  auto nu = uniform_measure({{0, 0}, {0, 1}});
  // Vertices: identity coupling costs 0.5 * sqrt(2); the swap costs 1.
  EXPECT_NEAR(wasserstein(mu, nu, 1), 0.5 * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(brute_force_two_rows(mu, nu, 1), 0.5 * std::sqrt(2.0), 1e-15);
}

TEST(Wasserstein, MatchesPermutationEnumeration) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = uniform_measure(monge::testing::random_sites(rng, 6));
    auto b = uniform_measure(monge::testing::random_sites(rng, 6));
    for (int p : {1, 2}) EXPECT_NEAR(wasserstein(a, b, p), brute_force_uniform(a, b, p), 1e-12);
  }
}

TEST(Wasserstein, MatchesTwoRowVertexEnumeration) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_measure(rng, 2);
    auto b = random_measure(rng, 6);
    for (int p : {1, 2}) EXPECT_NEAR(wasserstein(a, b, p), brute_force_two_rows(a, b, p), 1e-12);
  }
}

TEST(Wasserstein, PlanMarginalsAndCertificate) {
  std::mt19937_64 rng(13);
  for (int n : {10, 100, 400}) {
    auto a = random_measure(rng, n);
    auto b = random_measure(rng, n + 7);
    auto r = wasserstein_exact(a, b, 2);
    EXPECT_LE((r.plan.row_sums() - a.weights).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((r.plan.col_sums() - b.weights).cwiseAbs().maxCoeff(), 1e-12);
    for (const auto& e : r.plan.entries) EXPECT_GE(e.mass, 0.0);
    EXPECT_GE(r.min_reduced_cost, -1e-9);
    EXPECT_LE(r.plan.entries.size(), a.size() + b.size() - 1);
  }
}

TEST(Wasserstein, MetricAxioms) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_measure(rng, 15), b = random_measure(rng, 20), c = random_measure(rng, 25);
    for (int p : {1, 2}) {
      const double ab = wasserstein(a, b, p), ba = wasserstein(b, a, p);
      EXPECT_NEAR(ab, ba, 1e-12);
      EXPECT_LE(ab, wasserstein(a, c, p) + wasserstein(c, b, p) + 1e-12);
    }
    EXPECT_LE(wasserstein(a, b, 1), wasserstein(a, b, 2) + 1e-12);
  }
}

TEST(Wasserstein, SizeLimit) {
  std::vector<Point2> pts(kMaxExactAtoms + 1);
  for (std::size_t k = 0; k < pts.size(); ++k) pts[k] = {static_cast<double>(k) / pts.size(), 0.5};
  auto big = uniform_measure(pts);
  try {
    wasserstein(big, uniform_measure({{0.5, 0.5}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SizeLimit);
  }
}

TEST(Sinkhorn, DiracsAndDiagonalLimit) {
  auto a = uniform_measure({{0.1, 0.1}});
  auto b = uniform_measure({{0.4, 0.5}});
  EXPECT_NEAR(sinkhorn(a, b).distance, 0.5, 1e-12);
  auto g = uniform_measure({{0.2, 0.2}, {0.8, 0.2}, {0.5, 0.9}});
  EXPECT_LT(sinkhorn(g, g).distance, 1e-3);
}

TEST(Sinkhorn, CloseToExactOn50Atoms) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 3; ++trial) {
    auto a = random_measure(rng, 50), b = random_measure(rng, 50);
    const double ex = wasserstein(a, b, 2);
    auto s = sinkhorn(a, b);
    EXPECT_LE(s.marginal_violation, 1e-8);
    EXPECT_NEAR(s.distance, ex, 0.02 * ex);
  }
}

TEST(Sinkhorn, IterationCap) {
  std::mt19937_64 rng(1);
  auto a = random_measure(rng, 30), b = random_measure(rng, 30);
  SinkhornConfig cfg;
  cfg.max_iters = 2;
  cfg.tol_marginal = 1e-15;
  try {
    sinkhorn(a, b, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
  }
}

TEST(TotalVariation, Examples) {
  auto a = uniform_measure({{0, 0}, {1, 1}});
  EXPECT_EQ(tv_distance(a, a), 0.0);
  EXPECT_NEAR(tv_distance(a, uniform_measure({{0.5, 0.5}})), 2.0, 1e-15);
  std::vector<double> w{0.25, 0.75};
  EXPECT_NEAR(tv_distance(a, make_measure({{0, 0}, {1, 1}}, w)), 0.5, 1e-15);
}

TEST(HolderFit, ExactPowerLaws) {
  std::vector<std::pair<double, double>> lin, root;
  for (double x = 1e-3; x <= 1.0; x *= 2) {
    lin.emplace_back(x, x);
    root.emplace_back(x, 3 * std::sqrt(x));
  }
  auto f = holder_fit(lin);
  EXPECT_NEAR(f.slope, 1.0, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  auto g = holder_fit(root);
  EXPECT_NEAR(g.slope, 0.5, 1e-12);
  EXPECT_NEAR(std::exp(g.intercept), 3.0, 1e-10);
}

TEST(HolderFit, Degenerate) {
  std::vector<std::pair<double, double>> narrow{{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}};
  std::vector<std::pair<double, double>> zero{{1e-3, 1.0}, {1.0, 0.0}, {0.1, 1.0}};
  EXPECT_THROW(holder_fit(narrow), Error);
  EXPECT_THROW(holder_fit(zero), Error);
  EXPECT_THROW(holder_fit(std::span<const std::pair<double, double>>{}), Error);
}

TEST(Spearman, RanksWithTies) {
  std::vector<double> v{3, 1, 2, 2};
  auto r = ranks(v);
  EXPECT_EQ(r, (std::vector<double>{4, 1, 2.5, 2.5}));
  std::vector<double> x{1, 2, 3, 4}, y{8, 4, 2, 1};
  EXPECT_NEAR(spearman(x, y), -1.0, 1e-15);
}
