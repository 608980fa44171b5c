#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "monge/geometry.hpp"
#include "monge/laguerre.hpp"

using namespace monge;

namespace {

std::vector<Point2> random_sites(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point2> s(static_cast<std::size_t>(n));
  for (auto& p : s) p = {u(rng), u(rng)};
  return s;
}

Vector random_potential(std::mt19937_64& rng, std::span<const Point2> sites, double spread) {
  std::uniform_real_distribution<double> u(-spread, spread);
  Vector psi = voronoi_potential(sites);
  for (Eigen::Index i = 0; i < psi.size(); ++i) psi[i] += u(rng);
  return psi;
}

}  // namespace

TEST(ClipHalfplane, AxisAlignedCut) {
  auto r = clip_halfplane(unit_square(), {1, 0}, 0.5);
  EXPECT_NEAR(area(r), 0.5, 1e-15);
  const auto b = bounding_box(r);
  EXPECT_DOUBLE_EQ(b.lo.x, 0.0);
  EXPECT_DOUBLE_EQ(b.hi.x, 0.5);
  EXPECT_DOUBLE_EQ(b.hi.y, 1.0);
}

TEST(ClipHalfplane, NonBindingConstraintKeepsPolygon) {
  auto r = clip_halfplane(unit_square(), {1, 0}, 2.0);
  EXPECT_EQ(r.vertices, unit_square().vertices);
}

TEST(ClipHalfplane, DiagonalCutGivesTriangle) {
  auto r = clip_halfplane(unit_square(), {1, 1}, 0.5);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_NEAR(area(r), 0.125, 1e-15);
  for (const Point2 expected : {Point2{0, 0}, Point2{0.5, 0}, Point2{0, 0.5}}) {
    bool found = false;
    for (const auto& v : r.vertices) found |= distance(v, expected) < 1e-15;
    EXPECT_TRUE(found) << expected.x << "," << expected.y;
  }
}

TEST(ClipHalfplane, ZeroAreaCollapsesToEmpty) {
  EXPECT_TRUE(clip_halfplane(unit_square(), {1, 0}, 0.0).empty());
  EXPECT_TRUE(clip_halfplane(unit_square(), {1, 0}, -1.0).empty());
  EXPECT_TRUE(clip_halfplane(unit_square(), {1, 0}, 1e-12).empty());
}

TEST(ClipHalfplane, RandomCutsStayConvexAndCcw) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    ConvexPolygon p = regular_polygon_disc(12);
    for (int k = 0; k < 5; ++k) {
      p = clip_halfplane(p, {u(rng), u(rng)}, 0.4 * std::abs(u(rng)) + 0.05);
      if (p.empty()) break;
      EXPECT_GT(area(p), 0.0);
      EXPECT_GE(min_turn(p), -kTolGeo);
    }
  }
}

TEST(RegularPolygon, Areas) {
  EXPECT_NEAR(area(regular_polygon_disc(4)), 2.0, 1e-14);
  EXPECT_NEAR(area(regular_polygon_disc(6)), 3.0 * std::sqrt(3.0) / 2.0, 1e-14);
  const int k = 256;
  const double formula = 0.5 * k * std::sin(2.0 * std::numbers::pi / k);
  EXPECT_NEAR(area(regular_polygon_disc(k)), formula, 1e-13);
  EXPECT_LT(std::abs(area(regular_polygon_disc(k)) - std::numbers::pi), 1e-3);
  const auto sq = regular_polygon_disc(4);
  EXPECT_NEAR(sq[1].x, 0.0, 1e-15);
  EXPECT_NEAR(sq[1].y, 1.0, 1e-15);
}

TEST(Laguerre, TwoSiteBisector) {
  const std::vector<Point2> sites{{0.25, 0.5}, {0.75, 0.5}};
  auto d = laguerre_diagram(unit_square(), sites, voronoi_potential(sites));
  EXPECT_NEAR(d.masses[0], 0.5, 1e-15);
  EXPECT_NEAR(d.masses[1], 0.5, 1e-15);
  EXPECT_NEAR(d.interface_length(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(bounding_box(d.cells[0]).hi.x, 0.5, 1e-15);
  EXPECT_NEAR(d.first_moments[0].x, 0.125, 1e-15);
  EXPECT_NEAR(d.first_moments[0].y, 0.25, 1e-15);
}

TEST(Laguerre, ZeroPotentialFavorsLargerInnerProduct) {
  // With psi = 0 the cell of y maximizes <x, y>; on [0,1]^2 the site with the
  // larger x coordinate takes everything.
  const std::vector<Point2> sites{{0.25, 0.5}, {0.75, 0.5}};
  auto d = laguerre_diagram(unit_square(), sites, Vector::Zero(2));
  EXPECT_TRUE(d.cells[0].empty());
  EXPECT_EQ(d.masses[0], 0.0);
  EXPECT_NEAR(d.masses[1], 1.0, 1e-15);
  EXPECT_TRUE(d.interfaces.empty());
}

TEST(Laguerre, SingleSiteOwnsDomain) {
  const std::vector<Point2> sites{{0.3, 0.9}};
  Vector psi(1);
  psi << 17.0;
  auto d = laguerre_diagram(unit_square(), sites, psi);
  EXPECT_NEAR(d.masses[0], 1.0, 1e-15);
  EXPECT_NEAR(area(d.cells[0]), 1.0, 1e-15);
}

TEST(Laguerre, DuplicateSitesRejected) {
  const std::vector<Point2> sites{{0.2, 0.2}, {0.5, 0.5}, {0.2, 0.2 + 1e-13}};
  try {
    laguerre_diagram(unit_square(), sites, Vector::Zero(3));
    FAIL() << "expected DuplicateSites";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateSites);
  }
}

TEST(Laguerre, VoronoiMassesMatchMonteCarlo) {
  std::mt19937_64 rng(2024);
  const auto sites = random_sites(rng, 5);
  auto d = laguerre_diagram(unit_square(), sites, voronoi_potential(sites));

  // Oracle: nearest-site frequencies from 10^6 uniform samples.
  std::vector<double> counts(5, 0.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int samples = 1000000;
  for (int k = 0; k < samples; ++k) {
    const Point2 x{u(rng), u(rng)};
    int best = 0;
    for (int i = 1; i < 5; ++i)
      if (distance(x, sites[i]) < distance(x, sites[best])) best = i;
    counts[best] += 1.0;
  }
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(d.masses[i], counts[i] / samples, 3e-3);
}

TEST(Laguerre, PartitionConvexitySymmetry) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 150);
    const auto sites = random_sites(rng, n);
    const auto psi = random_potential(rng, sites, 0.05);
    auto d = laguerre_diagram(unit_square(), sites, psi);
    EXPECT_NEAR(d.masses.sum(), 1.0, 1e-10);
    double cell_area = 0.0;
    for (const auto& c : d.cells) {
      if (c.empty()) continue;
      EXPECT_GE(min_turn(c), -kTolGeo);
      cell_area += area(c);
    }
    EXPECT_NEAR(cell_area, 1.0, 1e-10);
    for (const auto& f : d.interfaces) {
      EXPECT_LT(f.i, f.j);
      EXPECT_GT(f.length, 0.0);
      EXPECT_EQ(d.interface_length(f.i, f.j), d.interface_length(f.j, f.i));
      EXPECT_GT(d.masses[f.i], 0.0);
      EXPECT_GT(d.masses[f.j], 0.0);
    }
  }
}

TEST(Laguerre, ConstantShiftLeavesCellsUnchanged) {
  std::mt19937_64 rng(5);
  const auto sites = random_sites(rng, 40);
  const auto psi = random_potential(rng, sites, 0.03);
  auto a = laguerre_diagram(unit_square(), sites, psi);
  auto b = laguerre_diagram(unit_square(), sites, (psi.array() + 3.25).matrix());
  for (std::size_t i = 0; i < sites.size(); ++i) EXPECT_NEAR(a.masses[i], b.masses[i], 1e-12);
}

TEST(Laguerre, VoronoiReductionPointwise) {
  std::mt19937_64 rng(99);
  const auto sites = random_sites(rng, 25);
  auto d = laguerre_diagram(unit_square(), sites, voronoi_potential(sites));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const Point2 x{u(rng), u(rng)};
    int nearest = 0;
    for (int i = 1; i < 25; ++i)
      if (distance(x, sites[i]) < distance(x, sites[nearest])) nearest = i;
    EXPECT_TRUE(contains(d.cells[nearest], x, 1e-12));
  }
}

TEST(Laguerre, CellsMatchBruteForceHalfplanes) {
  // The accelerated builder must agree with clipping against every site.
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sites = random_sites(rng, 60);
    const auto psi = random_potential(rng, sites, 0.2);
    auto d = laguerre_diagram(unit_square(), sites, psi);
    for (std::size_t i = 0; i < sites.size(); ++i) {
      auto lp = detail::labeled(unit_square());
      for (std::size_t j = 0; j < sites.size() && !lp.empty(); ++j) {
        if (j == i) continue;
        detail::clip_in_place(lp, sites[j] - sites[i], psi[j] - psi[i], 0);
      }
      EXPECT_NEAR(signed_area(lp.vertices), area(d.cells[i]), 1e-12) << "cell " << i;
    }
  }
}

TEST(Laguerre, DiscDomainCarriesDensity) {
  const auto disc = regular_polygon_disc(64);
  const std::vector<Point2> sites{{1, 0}, {-1, 0}};
  auto d = laguerre_diagram(disc, sites, voronoi_potential(sites));
  EXPECT_NEAR(d.density, 1.0 / area(disc), 1e-15);
  EXPECT_NEAR(d.masses[0], 0.5, 1e-14);
  EXPECT_NEAR(d.masses[1], 0.5, 1e-14);
  EXPECT_NEAR(d.interface_length(0, 1), 2.0, 1e-14);
}

TEST(DiagramOverlay, SelfOverlayIsDiagonal) {
  std::mt19937_64 rng(8);
  const auto sites = random_sites(rng, 30);
  auto d = laguerre_diagram(unit_square(), sites, random_potential(rng, sites, 0.02));
  double total = 0.0;
  std::vector<double> diag(sites.size(), 0.0);
  for (const auto& o : diagram_overlay(d, d)) {
    total += o.mass;
    if (o.i == o.j)
      diag[o.i] += o.mass;
    else
      EXPECT_LT(o.mass, 1e-12);
  }
  EXPECT_NEAR(total, 1.0, 1e-10);
  for (std::size_t i = 0; i < sites.size(); ++i) EXPECT_NEAR(diag[i], d.masses[i], 1e-12);
}

TEST(DiagramOverlay, SingleCellRowEqualsMasses) {
  std::mt19937_64 rng(12);
  const auto sites = random_sites(rng, 17);
  auto b = laguerre_diagram(unit_square(), sites, random_potential(rng, sites, 0.02));
  const std::vector<Point2> one{{0.5, 0.5}};
  auto a = laguerre_diagram(unit_square(), one, Vector::Zero(1));
  std::vector<double> row(sites.size(), 0.0);
  for (const auto& o : diagram_overlay(a, b)) {
    EXPECT_EQ(o.i, 0);
    row[o.j] += o.mass;
  }
  for (std::size_t j = 0; j < sites.size(); ++j) EXPECT_NEAR(row[j], b.masses[j], 1e-13);
}

TEST(DiagramOverlay, TwoSplitsAnalytic) {
  const std::vector<Point2> sa{{0.25, 0.5}, {0.75, 0.5}};
  auto a = laguerre_diagram(unit_square(), sa, voronoi_potential(sa));
  // Split at x = 0.25: psi_2 - psi_1 = 0.5 * 0.25.
  Vector pb(2);
  pb << 0.0, 0.125;
  auto b = laguerre_diagram(unit_square(), sa, pb);
  auto ov = diagram_overlay(a, b);
  ASSERT_EQ(ov.size(), 3u);
  EXPECT_EQ(ov[0].i, 0);
  EXPECT_EQ(ov[0].j, 0);
  EXPECT_NEAR(ov[0].mass, 0.25, 1e-15);
  EXPECT_EQ(ov[1].i, 0);
  EXPECT_EQ(ov[1].j, 1);
  EXPECT_NEAR(ov[1].mass, 0.25, 1e-15);
  EXPECT_EQ(ov[2].i, 1);
  EXPECT_EQ(ov[2].j, 1);
  EXPECT_NEAR(ov[2].mass, 0.5, 1e-15);
}

TEST(DiagramOverlay, DomainMismatch) {
  const std::vector<Point2> s{{0.5, 0.5}};
  auto a = laguerre_diagram(unit_square(), s, Vector::Zero(1));
  auto b = laguerre_diagram(regular_polygon_disc(8), s, Vector::Zero(1));
  try {
    diagram_overlay(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DomainMismatch);
  }
}

TEST(GridOverlay, SingleCell) {
  const std::vector<Point2> s{{0.1, 0.7}};
  auto d = laguerre_diagram(unit_square(), s, Vector::Zero(1));
  auto g = grid_overlay(d, 2);
  ASSERT_EQ(g.size(), 4u);
  for (const auto& e : g) EXPECT_NEAR(e.mass, 0.25, 1e-15);
}

TEST(GridOverlay, AlignedBisector) {
  const std::vector<Point2> s{{0.25, 0.5}, {0.75, 0.5}};
  auto d = laguerre_diagram(unit_square(), s, voronoi_potential(s));
  auto g = grid_overlay(d, 2);
  ASSERT_EQ(g.size(), 4u);
  for (const auto& e : g) {
    EXPECT_NEAR(e.mass, 0.25, 1e-15);
    EXPECT_EQ(e.cell, e.s);
  }
}

TEST(GridOverlay, PartitionOfUnityPerGridCell) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = trial == 0 ? 3 : 2 + static_cast<int>(rng() % 60);
    const int m = trial == 0 ? 4 : 1 + static_cast<int>(rng() % 40);
    const auto sites = random_sites(rng, n);
    auto d = laguerre_diagram(unit_square(), sites, random_potential(rng, sites, 0.02));
    std::vector<double> sums(static_cast<std::size_t>(m) * m, 0.0);
    std::vector<double> per_cell(sites.size(), 0.0);
    for (const auto& e : grid_overlay(d, m)) {
      sums[static_cast<std::size_t>(e.s) * m + e.t] += e.mass;
      per_cell[e.cell] += e.mass;
    }
    for (double s : sums) EXPECT_NEAR(s, 1.0 / (m * m), 1e-10);
    for (std::size_t i = 0; i < sites.size(); ++i) EXPECT_NEAR(per_cell[i], d.masses[i], 1e-10);
  }
}

TEST(GridOverlay, RequiresUnitSquare) {
  const std::vector<Point2> s{{0.0, 0.0}};
  auto d = laguerre_diagram(regular_polygon_disc(16), s, Vector::Zero(1));
  try {
    grid_overlay(d, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedDomain);
  }
}
