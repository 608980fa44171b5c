#pragma once

// Desk-scale experiments on the Monge embedding: random point-cloud
// families, prescribed Brenier maps, distance scatters, sampling curves,
// the antipodal-Dirac rate, stability trends, the regular-measure bound,
// barycenter grids and k-means++ clustering of embeddings.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "monge/embedding.hpp"
#include "monge/error.hpp"
#include "monge/metrics.hpp"
#include "monge/parallel.hpp"
#include "monge/solver.hpp"

namespace monge {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Random families

enum class Family { Gaussian, Mixture4, Uniform };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::Mixture4: return "mixture4";
    case Family::Uniform: return "uniform";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  if (s == "gaussian") return Family::Gaussian;
  if (s == "mixture4") return Family::Mixture4;
  if (s == "uniform") return Family::Uniform;
  throw Error(ErrorCode::InvalidArgument, "experiments", "unknown family '" + s + "'");
}

/// A family kind plus the seed that draws its random parameters.
struct FamilySpec {
  Family kind = Family::Gaussian;
  std::uint64_t seed = 0;
};

/// Isotropic Gaussian components; empty for the uniform family.
struct FamilyParams {
  std::vector<Point2> means;
  std::vector<double> stds;
};

/// Means ~ U[0.25, 0.75]^2, standard deviations ~ U[0.05, 0.15].
inline FamilyParams family_params(const FamilySpec& spec) {
  FamilyParams p;
  const int k = spec.kind == Family::Gaussian ? 1 : spec.kind == Family::Mixture4 ? 4 : 0;
  std::mt19937_64 rng(mix64(spec.seed));
  std::uniform_real_distribution<double> um(0.25, 0.75), us(0.05, 0.15);
  for (int c = 0; c < k; ++c) {
    const double x = um(rng), y = um(rng);
    p.means.push_back({x, y});
    p.stds.push_back(us(rng));
  }
  return p;
}

/// n points with weights 1/n; samples falling outside [0,1]^2 are redrawn.
inline DiscreteMeasure sample_family(const FamilySpec& spec, int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "experiments", "n must be >= 1");
  const auto params = family_params(spec);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, params.means.empty() ? 0 : params.means.size() - 1);
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(n));
  while (pts.size() < static_cast<std::size_t>(n)) {
    Point2 p;
    if (params.means.empty()) {
      p = {u(rng), u(rng)};
    } else {
      const std::size_t c = pick(rng);
      const double a = nd(rng), b = nd(rng);
      p = params.means[c] + params.stds[c] * Point2{a, b};
    }
    if (p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0) pts.push_back(p);
  }
  return merge_coincident(uniform_measure(std::move(pts)));
}

inline json to_json(const FamilySpec& s) { return {{"kind", to_string(s.kind)}, {"seed", s.seed}}; }

// ---------------------------------------------------------------------------
// Prescribed Brenier maps

enum class PrescribedMap { Disk, Cross, Square };

inline std::string to_string(PrescribedMap m) {
  switch (m) {
    case PrescribedMap::Disk: return "disk";
    case PrescribedMap::Cross: return "cross";
    case PrescribedMap::Square: return "square";
  }
  return "?";
}

inline std::optional<PrescribedMap> parse_prescribed(const std::string& s) {
  if (s == "disk") return PrescribedMap::Disk;
  if (s == "cross") return PrescribedMap::Cross;
  if (s == "square") return PrescribedMap::Square;
  return std::nullopt;
}

namespace detail {
inline double pow32(double u) { return std::pow(std::abs(u), 1.5); }
inline double dpow32(double u) { return 1.5 * std::copysign(std::sqrt(std::abs(u)), u); }
inline double sq(double u) { return u * u; }
}  // namespace detail

/// Convex potential phi.
inline double prescribed_potential(PrescribedMap map, const Point2& p) {
  using namespace detail;
  const double x = p.x, y = p.y;
  switch (map) {
    case PrescribedMap::Disk: return 0.25 * (x + y) + 0.07 * (pow32(x + y) + pow32(x - y));
    case PrescribedMap::Cross: {
      const double common = 0.5 * sq(2 * x - 1) + 0.5 * sq(2 * y - 1);
      return 0.5 * (x + y) + 0.04 * std::max(4 * sq(x + y - 1) + common, 4 * sq(x - y) + common);
    }
    case PrescribedMap::Square: return 0.5 * (x * x + y * y);
  }
  return 0.0;
}

/// grad phi. On the tie set of the cross potential the first branch is used.
inline Point2 prescribed_gradient(PrescribedMap map, const Point2& p) {
  using namespace detail;
  const double x = p.x, y = p.y;
  switch (map) {
    case PrescribedMap::Disk: {
      const double a = dpow32(x + y), b = dpow32(x - y);
      return {0.25 + 0.07 * (a + b), 0.25 + 0.07 * (a - b)};
    }
    case PrescribedMap::Cross: {
      const double gx = 2 * (2 * x - 1), gy = 2 * (2 * y - 1);
      if (sq(x + y - 1) >= sq(x - y)) {
        const double d = 8 * (x + y - 1);
        return {0.5 + 0.04 * (d + gx), 0.5 + 0.04 * (d + gy)};
      }
      const double d = 8 * (x - y);
      return {0.5 + 0.04 * (d + gx), 0.5 + 0.04 * (-d + gy)};
    }
    case PrescribedMap::Square: return p;
  }
  return p;
}

/// Pushes the n_grid x n_grid cell centres of [0,1]^2 through grad phi.
inline DiscreteMeasure prescribed_target(PrescribedMap map, int n_grid) {
  if (n_grid < 2) throw Error(ErrorCode::InvalidArgument, "experiments", "n_grid must be >= 2");
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(n_grid) * n_grid);
  for (int a = 0; a < n_grid; ++a)
    for (int b = 0; b < n_grid; ++b)
      pts.push_back(prescribed_gradient(map, {(a + 0.5) / n_grid, (b + 0.5) / n_grid}));
  return merge_coincident(uniform_measure(std::move(pts)));
}

namespace detail {

// 8-point Gauss-Legendre on [-1, 1].
inline constexpr std::array<double, 8> kGaussX{-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                               -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                               0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGaussW{0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                               0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                               0.2223810344533745, 0.1012285362903763};

template <class F>
double integrate(F&& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double s = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double c = a + (k + 0.5) * h;
    for (std::size_t q = 0; q < kGaussX.size(); ++q) s += kGaussW[q] * f(c + 0.5 * h * kGaussX[q]);
  }
  return 0.5 * h * s;
}

}  // namespace detail

/// Exact grid projection of grad phi: the cell mean m^2 \int_{X_{s,t}} grad phi,
/// reduced by the divergence theorem to 1-d integrals of phi along cell edges.
inline VectorizedEmbedding prescribed_embedding(PrescribedMap map, int m, int panels = 8) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "experiments", "m must be >= 1");
  VectorizedEmbedding v{m, std::vector<Point2>(static_cast<std::size_t>(m) * m)};
  const double h = 1.0 / m;
  for (int s = 0; s < m; ++s)
    for (int t = 0; t < m; ++t) {
      const double x0 = s * h, x1 = (s + 1) * h, y0 = t * h, y1 = (t + 1) * h;
      if (map == PrescribedMap::Square) {
        v.at(s, t) = {0.5 * (x0 + x1), 0.5 * (y0 + y1)};
        continue;
      }
      auto phi = [&](double x, double y) { return prescribed_potential(map, {x, y}); };
      const double gx = detail::integrate([&](double y) { return phi(x1, y) - phi(x0, y); }, y0, y1, panels);
      const double gy = detail::integrate([&](double x) { return phi(x, y1) - phi(x, y0); }, x0, x1, panels);
      v.at(s, t) = {gx / (h * h), gy / (h * h)};
    }
  return v;
}

// ---------------------------------------------------------------------------
// Records

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// One experiment run: configuration echo, a numeric table and named checks.
struct ExperimentRecord {
  std::string id;
  json config;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  json summary = json::object();
  std::vector<Check> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
  void check(std::string name, bool ok, std::string detail = {}) {
    checks.push_back({std::move(name), ok, std::move(detail)});
  }
};

inline json solve_config_json(const SolveConfig& c) {
  return {{"tol_residual", c.tol_residual},
          {"max_newton_iters", c.max_newton_iters},
          {"max_damping_halvings", c.max_damping_halvings}};
}

inline std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

/// Hölder fit that records a failed check instead of throwing on degenerate data.
inline std::optional<RegressionFit> try_fit(ExperimentRecord& rec, const std::string& name,
                                            const std::vector<std::pair<double, double>>& pairs) {
  std::vector<std::pair<double, double>> pos;
  for (const auto& p : pairs)
    if (p.first > 0.0 && p.second > 0.0) pos.push_back(p);
  try {
    auto f = holder_fit(pos);
    rec.summary[name] = {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}, {"count", f.count}};
    return f;
  } catch (const Error& e) {
    rec.summary[name] = {{"error", e.what()}};
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Distance scatter

struct ScatterConfig {
  Family family = Family::Gaussian;
  int clouds = 20;
  int n_points = 150;
  int m = 64;
  std::uint64_t seed = 0;
  bool with_sinkhorn = false;
  SolveConfig solve;
};

inline json to_json(const ScatterConfig& c) {
  return {{"family", to_string(c.family)}, {"clouds", c.clouds},     {"n_points", c.n_points},
          {"m", c.m},                      {"seed", c.seed},         {"with_sinkhorn", c.with_sinkhorn},
          {"solve", solve_config_json(c.solve)}};
}

/// All pairs of clouds: exact W_2, W_{2,rho} on the grid, exact
/// ||T_mu - T_nu||, and the reverse-Lipschitz flag W_2 <= ||T_mu - T_nu||.
inline ExperimentRecord distance_scatter(const ScatterConfig& cfg) {
  if (cfg.clouds < 2) throw Error(ErrorCode::InvalidArgument, "experiments", "need at least 2 clouds");
  ExperimentRecord rec;
  rec.id = "scatter";
  rec.config = to_json(cfg);
  const auto nc = static_cast<std::size_t>(cfg.clouds);
  std::vector<DiscreteMeasure> measures(nc);
  std::vector<MongeMap> maps(nc);
  std::vector<VectorizedEmbedding> embs(nc);
  parallel_for(nc, [&](std::size_t c) {
    FamilySpec spec{cfg.family, item_seed(cfg.seed, c, 1)};
    measures[c] = sample_family(spec, cfg.n_points, item_seed(cfg.seed, c, 2));
    maps[c] = monge_map(unit_square(), measures[c], cfg.solve);
    embs[c] = vectorize(maps[c], cfg.m);
  });

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < nc; ++a)
    for (std::size_t b = a + 1; b < nc; ++b) pairs.emplace_back(a, b);
  rec.columns = {"i", "j", "w2", "w2rho", "map_l2", "sinkhorn", "reverse_ok", "reverse_grid_ok"};
  rec.rows.assign(pairs.size(), {});
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [a, b] = pairs[k];
    const double w2 = wasserstein(measures[a], measures[b], 2);
    const double w2rho = vector_distance(embs[a], embs[b]);
    const double ex = exact_l2_distance(maps[a], maps[b]);
    const double sk = cfg.with_sinkhorn ? sinkhorn(measures[a], measures[b]).distance : NAN;
    rec.rows[k] = {static_cast<double>(a), static_cast<double>(b), w2, w2rho, ex, sk,
                   w2 <= ex + 1e-6 ? 1.0 : 0.0, w2 <= w2rho + 1e-6 ? 1.0 : 0.0};
  });

  std::size_t ok = 0, grid_ok = 0;
  std::vector<std::pair<double, double>> fit_pairs;
  for (const auto& r : rec.rows) {
    ok += r[6] > 0.5;
    grid_ok += r[7] > 0.5;
    fit_pairs.emplace_back(r[2], r[3]);
  }
  const double compliance = static_cast<double>(ok) / static_cast<double>(rec.rows.size());
  rec.summary["reverse_lipschitz_compliance"] = compliance;
  rec.summary["reverse_lipschitz_grid_compliance"] = static_cast<double>(grid_ok) / static_cast<double>(rec.rows.size());
  rec.check("reverse_lipschitz", ok == rec.rows.size(),
            std::to_string(ok) + "/" + std::to_string(rec.rows.size()) + " pairs with W2 <= ||T_mu - T_nu|| + 1e-6");
  auto fit = try_fit(rec, "fit_w2rho_vs_w2", fit_pairs);
  rec.check("scatter_slope_window", fit && fit->slope >= 2.0 / 15.0 && fit->slope <= 1.0,
            fit ? "slope " + fmt_double(fit->slope) + " in [2/15, 1]" : "fit failed");
  return rec;
}

// ---------------------------------------------------------------------------
// Sampling curves

/// What the empirical measures are drawn from.
struct SamplingTarget {
  enum class Kind { Prescribed, Family, Measure } kind = Kind::Prescribed;
  PrescribedMap map = PrescribedMap::Square;
  FamilySpec family;
  DiscreteMeasure measure;

  static SamplingTarget prescribed(PrescribedMap m) { return {Kind::Prescribed, m, {}, {}}; }
  static SamplingTarget from_family(FamilySpec f) { return {Kind::Family, {}, f, {}}; }
  static SamplingTarget from_measure(DiscreteMeasure m) { return {Kind::Measure, {}, {}, std::move(m)}; }

  std::string name() const {
    switch (kind) {
      case Kind::Prescribed: return to_string(map);
      case Kind::Family: return to_string(family.kind);
      case Kind::Measure: return "measure";
    }
    return "?";
  }
};

struct SamplingConfig {
  std::vector<int> Ns{50, 100, 200, 400, 800};
  int repeats = 10;
  int m = 64;
  int reference_size = 2000;  ///< M for targets without an exact reference
  std::uint64_t seed = 0;
  SolveConfig solve;
};

inline json to_json(const SamplingConfig& c) {
  return {{"Ns", c.Ns},   {"repeats", c.repeats}, {"m", c.m}, {"reference_size", c.reference_size},
          {"seed", c.seed}, {"solve", solve_config_json(c.solve)}};
}

namespace detail {

/// n i.i.d. draws from the target, merged at exact coincidences.
inline DiscreteMeasure draw_empirical(const SamplingTarget& target, int n, std::uint64_t seed) {
  switch (target.kind) {
    case SamplingTarget::Kind::Prescribed: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<Point2> pts(static_cast<std::size_t>(n));
      for (auto& p : pts) {
        const double x = u(rng), y = u(rng);
        p = prescribed_gradient(target.map, {x, y});
      }
      return merge_coincident(uniform_measure(std::move(pts)));
    }
    case SamplingTarget::Kind::Family: return sample_family(target.family, n, seed);
    case SamplingTarget::Kind::Measure: {
      std::mt19937_64 rng(seed);
      std::discrete_distribution<std::size_t> pick(target.measure.weights.data(),
                                                   target.measure.weights.data() + target.measure.weights.size());
      std::vector<Point2> pts(static_cast<std::size_t>(n));
      for (auto& p : pts) p = target.measure.points[pick(rng)];
      return merge_coincident(uniform_measure(std::move(pts)));
    }
  }
  return {};
}

}  // namespace detail

/// ||T_mu - T_{mu_N}|| measured on the grid, for each N and repeat.
inline ExperimentRecord sampling_curve(const SamplingTarget& target, const SamplingConfig& cfg) {
  for (std::size_t k = 0; k < cfg.Ns.size(); ++k) {
    if (cfg.Ns[k] < 1) throw Error(ErrorCode::InvalidArgument, "experiments", "Ns must be positive");
    if (k > 0 && cfg.Ns[k] <= cfg.Ns[k - 1])
      throw Error(ErrorCode::InvalidArgument, "experiments", "Ns must be increasing");
  }
  if (cfg.repeats < 1) throw Error(ErrorCode::InvalidArgument, "experiments", "repeats must be >= 1");
  ExperimentRecord rec;
  rec.id = "sampling";
  rec.config = to_json(cfg);
  rec.config["target"] = target.name();
  if (target.kind == SamplingTarget::Kind::Family) rec.config["family"] = to_json(target.family);

  VectorizedEmbedding reference;
  switch (target.kind) {
    case SamplingTarget::Kind::Prescribed: reference = prescribed_embedding(target.map, cfg.m); break;
    case SamplingTarget::Kind::Family: {
      auto ref = detail::draw_empirical(target, cfg.reference_size, item_seed(cfg.seed, 0, 7));
      reference = vectorize(monge_map(unit_square(), ref, cfg.solve), cfg.m);
      break;
    }
    case SamplingTarget::Kind::Measure:
      reference = vectorize(monge_map(unit_square(), target.measure, cfg.solve), cfg.m);
      break;
  }

  const std::size_t nN = cfg.Ns.size(), reps = static_cast<std::size_t>(cfg.repeats);
  rec.columns = {"N", "repeat", "distance"};
  rec.rows.assign(nN * reps, {});
  parallel_for(nN * reps, [&](std::size_t item) {
    const std::size_t k = item / reps, r = item % reps;
    const int n = cfg.Ns[k];
    auto mu = detail::draw_empirical(target, n, item_seed(cfg.seed, item, 3));
    auto emb = vectorize(monge_map(unit_square(), mu, cfg.solve), cfg.m);
    rec.rows[item] = {static_cast<double>(n), static_cast<double>(r), vector_distance(emb, reference)};
  });

  std::vector<double> ns, means;
  json per_n = json::array();
  bool positive = true;
  for (std::size_t k = 0; k < nN; ++k) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const double d = rec.rows[k * reps + r][2];
      s += d;
      s2 += d * d;
    }
    const double mean = s / static_cast<double>(reps);
    const double var = reps > 1 ? std::max(0.0, (s2 - s * mean) / static_cast<double>(reps - 1)) : 0.0;
    per_n.push_back({{"N", cfg.Ns[k]}, {"mean", mean}, {"std", std::sqrt(var)}});
    ns.push_back(cfg.Ns[k]);
    means.push_back(mean);
    positive = positive && mean > 0.0;
  }
  rec.summary["per_N"] = per_n;
  const double rho = nN >= 2 ? spearman(ns, means) : 0.0;
  rec.summary["spearman"] = rho;
  rec.check("sampling_mean_positive", positive);
  rec.check("sampling_spearman_decreasing", nN >= 2 && rho < 0.0, "Spearman rho " + fmt_double(rho));
  return rec;
}

// ---------------------------------------------------------------------------
// Antipodal Diracs on the disc

struct OnehalfConfig {
  int k_gon = 256;
  std::vector<double> thetas{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
  double tol_disc = 1e-2;
  SolveConfig solve;
};

inline json to_json(const OnehalfConfig& c) {
  return {{"k_gon", c.k_gon}, {"thetas", c.thetas}, {"tol_disc", c.tol_disc}, {"solve", solve_config_json(c.solve)}};
}

/// mu_theta = (delta_{x_theta} + delta_{-x_theta}) / 2 with x_theta on the unit circle.
inline DiscreteMeasure antipodal_pair(double theta) {
  const Point2 x{std::cos(theta), std::sin(theta)};
  return uniform_measure({x, -1.0 * x});
}

inline ExperimentRecord onehalf_experiment(const OnehalfConfig& cfg) {
  if (cfg.k_gon < 64) throw Error(ErrorCode::InvalidArgument, "experiments", "k_gon must be >= 64");
  for (double t : cfg.thetas)
    if (!(t >= 0.0 && t <= std::numbers::pi / 2 + 1e-12))
      throw Error(ErrorCode::InvalidArgument, "experiments", "thetas must lie in [0, pi/2]");
  ExperimentRecord rec;
  rec.id = "onehalf";
  rec.config = to_json(cfg);
  const auto disc = regular_polygon_disc(cfg.k_gon);
  const auto mu0 = antipodal_pair(0.0);
  const auto t0 = monge_map(disc, mu0, cfg.solve);
  rec.columns = {"theta", "w2", "map_l2", "map_l2_sq", "lower_bound", "ok"};
  rec.rows.assign(cfg.thetas.size(), {});
  parallel_for(cfg.thetas.size(), [&](std::size_t k) {
    const double th = cfg.thetas[k];
    const auto mu = antipodal_pair(th);
    const double w2 = wasserstein(mu0, mu, 2);
    const double d = th == 0.0 ? 0.0 : exact_l2_distance(t0, monge_map(disc, mu, cfg.solve));
    const double lb = th / std::numbers::pi - cfg.tol_disc;
    rec.rows[k] = {th, w2, d, d * d, lb, d * d >= lb && w2 <= th + 1e-12 ? 1.0 : 0.0};
  });
  bool bound = true, w2_ok = true;
  std::vector<std::pair<double, double>> pairs;
  for (const auto& r : rec.rows) {
    bound = bound && r[3] >= r[4];
    w2_ok = w2_ok && r[1] <= r[0] + 1e-12;
    pairs.emplace_back(r[1], r[2]);
  }
  rec.check("onehalf_lower_bound", bound, "||T_theta - T_0||^2 >= theta/pi - " + fmt_double(cfg.tol_disc));
  rec.check("onehalf_w2_le_theta", w2_ok);
  auto fit = try_fit(rec, "fit_map_vs_w2", pairs);
  rec.check("onehalf_slope_window", fit && fit->slope >= 0.4 && fit->slope <= 0.6,
            fit ? "slope " + fmt_double(fit->slope) + " in [0.4, 0.6]" : "fit failed");
  return rec;
}

// ---------------------------------------------------------------------------
// Stability of dual potentials and maps

struct StabilityConfig {
  int n = 50;
  int trials = 3;
  int steps = 10;
  double t_min = 1e-3;
  std::vector<int> poincare_sizes{10, 50, 200};
  int brunn_minkowski_triples = 50;
  double poincare_stability_ratio = 4.0;  ///< max/min of the fitted constant across sizes
  std::uint64_t seed = 0;
  SolveConfig solve{1e-12, 100, 40};
};

inline json to_json(const StabilityConfig& c) {
  return {{"n", c.n},
          {"trials", c.trials},
          {"steps", c.steps},
          {"t_min", c.t_min},
          {"poincare_sizes", c.poincare_sizes},
          {"brunn_minkowski_triples", c.brunn_minkowski_triples},
          {"poincare_stability_ratio", c.poincare_stability_ratio},
          {"seed", c.seed},
          {"solve", solve_config_json(c.solve)}};
}

/// Geometric grid t_min, ..., 1 with `steps` points.
inline std::vector<double> geometric_steps(double t_min, int steps) {
  std::vector<double> ts;
  for (int k = 0; k < steps; ++k)
    ts.push_back(steps == 1 ? 1.0 : t_min * std::pow(1.0 / t_min, static_cast<double>(k) / (steps - 1)));
  return ts;
}

/// Largest value of Var_G(v) / (-<DG v, v>) over non-constant v.
inline double poincare_ratio(const LaguerreDiagram& d) {
  const auto n = static_cast<Eigen::Index>(d.size());
  if (n < 2) return 0.0;
  const Eigen::MatrixXd lap = -Eigen::MatrixXd(hessian(d));
  Eigen::MatrixXd var = Eigen::MatrixXd(d.masses.asDiagonal()) - d.masses * d.masses.transpose();
  // Both forms vanish on constants; pinning the last coordinate picks a complement.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(var.topLeftCorner(n - 1, n - 1),
                                                               lap.topLeftCorner(n - 1, n - 1));
  if (es.info() != Eigen::Success) throw Error(ErrorCode::LinearSolveFailed, "experiments", "eigensolver failed");
  return es.eigenvalues().maxCoeff();
}

inline ExperimentRecord stability_suite(const StabilityConfig& cfg) {
  if (cfg.n < 2 || cfg.trials < 1 || cfg.steps < 3)
    throw Error(ErrorCode::InvalidArgument, "experiments", "need n >= 2, trials >= 1, steps >= 3");
  ExperimentRecord rec;
  rec.id = "stability";
  rec.config = to_json(cfg);
  rec.columns = {"trial", "t", "tv", "w1", "potential_l2_sq", "map_l2"};
  const auto ts = geometric_steps(cfg.t_min, cfg.steps);
  const std::size_t per = ts.size() + 1;
  const auto trials = static_cast<std::size_t>(cfg.trials);
  rec.rows.assign(trials * per, {});
  std::vector<std::pair<Vector, Vector>> endpoints(trials);
  std::vector<std::vector<Point2>> supports(trials);

  parallel_for(trials, [&](std::size_t tr) {
    std::mt19937_64 rng(item_seed(cfg.seed, tr, 11));
    std::uniform_real_distribution<double> u(0.0, 1.0), uw(0.1, 1.0);
    std::vector<Point2> sites(static_cast<std::size_t>(cfg.n));
    for (auto& p : sites) p = {u(rng), u(rng)};
    std::vector<double> w0(sites.size()), w1(sites.size());
    for (auto& w : w0) w = uw(rng);
    for (auto& w : w1) w = uw(rng);
    const auto mu0 = make_measure(sites, w0), mu1 = make_measure(sites, w1);
    const auto s0 = solve_semidiscrete(unit_square(), mu0, cfg.solve);
    const MongeMap t0{s0.diagram, mu0.weights, s0.iterations, s0.final_residual};
    supports[tr] = sites;
    for (std::size_t k = 0; k < per; ++k) {
      const double t = k == 0 ? 0.0 : ts[k - 1];
      DiscreteMeasure mt = mu0;
      if (t > 0.0) {
        mt.weights = (1.0 - t) * mu0.weights + t * mu1.weights;
        mt.weights /= mt.weights.sum();
      }
      const auto st = solve_semidiscrete(unit_square(), mt, cfg.solve);
      const MongeMap tt{st.diagram, mt.weights, st.iterations, st.final_residual};
      const Vector dpsi = st.potential - s0.potential;
      const double lhs = dpsi.array().square().matrix().dot(s0.diagram.masses + st.diagram.masses);
      rec.rows[tr * per + k] = {static_cast<double>(tr), t, tv_distance(mu0, mt), wasserstein(mu0, mt, 1), lhs,
                                exact_l2_distance(t0, tt)};
      if (k + 1 == per) endpoints[tr] = {s0.potential, st.potential};
    }
  });

  // Exponent fits per trial; the reported value is the minimum over trials.
  struct FitSpec {
    const char* name;
    std::size_t x, y;
    double exponent;
    double slack;
  };
  const std::array<FitSpec, 4> fits{{{"potential_vs_tv", 2, 4, 1.0, 0.02},
                                     {"potential_vs_w1", 3, 4, 2.0 / 3.0, 0.05},
                                     {"map_vs_tv", 2, 5, 1.0 / 5.0, 0.02},
                                     {"map_vs_w1", 3, 5, 2.0 / 15.0, 0.02}}};
  bool zero_ok = true, vanishing = true;
  for (std::size_t tr = 0; tr < trials; ++tr) {
    const auto& r0 = rec.rows[tr * per];
    zero_ok = zero_ok && r0[4] == 0.0 && r0[5] <= 1e-9;
    vanishing = vanishing && rec.rows[tr * per + 1][4] < rec.rows[tr * per + per - 1][4];
  }
  rec.check("stability_identity_zero", zero_ok, "mu^0 = mu^1 gives zero potential and map differences");
  rec.check("stability_lhs_vanishes", vanishing, "LHS at smallest separation below LHS at t = 1");
  for (const auto& f : fits) {
    double worst = INFINITY;
    bool ok = true;
    for (std::size_t tr = 0; tr < trials; ++tr) {
      std::vector<std::pair<double, double>> pairs;
      for (std::size_t k = 1; k < per; ++k) pairs.emplace_back(rec.rows[tr * per + k][f.x], rec.rows[tr * per + k][f.y]);
      ExperimentRecord scratch;
      auto fit = try_fit(scratch, f.name, pairs);
      if (!fit) {
        ok = false;
        continue;
      }
      worst = std::min(worst, fit->slope);
    }
    rec.summary[std::string("min_slope_") + f.name] = worst;
    rec.check(std::string("stability_") + f.name, ok && worst >= f.exponent - f.slack,
              "min slope " + fmt_double(worst) + " >= " + fmt_double(f.exponent) + " - " + fmt_double(f.slack));
  }

  // Brunn-Minkowski interpolation along psi^t = (1-t) psi^0 + t psi^1.
  {
    std::size_t violations = 0, total = 0;
    const auto count = static_cast<std::size_t>(cfg.brunn_minkowski_triples);
    std::vector<std::size_t> bad(count, 0);
    parallel_for(count, [&](std::size_t q) {
      std::mt19937_64 rng(item_seed(cfg.seed, q, 12));
      const std::size_t tr = q % trials;
      const auto& [p0, p1] = endpoints[tr];
      const double t = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      const auto& sites = supports[tr];
      const Vector g0 = laguerre_diagram(unit_square(), sites, p0).masses;
      const Vector g1 = laguerre_diagram(unit_square(), sites, p1).masses;
      const Vector gt = laguerre_diagram(unit_square(), sites, (1 - t) * p0 + t * p1).masses;
      std::size_t b = 0;
      for (Eigen::Index i = 0; i < gt.size(); ++i)
        b += std::sqrt(gt[i]) < (1 - t) * std::sqrt(g0[i]) + t * std::sqrt(g1[i]) - 1e-8;
      const double dt = (gt - g0).lpNorm<1>();
      b += dt > (g1 - g0).lpNorm<1>() + 1e-8;
      b += dt > 2.0 * (1.0 - (1 - t) * (1 - t)) + 1e-8;
      bad[q] = b;
    });
    for (auto b : bad) violations += b;
    total = count;
    rec.summary["brunn_minkowski"] = {{"triples", total}, {"violations", violations}};
    rec.check("brunn_minkowski", violations == 0,
              std::to_string(violations) + " violations over " + std::to_string(total) + " triples");
  }

  // Discrete Poincaré-Wirtinger: PSD, kernel, constant across sizes.
  {
    const auto ns = cfg.poincare_sizes;
    std::vector<json> per_size(ns.size());
    std::vector<double> constants(ns.size(), NAN);
    std::vector<int> psd_ok(ns.size(), 0), kernel_ok(ns.size(), 0);
    parallel_for(ns.size(), [&](std::size_t k) {
      std::mt19937_64 rng(item_seed(cfg.seed, k, 13));
      std::uniform_real_distribution<double> u(0.0, 1.0), uw(0.1, 1.0);
      std::vector<Point2> sites(static_cast<std::size_t>(ns[k]));
      for (auto& p : sites) p = {u(rng), u(rng)};
      std::vector<double> w(sites.size());
      for (auto& x : w) x = uw(rng);
      const auto mu = make_measure(sites, w);
      const auto sol = solve_semidiscrete(unit_square(), mu, cfg.solve);
      const auto& d = sol.diagram;
      const Eigen::MatrixXd lap = -Eigen::MatrixXd(hessian(d));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
      const auto ev = es.eigenvalues();
      const Eigen::VectorXd k0 = es.eigenvectors().col(0);
      const double n = static_cast<double>(sites.size());
      kernel_ok[k] = std::abs(ev[0]) <= 1e-10 && ev.size() > 1 && ev[1] > 1e-8 &&
                     std::abs(std::abs(k0.sum()) / std::sqrt(n) - 1.0) <= 1e-8;
      std::normal_distribution<double> nd;
      bool psd = true;
      for (int r = 0; r < 20; ++r) {
        Vector v(static_cast<Eigen::Index>(sites.size()));
        for (auto& x : v) x = nd(rng);
        psd = psd && v.dot(lap * v) >= -1e-10;
      }
      psd_ok[k] = psd && ev[0] >= -1e-10;
      const double ratio = poincare_ratio(d);
      const double scale = diameter(sites) * std::pow(diameter(unit_square()), 3);
      constants[k] = ratio / scale;
      per_size[k] = {{"n", ns[k]}, {"ratio", ratio}, {"fitted_C2", constants[k]},
                     {"lambda_min", ev[0]}, {"lambda_2", ev.size() > 1 ? ev[1] : 0.0}};
    });
    rec.summary["poincare"] = per_size;
    const bool psd = std::all_of(psd_ok.begin(), psd_ok.end(), [](int x) { return x != 0; });
    const bool kernel = std::all_of(kernel_ok.begin(), kernel_ok.end(), [](int x) { return x != 0; });
    const auto [lo, hi] = std::minmax_element(constants.begin(), constants.end());
    const bool finite = std::all_of(constants.begin(), constants.end(), [](double c) { return std::isfinite(c) && c > 0; });
    const double spread = finite ? *hi / *lo : INFINITY;
    rec.check("poincare_psd", psd, "-<DG v, v> >= -1e-10");
    rec.check("poincare_kernel_constants", kernel);
    rec.check("poincare_constant_stable", finite && spread <= cfg.poincare_stability_ratio,
              "max/min fitted C(2) = " + fmt_double(spread));
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Regular-measure bound

struct RegularBoundConfig {
  int n_grid = 32;
  int perturbations = 20;
  int atoms = 100;
  double slack = 0.25;
  std::uint64_t seed = 0;
  SolveConfig solve;
};

inline json to_json(const RegularBoundConfig& c) {
  return {{"n_grid", c.n_grid}, {"perturbations", c.perturbations}, {"atoms", c.atoms},
          {"slack", c.slack},   {"seed", c.seed},                   {"solve", solve_config_json(c.solve)}};
}

/// ||T_mu - T_nu|| <= 2 sqrt(M_X K) W_1(mu, nu)^{1/2} (1 + slack) with mu a
/// fine grid (T_mu close to the identity, K = 1) and M_X = sqrt(2).
inline ExperimentRecord regular_bound_check(const RegularBoundConfig& cfg) {
  if (cfg.n_grid < 2 || cfg.perturbations < 0 || cfg.atoms < 1)
    throw Error(ErrorCode::InvalidArgument, "experiments", "bad regular-bound configuration");
  ExperimentRecord rec;
  rec.id = "regular_bound";
  rec.config = to_json(cfg);
  const double mx = max_radius(unit_square());
  rec.config["M_X"] = mx;
  const auto mu = prescribed_target(PrescribedMap::Square, cfg.n_grid);
  const auto tmu = monge_map(unit_square(), mu, cfg.solve);
  // Items: 0 = mu itself, 1 = mu translated by (0.01, 0), then random targets.
  const std::size_t items = static_cast<std::size_t>(cfg.perturbations) + 2;
  rec.columns = {"item", "w1", "map_l2", "bound", "ok"};
  rec.rows.assign(items, {});
  parallel_for(items, [&](std::size_t k) {
    DiscreteMeasure nu;
    if (k == 0) {
      nu = mu;
    } else if (k == 1) {
      nu = mu;
      for (auto& p : nu.points) p += Point2{0.01, 0.0};
    } else {
      std::mt19937_64 rng(item_seed(cfg.seed, k, 21));
      std::uniform_real_distribution<double> u(0.0, 1.0), uw(0.1, 1.0);
      std::vector<Point2> pts(static_cast<std::size_t>(cfg.atoms));
      std::vector<double> w(pts.size());
      for (auto& p : pts) p = {u(rng), u(rng)};
      for (auto& x : w) x = uw(rng);
      nu = make_measure(pts, w);
    }
    const double w1 = wasserstein(mu, nu, 1);
    const double d = k == 0 ? 0.0 : exact_l2_distance(tmu, monge_map(unit_square(), nu, cfg.solve));
    const double bound = 2.0 * std::sqrt(mx) * std::sqrt(w1) * (1.0 + cfg.slack);
    rec.rows[k] = {static_cast<double>(k), w1, d, bound, d <= bound + 1e-12 ? 1.0 : 0.0};
  });
  std::size_t ok = 0;
  for (const auto& r : rec.rows) ok += r[4] > 0.5;
  rec.check("regular_bound", ok == items, std::to_string(ok) + "/" + std::to_string(items) + " targets within bound");
  return rec;
}

// ---------------------------------------------------------------------------
// Barycenter grid

struct BarycenterConfig {
  int k = 5;
  int m = 64;
  SolveConfig solve;
};

inline json to_json(const BarycenterConfig& c) {
  return {{"k", c.k}, {"m", c.m}, {"solve", solve_config_json(c.solve)}};
}

/// Bilinear corner weights at (a, b) in [0,1]^2, corners ordered
/// (0,0), (1,0), (0,1), (1,1).
inline std::array<double, 4> bilinear_weights(double a, double b) {
  return {(1 - a) * (1 - b), a * (1 - b), (1 - a) * b, a * b};
}

/// Rows: (a_index, b_index, x, y, weight) for every atom of every grid cell.
inline ExperimentRecord barycenter_grid(std::span<const DiscreteMeasure> corners, const BarycenterConfig& cfg) {
  if (corners.size() != 4) throw Error(ErrorCode::InvalidArgument, "experiments", "need exactly 4 corner measures");
  if (cfg.k < 2 || cfg.m < 1) throw Error(ErrorCode::InvalidArgument, "experiments", "need k >= 2 and m >= 1");
  ExperimentRecord rec;
  rec.id = "barycenter";
  rec.config = to_json(cfg);
  std::vector<VectorizedEmbedding> embs(4);
  parallel_for(4, [&](std::size_t c) { embs[c] = vectorize(monge_map(unit_square(), corners[c], cfg.solve), cfg.m); });
  const auto k = static_cast<std::size_t>(cfg.k);
  std::vector<DiscreteMeasure> cells(k * k);
  parallel_for(k * k, [&](std::size_t q) {
    const double a = static_cast<double>(q / k) / (cfg.k - 1), b = static_cast<double>(q % k) / (cfg.k - 1);
    const auto lam = bilinear_weights(a, b);
    cells[q] = pushforward_measure(barycenter_embedding(embs, lam));
  });
  rec.columns = {"a_index", "b_index", "x", "y", "weight"};
  for (std::size_t q = 0; q < k * k; ++q)
    for (std::size_t i = 0; i < cells[q].size(); ++i)
      rec.rows.push_back({static_cast<double>(q / k), static_cast<double>(q % k), cells[q].points[i].x,
                          cells[q].points[i].y, cells[q].weights[static_cast<Eigen::Index>(i)]});
  // Corner cells reproduce the corner pushforwards.
  bool corner_ok = true;
  const std::array<std::size_t, 4> corner_cells{0, (k - 1) * k, k - 1, k * k - 1};
  for (std::size_t c = 0; c < 4; ++c) {
    const auto expect = pushforward_measure(embs[c]);
    const auto& got = cells[corner_cells[c]];
    corner_ok = corner_ok && expect.size() == got.size() && expect.points == got.points;
  }
  rec.check("barycenter_corner_weights", corner_ok);
  return rec;
}

// ---------------------------------------------------------------------------
// k-means++ on embeddings

struct ClusterResult {
  std::vector<int> assignments;
  std::vector<VectorizedEmbedding> centroids;
  std::vector<double> inertia_history;  ///< after seeding, then after each Lloyd update
  int iterations = 0;
  bool inertia_monotone = true;
};

inline double squared_distance(const VectorizedEmbedding& a, const VectorizedEmbedding& b) {
  const double d = vector_distance(a, b);
  return d * d;
}

/// k-means with k-means++ seeding under the vector_distance norm. Empty
/// clusters keep their previous centroid.
inline ClusterResult kmeanspp_cluster(std::span<const VectorizedEmbedding> embeddings, int k, std::uint64_t seed,
                                      int max_iters = 100) {
  const auto n = embeddings.size();
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw Error(ErrorCode::BadK, "experiments", "k must lie in [1, " + std::to_string(n) + "]");
  for (const auto& e : embeddings)
    if (e.m != embeddings.front().m) throw Error(ErrorCode::ResolutionMismatch, "experiments", "grid resolutions differ");
  std::mt19937_64 rng(seed);
  ClusterResult res;
  std::vector<std::size_t> chosen{std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)};
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(embeddings[i], embeddings[chosen[0]]);
  while (chosen.size() < static_cast<std::size_t>(k)) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t next = 0;
    if (total > 0.0) {
      next = std::discrete_distribution<std::size_t>(d2.begin(), d2.end())(rng);
    } else {
      // All remaining points coincide with a centre; take the first unchosen.
      while (std::find(chosen.begin(), chosen.end(), next) != chosen.end()) ++next;
    }
    chosen.push_back(next);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(embeddings[i], embeddings[next]));
  }
  for (auto c : chosen) res.centroids.push_back(embeddings[c]);

  auto assign = [&](std::vector<int>& a) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = INFINITY;
      int arg = 0;
      for (int c = 0; c < k; ++c) {
        const double d = squared_distance(embeddings[i], res.centroids[static_cast<std::size_t>(c)]);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      a[i] = arg;
      inertia += best;
    }
    return inertia;
  };
  auto inertia_of = [&](const std::vector<int>& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += squared_distance(embeddings[i], res.centroids[static_cast<std::size_t>(a[i])]);
    return s;
  };

  res.assignments.assign(n, -1);
  res.inertia_history.push_back(assign(res.assignments));
  for (int it = 0; it < max_iters; ++it) {
    for (int c = 0; c < k; ++c) {
      std::vector<VectorizedEmbedding> members;
      for (std::size_t i = 0; i < n; ++i)
        if (res.assignments[i] == c) members.push_back(embeddings[i]);
      if (members.empty()) continue;
      std::vector<double> lam(members.size(), 1.0 / static_cast<double>(members.size()));
      res.centroids[static_cast<std::size_t>(c)] = barycenter_embedding(members, lam);
    }
    res.inertia_history.push_back(inertia_of(res.assignments));
    ++res.iterations;
    std::vector<int> next(n);
    const double after = assign(next);
    if (after > res.inertia_history.back()) res.inertia_monotone = false;
    if (next == res.assignments) break;
    res.assignments = std::move(next);
    res.inertia_history.push_back(after);
  }
  for (std::size_t h = 1; h < res.inertia_history.size(); ++h)
    if (res.inertia_history[h] > res.inertia_history[h - 1] * (1 + 1e-12) + 1e-15) res.inertia_monotone = false;
  return res;
}

}  // namespace monge
