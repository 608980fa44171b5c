#pragma once

// The `monge` command line: subcommands for solving, embedding, distances,
// the experiment suites and the invariant check. Exit codes: 0 success,
// 1 computation failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "monge/checks.hpp"
#include "monge/embedding.hpp"
#include "monge/experiments.hpp"
#include "monge/io.hpp"
#include "monge/metrics.hpp"
#include "monge/solver.hpp"

namespace monge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

struct GlobalOptions {
  std::uint64_t seed = 0;
  int m = 64;
  double tol = 1e-9;
  std::string out_dir = ".";
};

inline json global_json(const GlobalOptions& g) {
  return {{"seed", g.seed}, {"m", g.m}, {"tol", g.tol}, {"out_dir", g.out_dir}};
}

inline SolveConfig solve_config(const GlobalOptions& g) {
  SolveConfig c;
  c.tol_residual = g.tol;
  return c;
}

inline bool is_embedding_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::equal(magic, magic + 4, kEmbeddingMagic.begin());
}

/// Loads a PGM image, or point-cloud CSV, by content.
inline DiscreteMeasure load_any_cloud(const fs::path& p, std::optional<double> threshold) {
  const auto bytes = read_file(p);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5'))
    return image_to_pointcloud(parse_pgm(bytes, p.string()), threshold);
  return parse_point_cloud(bytes, {}, p.string());
}

inline int report_checks(const ExperimentRecord& rec, std::ostream& out, std::ostream& err) {
  for (const auto& c : rec.checks)
    out << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  (" + c.detail + ")") << "\n";
  for (const auto& c : rec.checks)
    if (!c.passed) {
      err << "error: experiments: check failed: " << c.name << "\n";
      return kExitFailure;
    }
  return kExitOk;
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

namespace detail {

/// Re-runs a small scatter from its own sidecar and compares the CSV bytes.
/// The scatter's own checks may fail at this size; only the output matters.
inline Check config_echo_check(const GlobalOptions& g) {
  const auto base = fs::temp_directory_path() / ("monge-echo-" + std::to_string(::getpid()));
  const auto first = base / "a", second = base / "b";
  Check c{"cli_io.config_echo", false, {}};
  try {
    std::ostringstream sink;
    const std::vector<std::string> args{"monge", "scatter",  "--clouds", "3",      "--points", "30",
                                        "--m",   "8",        "--seed",   std::to_string(g.seed), "--out-dir",
                                        first.string()};
    if (run_cli(args, sink, sink) == kExitUsage) throw std::runtime_error("first run rejected its arguments");
    const json meta = json::parse(read_file(first / "scatter.json"));
    auto replay = meta.at("argv").get<std::vector<std::string>>();
    for (std::size_t k = 0; k + 1 < replay.size(); ++k)
      if (replay[k] == "--out-dir") replay[k + 1] = second.string();
    if (run_cli(replay, sink, sink) == kExitUsage) throw std::runtime_error("replay rejected its arguments");
    c.passed = read_file(first / "scatter.csv") == read_file(second / "scatter.csv");
    if (!c.passed) c.detail = "replayed CSV differs";
  } catch (const std::exception& e) {
    c.detail = e.what();
  }
  std::error_code ec;
  fs::remove_all(base, ec);
  return c;
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using detail::GlobalOptions;
  CLI::App app{"Semi-discrete optimal transport and the Monge embedding of point clouds", "monge"};
  app.fallthrough();
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--seed", g.seed, "master random seed")->capture_default_str();
  app.add_option("--m", g.m, "grid resolution of the vectorized embedding")->capture_default_str()->check(CLI::Range(1, 4096));
  app.add_option("--tol", g.tol, "Newton tolerance on ||G(psi) - mu||_1")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "directory for CSV/JSON outputs")->capture_default_str();

  // solve
  auto* solve = app.add_subcommand("solve", "solve the semi-discrete problem; writes a potential JSON");
  std::string solve_in, solve_out;
  solve->add_option("points", solve_in, "point-cloud CSV")->required();
  solve->add_option("-o,--output", solve_out, "output path (default <out-dir>/potential.json)");

  // embed
  auto* embed = app.add_subcommand("embed", "vectorize the Monge map; writes an embedding file");
  std::string embed_in, embed_out;
  embed->add_option("points", embed_in, "point-cloud CSV")->required();
  embed->add_option("-o,--output", embed_out, "output path (default <out-dir>/embedding.memb)");

  // dist
  auto* dist = app.add_subcommand("dist", "distance between two embeddings or two point clouds");
  std::string dist_a, dist_b, metric = "w2rho";
  bool exact = false;
  double epsilon = SinkhornConfig{}.epsilon;
  dist->add_option("a", dist_a)->required();
  dist->add_option("b", dist_b)->required();
  dist->add_option("--metric", metric, "w2rho, w2, w1, sinkhorn or tv")
      ->check(CLI::IsMember({"w2rho", "w2", "w1", "sinkhorn", "tv"}))
      ->capture_default_str();
  dist->add_flag("--exact", exact, "w2rho from the exact diagram overlay instead of the grid");
  dist->add_option("--epsilon", epsilon, "Sinkhorn regularization")->capture_default_str();

  // scatter
  auto* scatter = app.add_subcommand("scatter", "W_{2,rho} versus W_2 over pairs of random clouds");
  ScatterConfig sc;
  std::string family = "gaussian";
  scatter->add_option("--family", family)->check(CLI::IsMember({"gaussian", "mixture4", "uniform"}))->capture_default_str();
  scatter->add_option("--clouds", sc.clouds)->capture_default_str()->check(CLI::Range(2, 100000));
  scatter->add_option("--points", sc.n_points)->capture_default_str()->check(CLI::Range(1, 100000));
  scatter->add_flag("--sinkhorn", sc.with_sinkhorn, "also compute the Sinkhorn distance");

  // sampling
  auto* sampling = app.add_subcommand("sampling", "||T_mu - T_{mu_N}|| as a function of N");
  SamplingConfig smc;
  std::string target = "square", target_file;
  sampling->add_option("--target", target, "square, disk, cross, gaussian, mixture4 or uniform")
      ->check(CLI::IsMember({"square", "disk", "cross", "gaussian", "mixture4", "uniform"}))
      ->capture_default_str();
  sampling->add_option("--target-file", target_file, "point-cloud CSV to sample from instead");
  sampling->add_option("--Ns", smc.Ns, "increasing sample sizes")->delimiter(',')->capture_default_str();
  sampling->add_option("--repeats", smc.repeats)->capture_default_str()->check(CLI::Range(1, 100000));
  sampling->add_option("--reference-size", smc.reference_size)->capture_default_str()->check(CLI::Range(1, 1000000));

  // onehalf
  auto* onehalf = app.add_subcommand("onehalf", "antipodal Diracs on the polygonal disc");
  OnehalfConfig oc;
  onehalf->add_option("--k-gon", oc.k_gon)->capture_default_str();
  onehalf->add_option("--thetas", oc.thetas)->delimiter(',')->capture_default_str();

  // stability
  auto* stability = app.add_subcommand("stability", "stability of dual potentials and maps along interpolations");
  StabilityConfig stc;
  stability->add_option("--n", stc.n)->capture_default_str();
  stability->add_option("--trials", stc.trials)->capture_default_str();
  stability->add_option("--steps", stc.steps)->capture_default_str();
  stability->add_option("--t-min", stc.t_min)->capture_default_str();

  // regular-bound
  auto* regular = app.add_subcommand("regular-bound", "bound for a regular reference measure");
  RegularBoundConfig rbc;
  regular->add_option("--n-grid", rbc.n_grid)->capture_default_str();
  regular->add_option("--perturbations", rbc.perturbations)->capture_default_str();
  regular->add_option("--atoms", rbc.atoms)->capture_default_str();
  regular->add_option("--slack", rbc.slack)->capture_default_str();

  // barycenter
  auto* bary = app.add_subcommand("barycenter", "bilinear barycenters of four corner clouds");
  BarycenterConfig bc;
  std::vector<std::string> corners;
  std::string bary_family = "mixture4";
  bary->add_option("--corners", corners, "four point-cloud CSVs (default: random clouds)")->expected(4);
  bary->add_option("--k", bc.k)->capture_default_str();
  bary->add_option("--family", bary_family)->check(CLI::IsMember({"gaussian", "mixture4", "uniform"}))->capture_default_str();
  bary->add_option("--points", sc.n_points, "points per generated corner")->capture_default_str();

  // cluster
  auto* cluster = app.add_subcommand("cluster", "k-means++ on embeddings of images or point clouds");
  std::vector<std::string> cluster_inputs;
  std::string idx_path;
  std::size_t max_records = 1000;
  int k = 20, max_iters = 100;
  std::optional<double> threshold;
  cluster->add_option("inputs", cluster_inputs, "PGM images, point-cloud CSVs, or directories of them");
  cluster->add_option("--idx", idx_path, "IDX image archive");
  cluster->add_option("--max-records", max_records)->capture_default_str();
  cluster->add_option("--k", k)->capture_default_str();
  cluster->add_option("--max-iters", max_iters)->capture_default_str();
  cluster->add_option("--threshold", threshold, "pixel threshold (default half the brightest pixel)");

  // check
  auto* check = app.add_subcommand("check", "run the full invariant suite");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();  // program name
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run 'monge --help' for usage\n";
    return kExitUsage;
  }

  const json extra = {{"argv", args}, {"global", detail::global_json(g)}};
  const fs::path dir = g.out_dir;
  const SolveConfig scfg = detail::solve_config(g);
  try {
    if (*solve) {
      const auto mu = load_point_cloud(solve_in);
      const auto rep = solve_semidiscrete(unit_square(), mu, scfg);
      json j = extra;
      json sites = json::array();
      for (const auto& p : mu.points) sites.push_back({p.x, p.y});
      j["sites"] = sites;
      j["weights"] = std::vector<double>(mu.weights.begin(), mu.weights.end());
      j["potential"] = std::vector<double>(rep.potential.begin(), rep.potential.end());
      j["masses"] = std::vector<double>(rep.diagram.masses.begin(), rep.diagram.masses.end());
      j["final_residual"] = rep.final_residual;
      j["iterations"] = rep.iterations;
      j["solve"] = solve_config_json(scfg);
      const fs::path path = solve_out.empty() ? dir / "potential.json" : fs::path(solve_out);
      write_file_atomic(path, j.dump(2) + "\n");
      out << "solved " << mu.size() << " sites in " << rep.iterations << " Newton iterations, residual "
          << format_double(rep.final_residual) << " -> " << path.string() << "\n";
      return kExitOk;
    }
    if (*embed) {
      const auto mu = load_point_cloud(embed_in);
      const auto map = monge_map(unit_square(), mu, scfg);
      const auto v = vectorize(map, g.m);
      const fs::path path = embed_out.empty() ? dir / "embedding.memb" : fs::path(embed_out);
      save_embedding(path, v);
      json j = extra;
      j["m"] = g.m;
      j["atoms"] = mu.size();
      j["iterations"] = map.iterations;
      j["final_residual"] = map.final_residual;
      fs::path meta = path;
      meta.replace_extension(".json");
      write_file_atomic(meta, j.dump(2) + "\n");
      out << "wrote " << g.m << "x" << g.m << " embedding -> " << path.string() << "\n";
      return kExitOk;
    }
    if (*dist) {
      const bool ea = detail::is_embedding_file(dist_a), eb = detail::is_embedding_file(dist_b);
      double value = 0.0;
      if (ea || eb) {
        if (!(ea && eb)) throw Error(ErrorCode::InvalidArgument, "cli_io", "mix of embedding and point-cloud inputs");
        if (metric != "w2rho" || exact)
          throw Error(ErrorCode::InvalidArgument, "cli_io", "embedding files support only the grid w2rho metric");
        value = vector_distance(load_embedding(dist_a), load_embedding(dist_b));
      } else {
        const auto a = load_point_cloud(dist_a), b = load_point_cloud(dist_b);
        if (metric == "w2rho") {
          const auto ta = monge_map(unit_square(), a, scfg), tb = monge_map(unit_square(), b, scfg);
          value = exact ? exact_l2_distance(ta, tb) : vector_distance(vectorize(ta, g.m), vectorize(tb, g.m));
        } else if (metric == "w2") {
          value = wasserstein(a, b, 2);
        } else if (metric == "w1") {
          value = wasserstein(a, b, 1);
        } else if (metric == "sinkhorn") {
          SinkhornConfig c;
          c.epsilon = epsilon;
          value = sinkhorn(a, b, c).distance;
        } else {
          value = tv_distance(a, b);
        }
      }
      out << format_double(value) << "\n";
      return kExitOk;
    }
    auto finish = [&](const ExperimentRecord& rec) {
      const auto [csv, meta] = write_record(dir, rec, extra);
      out << "wrote " << csv.string() << " and " << meta.string() << "\n";
      return detail::report_checks(rec, out, err);
    };
    if (*scatter) {
      sc.family = parse_family(family);
      sc.m = g.m;
      sc.seed = g.seed;
      sc.solve = scfg;
      return finish(distance_scatter(sc));
    }
    if (*sampling) {
      smc.m = g.m;
      smc.seed = g.seed;
      smc.solve = scfg;
      SamplingTarget t;
      if (!target_file.empty()) {
        t = SamplingTarget::from_measure(load_point_cloud(target_file));
      } else if (auto pm = parse_prescribed(target)) {
        t = SamplingTarget::prescribed(*pm);
      } else {
        t = SamplingTarget::from_family({parse_family(target), item_seed(g.seed, 0, 31)});
      }
      return finish(sampling_curve(t, smc));
    }
    if (*onehalf) {
      oc.solve = scfg;
      return finish(onehalf_experiment(oc));
    }
    if (*stability) {
      stc.seed = g.seed;
      stc.solve.tol_residual = std::min(g.tol, stc.solve.tol_residual);
      return finish(stability_suite(stc));
    }
    if (*regular) {
      rbc.seed = g.seed;
      rbc.solve = scfg;
      return finish(regular_bound_check(rbc));
    }
    if (*bary) {
      bc.m = g.m;
      bc.solve = scfg;
      std::vector<DiscreteMeasure> ms;
      if (!corners.empty()) {
        for (const auto& c : corners) ms.push_back(load_point_cloud(c));
      } else {
        for (std::uint64_t c = 0; c < 4; ++c)
          ms.push_back(sample_family({parse_family(bary_family), item_seed(g.seed, c, 41)}, sc.n_points,
                                     item_seed(g.seed, c, 42)));
      }
      return finish(barycenter_grid(ms, bc));
    }
    if (*cluster) {
      std::vector<DiscreteMeasure> clouds;
      std::vector<std::string> names;
      if (!idx_path.empty()) {
        const auto imgs = load_idx(idx_path, max_records);
        for (std::size_t r = 0; r < imgs.size(); ++r) {
          clouds.push_back(image_to_pointcloud(imgs[r], threshold));
          names.push_back(idx_path + "#" + std::to_string(r));
        }
      }
      for (const auto& in : cluster_inputs) {
        std::vector<fs::path> files;
        if (fs::is_directory(in)) {
          for (const auto& e : fs::directory_iterator(in))
            if (e.is_regular_file()) files.push_back(e.path());
          std::sort(files.begin(), files.end());
        } else {
          files.push_back(in);
        }
        for (const auto& f : files) {
          clouds.push_back(detail::load_any_cloud(f, threshold));
          names.push_back(f.string());
        }
      }
      if (clouds.empty()) throw Error(ErrorCode::InvalidArgument, "cli_io", "no inputs to cluster");
      std::vector<VectorizedEmbedding> embs(clouds.size());
      parallel_for(clouds.size(), [&](std::size_t i) { embs[i] = vectorize(monge_map(unit_square(), clouds[i], scfg), g.m); });
      const auto res = kmeanspp_cluster(embs, k, g.seed, max_iters);
      ExperimentRecord rec;
      rec.id = "cluster";
      rec.config = {{"k", k}, {"max_iters", max_iters}, {"m", g.m}, {"seed", g.seed}, {"inputs", names},
                    {"threshold", threshold ? json(*threshold) : json("half of brightest pixel")},
                    {"pixel_mapping", "x = (col + 0.5) / W, y = 1 - (row + 0.5) / H"}};
      rec.columns = {"item", "cluster"};
      for (std::size_t i = 0; i < res.assignments.size(); ++i)
        rec.rows.push_back({static_cast<double>(i), static_cast<double>(res.assignments[i])});
      rec.summary["inertia_history"] = res.inertia_history;
      rec.summary["iterations"] = res.iterations;
      rec.check("kmeans_inertia_monotone", res.inertia_monotone);
      ExperimentRecord cent;
      cent.id = "cluster_centroids";
      cent.config = rec.config;
      cent.columns = {"cluster", "x", "y", "weight"};
      for (std::size_t c = 0; c < res.centroids.size(); ++c) {
        const auto pf = pushforward_measure(res.centroids[c]);
        for (std::size_t i = 0; i < pf.size(); ++i)
          cent.rows.push_back({static_cast<double>(c), pf.points[i].x, pf.points[i].y, pf.weights[static_cast<Eigen::Index>(i)]});
      }
      write_record(dir, cent, extra);
      return finish(rec);
    }
    if (*check) {
      SuiteConfig suite{g.seed, g.tol, std::min(g.m, 64)};
      auto checks = run_invariant_suite(suite);
      checks.push_back(detail::config_echo_check(g));
      std::size_t width = 0;
      for (const auto& c : checks) width = std::max(width, c.name.size());
      int failed = 0;
      for (const auto& c : checks) {
        out << (c.passed ? "PASS  " : "FAIL  ") << c.name << std::string(width + 2 - c.name.size(), ' ')
            << c.detail << "\n";
        failed += !c.passed;
      }
      out << (checks.size() - static_cast<std::size_t>(failed)) << "/" << checks.size() << " invariants passed\n";
      for (const auto& c : checks)
        if (!c.passed) err << "error: invariant failed: " << c.name << "\n";
      return failed ? kExitFailure : kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace monge
