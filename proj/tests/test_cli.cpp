#include <gtest/gtest.h>

#include <sstream>

#include "monge/cli.hpp"

namespace monge {
namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "monge");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("monge-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "-" +
            std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string file(const std::string& name, const std::string& content) {
    write_file_atomic(dir_ / name, content);
    return (dir_ / name).string();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, DistTvIdenticalFilesIsZero) {
  const auto a = file("a.csv", "0.2,0.3\n0.6,0.7\n0.9,0.1\n");
  const auto b = file("b.csv", "0.2,0.3\n0.6,0.7\n0.9,0.1\n");
  const auto r = run({"dist", "--metric", "tv", a, b});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "0\n");
}

TEST_F(Cli, DistMetrics) {
  const auto a = file("a.csv", "0.25,0.5\n");
  const auto b = file("b.csv", "0.75,0.5\n");
  for (const std::string metric : {"w1", "w2"}) {
    const auto r = run({"dist", "--metric", metric, a, b});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_DOUBLE_EQ(std::stod(r.out), 0.5) << metric;
  }
  // Single Diracs: T is constant, so the map distance equals the atom distance.
  const auto exact = run({"dist", "--exact", a, b});
  ASSERT_EQ(exact.code, 0) << exact.err;
  EXPECT_NEAR(std::stod(exact.out), 0.5, 1e-12);
  const auto grid = run({"--m", "8", "dist", a, b});
  EXPECT_NEAR(std::stod(grid.out), 0.5, 1e-12);
  const auto tv = run({"dist", "--metric", "tv", a, b});
  EXPECT_EQ(tv.out, "2\n");
  const auto sk = run({"dist", "--metric", "sinkhorn", a, b});
  ASSERT_EQ(sk.code, 0) << sk.err;
  EXPECT_NEAR(std::stod(sk.out), 0.5, 1e-9);
}

TEST_F(Cli, EmbedSingleAtom) {
  const auto a = file("a.csv", "0.3,0.8\n");
  const auto r = run({"--m", "4", "--out-dir", dir_.string(), "embed", a});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto v = load_embedding(path("embedding.memb"));
  ASSERT_EQ(v.m, 4);
  ASSERT_EQ(v.values.size(), 16u);
  for (const auto& p : v.values) {
    EXPECT_NEAR(p.x, 0.3, 1e-12);
    EXPECT_NEAR(p.y, 0.8, 1e-12);
  }
  const auto meta = json::parse(read_file(path("embedding.json")));
  EXPECT_EQ(meta.at("m"), 4);
  EXPECT_EQ(meta.at("argv").at(0), "monge");
}

TEST_F(Cli, EmbeddingDistance) {
  const auto a = file("a.csv", "0.2,0.2\n0.8,0.8\n");
  const auto b = file("b.csv", "0.2,0.8\n0.8,0.2\n");
  ASSERT_EQ(run({"--m", "16", "embed", a, "-o", path("a.memb")}).code, 0);
  ASSERT_EQ(run({"--m", "16", "embed", b, "-o", path("b.memb")}).code, 0);
  const auto files = run({"dist", path("a.memb"), path("b.memb")});
  const auto clouds = run({"--m", "16", "dist", a, b});
  ASSERT_EQ(files.code, 0) << files.err;
  EXPECT_EQ(files.out, clouds.out);
  EXPECT_EQ(run({"dist", path("a.memb"), a}).code, 1);
  EXPECT_EQ(run({"dist", "--metric", "w2", path("a.memb"), path("b.memb")}).code, 1);
}

TEST_F(Cli, SolveWritesPotentialJson) {
  const auto a = file("a.csv", "x,y,w\n0.25,0.5,1\n0.75,0.5,3\n");
  const auto r = run({"--out-dir", dir_.string(), "solve", a});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(read_file(path("potential.json")));
  for (const char* key : {"sites", "weights", "potential", "masses", "final_residual", "iterations", "argv", "solve"})
    EXPECT_TRUE(j.contains(key)) << key;
  const auto psi = j.at("potential").get<std::vector<double>>();
  ASSERT_EQ(psi.size(), 2u);
  EXPECT_NEAR(psi[1] - psi[0], 0.125, 1e-9);
  EXPECT_LE(j.at("final_residual").get<double>(), 1e-9);
  EXPECT_NEAR(j.at("masses").at(1).get<double>(), 0.75, 1e-9);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"dist", "--metric", "w3", "a", "b"}).code, 2);
  EXPECT_EQ(run({"dist", "only-one"}).code, 2);
  EXPECT_EQ(run({"--m", "0", "onehalf"}).code, 2);
  EXPECT_EQ(run({"--tol", "-1", "onehalf"}).code, 2);
  const auto r = run({"scatter", "--clouds", "x"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("usage"), std::string::npos);
}

TEST_F(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("regular-bound"), std::string::npos);
}

TEST_F(Cli, ComputationFailuresExitOneNamingModule) {
  const auto out_of_domain = file("o.csv", "1.5,0.5\n");
  auto r = run({"solve", out_of_domain});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("cli_io: OutOfDomain"), std::string::npos) << r.err;

  r = run({"solve", path("missing.csv")});
  EXPECT_EQ(r.code, 1);

  const auto a = file("a.csv", "0.5,0.5\n");
  r = run({"--out-dir", dir_.string(), "cluster", "--k", "3", a});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("BadK"), std::string::npos) << r.err;
}

TEST_F(Cli, IdenticalSeedsReproduceCsv) {
  const std::vector<std::string> base = {"--m", "16", "scatter", "--clouds", "6", "--points", "30"};
  auto with = [&](const std::string& seed, const std::string& out) {
    auto args = base;
    args.insert(args.begin(), {"--seed", seed, "--out-dir", path(out)});
    return run(args);
  };
  EXPECT_NE(with("5", "a").code, 2);
  EXPECT_NE(with("5", "b").code, 2);
  EXPECT_NE(with("6", "c").code, 2);
  const auto a = read_file(path("a/scatter.csv"));
  EXPECT_EQ(a, read_file(path("b/scatter.csv")));
  EXPECT_NE(a, read_file(path("c/scatter.csv")));
}

TEST_F(Cli, SidecarReplaysBitExactly) {
  const auto target = file("t.csv", "0.2,0.3,1\n0.7,0.6,2\n0.4,0.9,1\n");
  ASSERT_EQ(run({"--seed", "9", "--m", "8", "--out-dir", path("first"), "sampling", "--target-file", target, "--Ns",
                 "5,10,20", "--repeats", "2", "--reference-size", "50"})
                .code,
            0);
  const auto meta = json::parse(read_file(path("first/sampling.json")));
  EXPECT_EQ(meta.at("global").at("seed"), 9);
  auto argv = meta.at("argv").get<std::vector<std::string>>();
  for (std::size_t k = 0; k + 1 < argv.size(); ++k)
    if (argv[k] == "--out-dir") argv[k + 1] = path("second");
  std::ostringstream sink;
  ASSERT_EQ(run_cli(argv, sink, sink), 0);
  EXPECT_EQ(read_file(path("first/sampling.csv")), read_file(path("second/sampling.csv")));
}

TEST_F(Cli, OnehalfPasses) {
  const auto r = run({"--out-dir", dir_.string(), "onehalf", "--k-gon", "64"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  const auto csv = read_file(path("onehalf.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "theta,w2,map_l2,map_l2_sq,lower_bound,ok");
}

TEST_F(Cli, BarycenterGeneratedCorners) {
  const auto r = run({"--m", "8", "--out-dir", dir_.string(), "barycenter", "--k", "3", "--points", "20"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_TRUE(fs::exists(path("barycenter.csv")));
}

TEST_F(Cli, BarycenterFileCorners) {
  std::vector<std::string> args = {"--m", "8", "--out-dir", dir_.string(), "barycenter", "--k", "2", "--corners"};
  for (int c = 0; c < 4; ++c) {
    const double x = 0.2 + 0.2 * c;
    args.push_back(file("c" + std::to_string(c) + ".csv", format_double(x) + ",0.5\n0.5," + format_double(x) + "\n"));
  }
  EXPECT_EQ(run(args).code, 0);
  EXPECT_EQ(run({"barycenter", "--corners", "a.csv", "b.csv"}).code, 2);
}

TEST_F(Cli, ClusterImagesAndClouds) {
  file("imgs/a.pgm", "P2 4 4 255\n255 255 0 0\n255 255 0 0\n0 0 0 0\n0 0 0 0\n");
  file("imgs/b.pgm", "P2 4 4 255\n255 255 0 0\n255 200 0 0\n0 0 0 0\n0 0 0 0\n");
  file("imgs/c.pgm", "P2 4 4 255\n0 0 0 0\n0 0 0 0\n0 0 255 255\n0 0 255 255\n");
  file("imgs/d.pgm", "P2 4 4 255\n0 0 0 0\n0 0 0 0\n0 0 200 255\n0 0 255 255\n");
  const auto r = run({"--m", "8", "--seed", "1", "--out-dir", path("out"), "cluster", "--k", "2", path("imgs")});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  const auto csv = read_file(path("out/cluster.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "item,cluster");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<int> label;
  while (std::getline(in, line)) label.push_back(std::stoi(line.substr(line.find(',') + 1)));
  ASSERT_EQ(label.size(), 4u);
  EXPECT_EQ(label[0], label[1]);
  EXPECT_EQ(label[2], label[3]);
  EXPECT_NE(label[0], label[2]);
  EXPECT_TRUE(fs::exists(path("out/cluster_centroids.csv")));
  const auto meta = json::parse(read_file(path("out/cluster.json")));
  EXPECT_TRUE(meta.at("summary").contains("inertia_history"));
}

TEST_F(Cli, ClusterIdx) {
  std::string idx;
  for (std::uint32_t v : {0x803u, 3u, 2u, 2u})
    for (int b = 3; b >= 0; --b) idx.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  idx += std::string("\xff\0\0\0", 4) + std::string("\xff\0\0\0", 4) + std::string("\0\0\0\xff", 4);
  const auto f = file("x.idx", idx);
  const auto r = run({"--m", "4", "--out-dir", path("out"), "cluster", "--idx", f, "--max-records", "3", "--k", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = read_file(path("out/cluster.csv"));
  ASSERT_EQ(csv.size(), std::string("item,cluster\n0,a\n1,b\n2,c\n").size());
  EXPECT_EQ(csv[15], csv[19]);
  EXPECT_NE(csv[15], csv[23]);
}

TEST_F(Cli, CheckPassesAndCoversEveryModule) {
  const auto r = run({"check"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  for (const char* module : {"geometry.", "solver.", "embedding.", "metrics.", "experiments.", "cli_io."})
    EXPECT_NE(r.out.find(std::string("PASS  ") + module), std::string::npos) << module;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
}

TEST(InvariantSuite, EveryCheckPasses) {
  for (const auto& c : run_invariant_suite({}))
    EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

}  // namespace
}  // namespace monge
