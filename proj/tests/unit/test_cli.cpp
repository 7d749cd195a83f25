#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "gtvd/cli.hpp"
#include "gtvd/cloud.hpp"
#include "gtvd/errors.hpp"

using namespace gtvd;
using namespace gtvd::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("gtvd_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

PointCloud plane_cloud(std::size_t n, std::uint64_t seed, double sigma) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), 0.0);
  return add_gaussian_noise(PointCloud(pts), {sigma, seed});
}

std::vector<std::string> csv_lines_without_runtime(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line.substr(0, line.rfind(',')));
  return out;
}

}  // namespace

TEST_CASE("settings parsing") {
  const Settings s = parse_settings("# comment\n gamma = 0.1  # trailing\n\nk=6\n");
  CHECK(s.size() == 2);
  CHECK(s.at("gamma") == "0.1");
  CHECK(s.at("k") == "6");
  try {
    parse_settings("gamma = 1\nbroken line\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_settings("k = 1\nk = 2\n"), ParseError);
  CHECK_THROWS_AS(parse_settings("= 1\n"), ParseError);
  CHECK_THROWS_AS(parse_settings("k =\n"), ParseError);
}

TEST_CASE("settings application") {
  RunConfig rc;
  apply_settings(rc, {{"gamma", "0.2"}, {"start_seed", "7"}, {"recompute_bipartition", "yes"}, {"k", "5"}});
  CHECK(rc.params.gamma == 0.2);
  CHECK(rc.gamma_explicit);
  CHECK(rc.params.start_seed == std::optional<std::uint64_t>(7));
  CHECK(rc.params.recompute_bipartition);
  CHECK(rc.params.k == 5);
  CHECK_THROWS_AS(apply_settings(rc, {{"gamm", "1"}}), InvalidArgument);
  CHECK_THROWS_AS(apply_settings(rc, {{"rho", "five"}}), InvalidArgument);
  CHECK_THROWS_AS(apply_settings(rc, {{"k", "-1"}}), InvalidArgument);

  // The echo parses back to the same parameters.
  RunConfig back;
  apply_settings(back, parse_settings(format_settings(rc.params)));
  CHECK(format_settings(back.params) == format_settings(rc.params));
  CHECK(setting_keys().size() == parse_settings(format_settings(rc.params)).size());
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == kUsage);
  CHECK(run({"frobnicate"}).code == kUsage);
  CHECK(run({"--help"}).code == kOk);
  CHECK(run({"noise", "only_input.xyz"}).code == kUsage);
}

TEST_CASE("noise command") {
  TempDir dir("noise");
  save_cloud(plane_cloud(10000, 1, 0.0), dir / "clean.xyz");
  const Run r = run({"noise", dir / "clean.xyz", dir / "noisy.xyz", "--sigma", "0.1", "--seed", "3"});
  REQUIRE(r.code == kOk);
  const auto pos = r.out.find("achieved_std: ");
  REQUIRE(pos != std::string::npos);
  std::istringstream in(r.out.substr(pos + 14));
  for (int a = 0; a < 3; ++a) {
    double s = 0.0;
    in >> s;
    CHECK(s >= 0.098);
    CHECK(s <= 0.102);
  }
  CHECK(r.out.find(std::string(kNoiseRngId)) != std::string::npos);

  REQUIRE(run({"noise", dir / "clean.xyz", dir / "again.xyz", "--sigma", "0.1", "--seed", "3"}).code == kOk);
  CHECK(slurp(dir / "noisy.xyz") == slurp(dir / "again.xyz"));

  REQUIRE(run({"noise", dir / "clean.xyz", dir / "zero.xyz", "--sigma", "0"}).code == kOk);
  CHECK(load_cloud(dir / "zero.xyz") == load_cloud(dir / "clean.xyz"));

  CHECK(run({"noise", dir / "clean.xyz", dir / "neg.xyz", "--sigma", "-1"}).code == kUsage);
}

TEST_CASE("eval command") {
  TempDir dir("eval");
  save_cloud(PointCloud({Vec3(0, 0, 0), Vec3(2, 0, 0)}), dir / "g.xyz");
  save_cloud(PointCloud({Vec3(0.5, 0, 0)}), dir / "t.xyz");
  save_cloud(plane_cloud(50, 2, 0.01), dir / "p.xyz");

  const Run same = run({"eval", dir / "p.xyz", dir / "p.xyz", "--label", "p"});
  REQUIRE(same.code == kOk);
  CHECK(same.out.find("p,0,0,0,0,") != std::string::npos);

  const Run r = run({"eval", dir / "g.xyz", dir / "t.xyz", "--label", "toy", "--k", "2"});
  REQUIRE(r.code == kOk);
  CHECK(r.out.find("toy,0,0.75,") != std::string::npos);

  CHECK(run({"eval", dir / "g.xyz", dir / "missing.xyz"}).code == kIo);
  std::ofstream(dir / "bad.xyz") << "1 2 x\n";
  CHECK(run({"eval", dir / "g.xyz", dir / "bad.xyz"}).code == kParse);
}

TEST_CASE("denoise command") {
  TempDir dir("denoise");
  save_cloud(plane_cloud(200, 3, 0.03), dir / "in.xyz");

  SUBCASE("gamma = 0 writes the input back") {
    const Run r = run({"denoise", dir / "in.xyz", dir / "out.xyz", "--gamma", "0"});
    REQUIRE(r.code == kOk);
    CHECK(load_cloud(dir / "out.xyz") == load_cloud(dir / "in.xyz"));
    CHECK(slurp(dir / "out.xyz.config.txt").find("gamma = 0\n") != std::string::npos);
    CHECK(fs::exists(dir / "out.xyz.diag.txt"));
  }

  SUBCASE("config echo reproduces the run") {
    std::ofstream(dir / "cfg.txt") << "outer_max_iter = 1\nadmm_max_iter = 30\n";
    REQUIRE(run({"denoise", dir / "in.xyz", dir / "a.xyz", "--config", dir / "cfg.txt", "--gamma", "0.02"}).code ==
            kOk);
    const std::string echo = slurp(dir / "a.xyz.config.txt");
    CHECK(echo.find("outer_max_iter = 1\n") != std::string::npos);
    CHECK(echo.find("gamma = 0.02\n") != std::string::npos);
    REQUIRE(run({"denoise", dir / "in.xyz", dir / "b.xyz", "--config", dir / "a.xyz.config.txt"}).code == kOk);
    CHECK(slurp(dir / "a.xyz") == slurp(dir / "b.xyz"));
    CHECK_FALSE(load_cloud(dir / "a.xyz") == load_cloud(dir / "in.xyz"));
    const std::string diag = slurp(dir / "a.xyz.diag.txt");
    CHECK(diag.find("pass,iteration,primal_residual") != std::string::npos);
  }

  SUBCASE("failures") {
    const Run missing = run({"denoise", dir / "nope.xyz", dir / "x.xyz"});
    CHECK(missing.code == kIo);
    CHECK_FALSE(fs::exists(dir / "x.xyz"));
    CHECK(run({"denoise", dir / "in.xyz", dir / "x.xyz", "--rho", "0"}).code == kUsage);
    CHECK(run({"denoise", dir / "in.xyz", dir / "x.xyz", "--config", dir / "none.txt"}).code == kIo);
    std::ofstream(dir / "bad.txt") << "gamma 0.1\n";
    CHECK(run({"denoise", dir / "in.xyz", dir / "x.xyz", "--config", dir / "bad.txt"}).code == kParse);
    std::ofstream(dir / "same.xyz") << "1 1 1\n1 1 1\n1 1 1\n";
    CHECK(run({"denoise", dir / "same.xyz", dir / "x.xyz", "--k", "2"}).code == kDegenerate);
  }
}

TEST_CASE("inspect command") {
  TempDir dir("inspect");
  save_cloud(PointCloud({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)}), dir / "path.xyz");

  const Run graph = run({"inspect", dir / "path.xyz", "--what", "graph", "--k", "1"});
  REQUIRE(graph.code == kOk);
  CHECK(graph.out.find("0 1 ") == 0);

  const Run bp = run({"inspect", dir / "path.xyz", "--what", "bipartition", "--k", "1"});
  REQUIRE(bp.code == kOk);
  CHECK(bp.out == "0 red\n1 blue\n2 red\n");

  CHECK(run({"inspect", dir / "path.xyz", "--what", "curvature"}).code == kUsage);
  CHECK(run({"inspect", dir / "path.xyz", "--what", "normals", "--color", "green"}).code == kUsage);

  // Planar toy: every red normal is within 5 degrees of +-z.
  std::vector<Vec3> pts;
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) pts.emplace_back(0.1 * x + 0.01 * (y % 2) + 0.003 * (x % 3), 0.1 * y + 0.004 * ((x * 7) % 5), 0.0);
  save_cloud(PointCloud(pts), dir / "plane.xyz");
  const Run normals = run({"inspect", dir / "plane.xyz", "--what", "normals", "--sigma-p", "0.15", "--output",
                           dir / "normals.txt"});
  REQUIRE(normals.code == kOk);
  std::istringstream in(slurp(dir / "normals.txt"));
  std::string line;
  std::size_t count = 0;
  int sign = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::size_t node;
    Vec3 n;
    ls >> node >> n.x() >> n.y() >> n.z();
    CHECK(std::abs(n.z()) >= std::cos(5.0 * M_PI / 180.0));
    if (sign == 0) sign = n.z() > 0 ? 1 : -1;
    CHECK(n.z() * sign > 0);
    ++count;
  }
  CHECK(count >= 40);
}

TEST_CASE("bench command") {
  TempDir empty("bench_empty");
  CHECK(run({"bench", empty.path.string()}).code == kIo);
  CHECK(run({"bench", empty / "missing"}).code == kIo);

  TempDir dir("bench");
  save_cloud(plane_cloud(150, 4, 0.0), dir / "a.xyz");
  save_cloud(plane_cloud(120, 5, 0.0), dir / "b.ply");
  std::ofstream(dir / "notes.txt") << "ignored\n";
  const std::vector<std::string> base = {"bench", dir.path.string(), "--sigmas", "0.02", "--outer-max-iter", "1",
                                         "--admm-max-iter", "20", "--sigma-p", "0.15", "--jobs", "2"};
  auto with_csv = [&](const std::string& csv) {
    auto args = base;
    args.push_back("--csv");
    args.push_back(csv);
    return args;
  };
  const Run first = run(with_csv(dir / "one.csv"));
  REQUIRE(first.code == kOk);
  CHECK(first.out.find("a") != std::string::npos);
  REQUIRE(run(with_csv(dir / "two.csv")).code == kOk);
  const auto one = csv_lines_without_runtime(slurp(dir / "one.csv"));
  CHECK(one.size() == 5);
  CHECK(one[0] == "model,sigma,stage,c2c_unsq,c2c_sq,c2p");
  CHECK(one == csv_lines_without_runtime(slurp(dir / "two.csv")));
}

TEST_CASE("bench improves c2c on a noisy plane with default settings") {
  TempDir dir("bench_plane");
  save_cloud(plane_cloud(500, 6, 0.0), dir / "plane.xyz");
  const Run r = run({"bench", dir.path.string(), "--sigmas", "0.05", "--csv", dir / "plane.csv"});
  REQUIRE(r.code == kOk);
  std::istringstream in(slurp(dir / "plane.csv"));
  std::string line;
  std::map<std::string, double> c2c_by_stage;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    REQUIRE(cols.size() == 7);
    c2c_by_stage[cols[2]] = std::stod(cols[3]);
  }
  REQUIRE(c2c_by_stage.count("noise") == 1);
  REQUIRE(c2c_by_stage.count("proposed") == 1);
  CHECK(c2c_by_stage["proposed"] < c2c_by_stage["noise"]);
}
