#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "gtvd/errors.hpp"
#include "gtvd/solver.hpp"

using namespace gtvd;

namespace {

using Lins = std::vector<std::optional<NormalLinearization>>;

NormalLinearization identity_lin() {
  NormalLinearization l;
  l.A = Mat3::Identity();
  l.b = Vec3::Zero();
  return l;
}

// Linearizations of genuine support triples around random points.
Lins random_lins(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Lins lins;
  while (lins.size() < n) {
    const Vec3 pi(u(rng), u(rng), u(rng)), pk(u(rng), u(rng), u(rng)), pl(u(rng), u(rng), u(rng));
    if (!non_collinear(pi, pk, pl, 0.2)) continue;
    const RawNormal r = raw_normal(pi, pk, pl);
    lins.emplace_back(linearize(pi, r.C, r.d, u(rng) < 0 ? -1 : 1));
  }
  return lins;
}

WeightedGraph random_connected_graph(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> e;
  for (std::size_t i = 1; i < n; ++i) e.push_back({static_cast<std::size_t>(u(rng) * i), i, 0.1 + 0.9 * u(rng)});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j < n; ++j)
      if (u(rng) < 0.2) e.push_back({i, j, 0.1 + 0.9 * u(rng)});
  std::sort(e.begin(), e.end(), [](const Edge& a, const Edge& b) {
    return std::minmax(a.i, a.j) < std::minmax(b.i, b.j);
  });
  e.erase(std::unique(e.begin(), e.end(),
                      [](const Edge& a, const Edge& b) { return std::minmax(a.i, a.j) == std::minmax(b.i, b.j); }),
          e.end());
  return WeightedGraph(n, e);
}

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

// B written out block by block from the linearizations, independent of the
// sparse assembly.
Eigen::MatrixXd dense_b(const WeightedGraph& g, const Lins& lins) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3 * g.edge_count(), 3 * g.node_count());
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const Edge& ed = g.edges()[e];
    B.block<3, 3>(3 * e, 3 * ed.i) = lins[ed.i]->A;
    B.block<3, 3>(3 * e, 3 * ed.j) = -lins[ed.j]->A;
  }
  return B;
}

}  // namespace

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(0.15, 0.2) == 0.0);
  CHECK(soft_threshold(-0.15, 0.2) == 0.0);
  CHECK(soft_threshold(0.5, 0.2) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(soft_threshold(-0.5, 0.2) == doctest::Approx(-0.3).epsilon(1e-15));
  CHECK(soft_threshold(0.2, 0.2) == 0.0);
  CHECK(soft_threshold(1.0, 0.0) == 1.0);
}

TEST_CASE("soft threshold minimizes the scalar prox objective") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double y = u(rng);
    const double tau = std::abs(u(rng)) / 2.0;
    auto f = [&](double m) { return 0.5 * (m - y) * (m - y) + tau * std::abs(m); };
    double best = 0.0;
    double best_val = f(0.0);
    for (int s = -40000; s <= 40000; ++s) {
      const double m = s * 1e-4;
      if (f(m) < best_val) {
        best_val = f(m);
        best = m;
      }
    }
    CHECK(std::abs(soft_threshold(y, tau) - best) <= 1e-4);
  }
}

TEST_CASE("edge operator") {
  SUBCASE("identity blocks give plain differences") {
    const WeightedGraph g(2, {{0, 1, 1.0}});
    const Lins lins = {identity_lin(), identity_lin()};
    const EdgeOperator op = assemble_edge_operator(g, lins);
    Eigen::VectorXd p(6);
    p << 1, 2, 3, 0.5, -1, 4;
    CHECK((op.apply(p) - (p.head<3>() - p.tail<3>())).norm() == 0.0);
  }
  SUBCASE("no edges") {
    const Lins lins = {identity_lin()};
    const EdgeOperator op = assemble_edge_operator(WeightedGraph(1, {}), lins);
    CHECK(op.v.size() == 0);
    CHECK(op.apply(Eigen::VectorXd::Ones(3)).size() == 0);
  }
  SUBCASE("missing linearization names the node") {
    const Lins lins = {identity_lin(), std::nullopt};
    try {
      assemble_edge_operator(WeightedGraph(2, {{0, 1, 1.0}}), lins);
      FAIL("expected an error");
    } catch (const InvalidArgument& e) {
      CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
  }
  SUBCASE("sparse assembly matches the dense definition") {
    std::mt19937_64 rng(3);
    const WeightedGraph g = random_connected_graph(8, rng);
    const Lins lins = random_lins(8, rng);
    const EdgeOperator op = assemble_edge_operator(g, lins);
    const Eigen::MatrixXd B = dense_b(g, lins);
    CHECK((Eigen::MatrixXd(op.B) - B).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::MatrixXd BtB = B.transpose() * B;
    for (std::size_t i = 0; i < 8; ++i)
      CHECK((op.gram_blocks[i] - BtB.block<3, 3>(3 * i, 3 * i)).cwiseAbs().maxCoeff() <= 1e-12);
    const Eigen::VectorXd p = random_vector(24, rng);
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      const Edge& ed = g.edges()[e];
      const Vec3 expect = lins[ed.i]->evaluate(p.segment<3>(3 * ed.i)) - lins[ed.j]->evaluate(p.segment<3>(3 * ed.j));
      CHECK((op.apply(p).segment<3>(3 * e) - expect).norm() <= 1e-12);
    }
  }
}

TEST_CASE("linearized GTV equals the weighted edge-wise sum") {
  std::mt19937_64 rng(4);
  const WeightedGraph g = random_connected_graph(10, rng);
  const Lins lins = random_lins(10, rng);
  const EdgeOperator op = assemble_edge_operator(g, lins);
  const Eigen::VectorXd p = random_vector(30, rng);
  double sum = 0.0;
  for (const Edge& e : g.edges())
    sum += e.w * (lins[e.i]->evaluate(p.segment<3>(3 * e.i)) - lins[e.j]->evaluate(p.segment<3>(3 * e.j))).lpNorm<1>();
  CHECK(std::abs(linearized_gtv(op, p) - sum) <= 1e-10);
}

TEST_CASE("m-update matches the closed-form prox on random instances") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 6;
    const WeightedGraph g = random_connected_graph(n, rng);
    const Lins lins = random_lins(n, rng);
    const EdgeOperator op = assemble_edge_operator(g, lins);
    const double rho = 0.5 + 10.0 * u(rng);
    const double t = (0.2 + 0.7 * u(rng)) / rho;
    const double gamma = 0.5 * u(rng);
    const Eigen::VectorXd p = random_vector(static_cast<Eigen::Index>(3 * n), rng);
    const Eigen::VectorXd uu = random_vector(op.v.size(), rng, 0.1);
    const Eigen::VectorXd m0 = random_vector(op.v.size(), rng);

    const ProxResult res = m_update(op, p, uu, m0, rho, gamma, t, 1e-12, 5000);
    CHECK(res.converged);
    const Eigen::VectorXd target = op.apply(p) + uu;
    Eigen::VectorXd closed(target.size());
    for (std::size_t e = 0; e < g.edge_count(); ++e)
      for (int r = 0; r < 3; ++r)
        closed[3 * e + r] = soft_threshold(target[3 * e + r], gamma * g.edges()[e].w / rho);
    CHECK((res.m - closed).cwiseAbs().maxCoeff() <= 1e-6);

    // Started at the solution, one step moves nowhere.
    const ProxResult fixed = m_update(op, p, uu, closed, rho, gamma, t, 1e-9, 1);
    CHECK(fixed.converged);
    CHECK((fixed.m - closed).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("m-update with gamma = 0 reaches Bp + v + u") {
  std::mt19937_64 rng(6);
  const WeightedGraph g = random_connected_graph(5, rng);
  const EdgeOperator op = assemble_edge_operator(g, random_lins(5, rng));
  const Eigen::VectorXd p = random_vector(15, rng);
  const Eigen::VectorXd uu = random_vector(op.v.size(), rng);
  const ProxResult res = m_update(op, p, uu, Eigen::VectorXd::Zero(op.v.size()), 5.0, 0.0, 0.1, 1e-13, 2000);
  CHECK(res.converged);
  CHECK((res.m - (op.apply(p) + uu)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("p-update matches a dense direct solve") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 9;  // at most 30 unknowns
    const WeightedGraph g = random_connected_graph(n, rng);
    const Lins lins = random_lins(n, rng);
    const EdgeOperator op = assemble_edge_operator(g, lins);
    const double rho = 0.1 + 20.0 * u(rng);
    const auto dim = static_cast<Eigen::Index>(3 * n);
    const Eigen::VectorXd q = random_vector(dim, rng);
    const Eigen::VectorXd m = random_vector(op.v.size(), rng);
    const Eigen::VectorXd uu = random_vector(op.v.size(), rng);

    const Eigen::MatrixXd B = dense_b(g, lins);
    const Eigen::MatrixXd S = 2.0 * Eigen::MatrixXd::Identity(dim, dim) + rho * B.transpose() * B;
    const Eigen::VectorXd rhs = 2.0 * q + rho * B.transpose() * (m - uu - op.v);
    const Eigen::VectorXd exact = S.llt().solve(rhs);

    const CgResult cg = p_update(q, op, m, uu, rho, 1e-14, 500);
    CHECK((cg.p - exact).norm() <= 1e-8 * exact.norm());

    // Any warm start lands on the same solution.
    const CgResult warm = p_update(q, op, m, uu, rho, 1e-14, 500, random_vector(dim, rng));
    CHECK((warm.p - exact).norm() <= 1e-8 * exact.norm());

    for (int probe = 0; probe < 5; ++probe) {
      const Eigen::VectorXd x = random_vector(dim, rng);
      CHECK(x.dot(S * x) >= 2.0 * x.squaredNorm());
    }
  }
}

TEST_CASE("p-update without edges or with vanishing rho returns q") {
  std::mt19937_64 rng(8);
  const Lins lins = {identity_lin(), identity_lin()};
  const EdgeOperator empty = assemble_edge_operator(WeightedGraph(2, {}), lins);
  const Eigen::VectorXd q = random_vector(6, rng);
  const CgResult r = p_update(q, empty, Eigen::VectorXd(), Eigen::VectorXd(), 5.0, 1e-10, 50);
  CHECK(r.p == q);

  const EdgeOperator op = assemble_edge_operator(WeightedGraph(2, {{0, 1, 1.0}}), lins);
  const CgResult tiny = p_update(q, op, random_vector(3, rng), random_vector(3, rng), 1e-12, 1e-14, 50);
  CHECK((tiny.p - q).norm() <= 1e-10);
}

TEST_CASE("u-update") {
  const Lins lins = {identity_lin(), identity_lin()};
  const EdgeOperator op = assemble_edge_operator(WeightedGraph(2, {{0, 1, 1.0}}), lins);
  Eigen::VectorXd p(6);
  p << 1, 1, 1, 0, 0, 0;
  const Eigen::VectorXd bpv = op.apply(p);
  const Eigen::Vector3d u0(0.3, -0.2, 0.1);
  CHECK(u_update(u0, op, p, bpv) == u0);
  const Eigen::Vector3d m(0.5, 0.5, 0.5);
  CHECK((u_update(Eigen::Vector3d::Zero(), op, p, m) - (bpv - m)).norm() == 0.0);
  CHECK_THROWS_AS(u_update(Eigen::VectorXd::Zero(2), op, p, m), InvalidArgument);
}

TEST_CASE("two-node ADMM reaches the analytic optimum") {
  // min |q - p|^2 + gamma |p_0 - p_1|_1 with identity blocks: per axis the
  // difference shrinks by soft(q_1 - q_0, gamma) around the fixed midpoint.
  const WeightedGraph g(2, {{0, 1, 1.0}});
  const Lins lins = {identity_lin(), identity_lin()};
  Eigen::VectorXd q(6);
  q << 0, 0, 0, 1, 0.1, -0.02;
  DenoiseParams params;
  params.gamma = 0.5;
  params.admm_tol = 1e-9;
  params.admm_max_iter = 5000;
  params.prox_tol = 1e-12;
  params.prox_max_iter = 2000;
  params.cg_tol = 1e-12;
  const PartiteResult r = admm_denoise_partite(q, g, lins, params);
  CHECK(r.converged);
  Eigen::VectorXd exact(6);
  for (int a = 0; a < 3; ++a) {
    const double mid = 0.5 * (q[a] + q[3 + a]);
    const double d = soft_threshold(q[3 + a] - q[a], params.gamma);
    exact[a] = mid - 0.5 * d;
    exact[3 + a] = mid + 0.5 * d;
  }
  CHECK((r.p - exact).cwiseAbs().maxCoeff() <= 1e-4);
  CHECK((q - r.p).norm() <= (q - exact).norm() + 1e-4);
  CHECK(r.residuals.back() <= params.admm_tol);
  CHECK(r.dual_residuals.back() <= params.admm_tol);
}

TEST_CASE("ADMM with gamma = 0 returns q") {
  std::mt19937_64 rng(9);
  const WeightedGraph g = random_connected_graph(6, rng);
  const Lins lins = random_lins(6, rng);
  DenoiseParams params;
  params.gamma = 0.0;
  const Eigen::VectorXd q = random_vector(18, rng);
  const PartiteResult r = admm_denoise_partite(q, g, lins, params);
  CHECK(r.p == q);
  CHECK(r.converged);
  const EdgeOperator op = assemble_edge_operator(g, lins);
  CHECK(r.m == op.apply(q));
}

TEST_CASE("ADMM objective beats the starting point on random instances") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const WeightedGraph g = random_connected_graph(8, rng);
    const Lins lins = random_lins(8, rng);
    const EdgeOperator op = assemble_edge_operator(g, lins);
    DenoiseParams params;
    params.gamma = 0.2;
    params.rho = 1.0;
    params.t = 0.5;
    params.admm_max_iter = 2000;
    params.admm_tol = 1e-8;
    const Eigen::VectorXd q = random_vector(24, rng);
    const PartiteResult r = admm_denoise_partite(q, op, params);
    CHECK(r.converged);
    for (double o : r.objectives) CHECK(std::isfinite(o));
    CHECK(r.objectives.back() <= params.gamma * linearized_gtv(op, q) + 1e-9);
    CHECK(admm_denoise_partite(q, op, params).p == r.p);
  }
}

TEST_CASE("parameter validation and advisories") {
  DenoiseParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.warnings().empty() == (p.t * p.rho <= 1.0));
  p.rho = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.gamma = -1.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.k = 0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.collinearity_tol = 1.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.t = 1.0;
  CHECK_FALSE(p.warnings().empty());

  DenoiseParams s;
  s.start_node = 4;
  CHECK(resolve_start_node(s, 10) == 4);
  CHECK_THROWS_AS(resolve_start_node(s, 4), InvalidArgument);
  s.start_seed = 99;
  const std::size_t a = resolve_start_node(s, 10);
  CHECK(a < 10);
  CHECK(resolve_start_node(s, 10) == a);
}

namespace {

PointCloud noisy_plane(std::size_t n, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), 0.0);
  return add_gaussian_noise(PointCloud(pts), {sigma, seed + 1});
}

}  // namespace

TEST_CASE("denoise with gamma = 0 returns the input exactly") {
  const PointCloud q = noisy_plane(200, 0.05, 3);
  DenoiseParams params;
  params.gamma = 0.0;
  CHECK(denoise(q, params).cloud == q);
}

TEST_CASE("denoise is deterministic") {
  const PointCloud q = noisy_plane(300, 0.05, 4);
  DenoiseParams params;
  params.outer_max_iter = 2;
  const DenoiseResult a = denoise(q, params);
  const DenoiseResult b = denoise(q, params);
  CHECK(a.cloud == b.cloud);
  CHECK_FALSE(a.cloud == q);
  REQUIRE_FALSE(a.diagnostics.passes.empty());
  for (const PassSummary& pass : a.diagnostics.passes) CHECK(std::isfinite(pass.objective));

  std::vector<double> first_pass;
  for (const IterationRecord& r : a.diagnostics.iterations)
    if (r.pass == 1) first_pass.push_back(r.primal_residual);
  REQUIRE(first_pass.size() >= 50);
  CHECK(first_pass[49] < first_pass[0]);
}

TEST_SUITE("admm-health") {
  TEST_CASE("every pass on the noisy plane ends below its initial residual and admm_tol") {
    const PointCloud q = noisy_plane(500, 0.05, 4);
    const DenoiseParams params;
    const DenoiseResult r = denoise(q, params);
    REQUIRE_FALSE(r.diagnostics.passes.empty());
    for (const PassSummary& pass : r.diagnostics.passes) {
      if (pass.admm_iterations == 0) continue;
      INFO("pass " << pass.pass << " after " << pass.admm_iterations << " iterations");
      CHECK(pass.final_residual < pass.initial_residual);
      CHECK(pass.final_residual <= params.admm_tol);
    }
  }
}

TEST_CASE("windowed denoising covers every point") {
  const PointCloud q = noisy_plane(400, 0.02, 5);
  DenoiseParams params;
  params.node_budget = 150;
  params.outer_max_iter = 1;
  const DenoiseResult r = denoise(q, params);
  CHECK(r.cloud.size() == q.size());
  CHECK(r.diagnostics.windows > 1);
  for (std::size_t i = 0; i < q.size(); ++i) CHECK((r.cloud[i] - q[i]).norm() < 0.5);
}
