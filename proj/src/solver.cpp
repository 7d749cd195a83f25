#include "gtvd/solver.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "gtvd/bipartite.hpp"
#include "gtvd/errors.hpp"
#include "gtvd/windows.hpp"

namespace gtvd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be finite and > 0");
}

std::string num(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void DenoiseParams::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be finite and >= 0");
  require_positive(rho, "rho");
  require_positive(t, "t");
  require_positive(sigma_p, "sigma_p");
  require_positive(delta, "delta");
  require_positive(cg_tol, "cg_tol");
  require_positive(prox_tol, "prox_tol");
  require_positive(admm_tol, "admm_tol");
  require_positive(outer_tol, "outer_tol");
  if (!(collinearity_tol > 0.0) || !(collinearity_tol < 1.0)) throw InvalidArgument("collinearity_tol must be in (0, 1)");
  if (k < 1) throw InvalidArgument("k must be >= 1");
  if (cg_max_iter < 1 || prox_max_iter < 1 || admm_max_iter < 1 || outer_max_iter < 1)
    throw InvalidArgument("iteration caps must be >= 1");
}

std::vector<std::string> DenoiseParams::warnings() const {
  std::vector<std::string> out;
  if (t * rho >= 2.0) {
    out.push_back("t * rho = " + num(t * rho) + " >= 2: proximal gradient m-update will not converge");
  } else if (t * rho > 1.0) {
    out.push_back("t = " + num(t) + " exceeds the recommended 1/rho = " + num(1.0 / rho));
  }
  return out;
}

std::size_t resolve_start_node(const DenoiseParams& params, std::size_t n) {
  if (n == 0) throw InvalidArgument("cannot pick a start node in an empty graph");
  if (params.start_seed) {
    std::mt19937_64 rng(*params.start_seed);
    return static_cast<std::size_t>(rng() % n);
  }
  if (params.start_node >= n)
    throw InvalidArgument("start node " + std::to_string(params.start_node) + " out of range for " +
                          std::to_string(n) + " points");
  return params.start_node;
}

BipartiteOptions bipartite_options(const DenoiseParams& params, std::size_t start) {
  BipartiteOptions opt;
  opt.delta = params.delta;
  opt.start_node = start;
  opt.window_hops = params.kld_window_hops;
  return opt;
}

EdgeOperator assemble_edge_operator(const WeightedGraph& red_graph,
                                    std::span<const std::optional<NormalLinearization>> lins) {
  const std::size_t n = red_graph.node_count();
  if (lins.size() != n)
    throw InvalidArgument("need one linearization per red node (" + std::to_string(n) + "), got " +
                          std::to_string(lins.size()));
  for (std::size_t i = 0; i < n; ++i)
    if (!lins[i]) throw InvalidArgument("red node " + std::to_string(i) + " has no normal linearization");

  EdgeOperator op;
  op.node_count = n;
  op.edges.assign(red_graph.edges().begin(), red_graph.edges().end());
  const auto rows = static_cast<Eigen::Index>(3 * op.edges.size());
  const auto cols = static_cast<Eigen::Index>(3 * n);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(18 * op.edges.size());
  op.v.resize(rows);
  for (std::size_t e = 0; e < op.edges.size(); ++e) {
    const auto& edge = op.edges[e];
    const auto& li = *lins[edge.i];
    const auto& lj = *lins[edge.j];
    const auto r0 = static_cast<Eigen::Index>(3 * e);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (li.A(r, c) != 0.0) trip.emplace_back(r0 + r, static_cast<Eigen::Index>(3 * edge.i) + c, li.A(r, c));
        if (lj.A(r, c) != 0.0) trip.emplace_back(r0 + r, static_cast<Eigen::Index>(3 * edge.j) + c, -lj.A(r, c));
      }
    }
    op.v.segment<3>(r0) = li.b - lj.b;
  }
  op.B.resize(rows, cols);
  op.B.setFromTriplets(trip.begin(), trip.end());
  op.Bt = op.B.transpose();
  op.gram_blocks.assign(n, Mat3::Zero());
  for (const auto& edge : op.edges) {
    const auto& ai = lins[edge.i]->A;
    const auto& aj = lins[edge.j]->A;
    op.gram_blocks[edge.i] += ai.transpose() * ai;
    op.gram_blocks[edge.j] += aj.transpose() * aj;
  }
  return op;
}

CgResult p_update(const Eigen::VectorXd& q, const EdgeOperator& op, const Eigen::VectorXd& m,
                  const Eigen::VectorXd& u, double rho, double cg_tol, std::size_t cg_max_iter,
                  const Eigen::VectorXd& p0) {
  require_positive(rho, "rho");
  if (q.size() != static_cast<Eigen::Index>(3 * op.node_count))
    throw InvalidArgument("p_update: q has the wrong length");
  CgResult res;
  if (op.edges.empty()) {
    // 2I p = 2q.
    res.p = q;
    res.converged = true;
    return res;
  }
  auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd bx = op.B * x;
    return 2.0 * x + rho * (op.Bt * bx);
  };
  const Eigen::VectorXd rhs = 2.0 * q + rho * (op.Bt * (m - u - op.v));
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    res.p = Eigen::VectorXd::Zero(q.size());
    res.converged = true;
    return res;
  }

  std::vector<Mat3> inv_blocks(op.node_count);
  for (std::size_t i = 0; i < op.node_count; ++i)
    inv_blocks[i] = (2.0 * Mat3::Identity() + rho * op.gram_blocks[i]).inverse();
  auto precondition = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd z(x.size());
    for (std::size_t i = 0; i < op.node_count; ++i) {
      const auto s = static_cast<Eigen::Index>(3 * i);
      z.segment<3>(s) = inv_blocks[i] * x.segment<3>(s);
    }
    return z;
  };

  // The right-hand side is dominated by rho B^T (B q) when the normals are
  // steep, so progress is measured against the warm-start residual; the
  // floor stops at what double precision can resolve on the full system.
  Eigen::VectorXd x = p0.size() == q.size() ? p0 : q;
  Eigen::VectorXd r = rhs - apply(x);
  double rnorm = r.norm();
  const double stop = std::max(cg_tol * std::min(rnorm, rhs_norm),
                               64.0 * std::numeric_limits<double>::epsilon() * rhs_norm);
  Eigen::VectorXd z = precondition(r);
  Eigen::VectorXd d = z;
  double rz = r.dot(z);
  std::size_t it = 0;
  while (rnorm > stop && it < cg_max_iter) {
    const Eigen::VectorXd ad = apply(d);
    const double curvature = d.dot(ad);
    // Lost to round-off; the system matrix is SPD in exact arithmetic.
    if (!(curvature > 0.0) || !std::isfinite(curvature)) break;
    const double alpha = rz / curvature;
    x += alpha * d;
    r -= alpha * ad;
    rnorm = r.norm();
    z = precondition(r);
    const double rz_next = r.dot(z);
    d = z + (rz_next / rz) * d;
    rz = rz_next;
    ++it;
  }
  res.iterations = it;
  res.relative_residual = (apply(x) - rhs).norm() / rhs_norm;
  res.converged = rnorm <= stop;
  res.p = std::move(x);
  return res;
}

ProxResult m_update(const EdgeOperator& op, const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& m_init, double rho, double gamma, double t,
                    double prox_tol, std::size_t prox_max_iter) {
  require_positive(rho, "rho");
  require_positive(t, "t");
  const Eigen::VectorXd target = op.apply(p) + u;  // Bp + v + u
  if (m_init.size() != target.size()) throw InvalidArgument("m_update: m has the wrong length");
  ProxResult res;
  res.m = m_init;
  if (target.size() == 0) {
    res.converged = true;
    return res;
  }
  const double step = t * rho;
  Eigen::VectorXd next(target.size());
  for (std::size_t it = 1; it <= prox_max_iter; ++it) {
    double change = 0.0;
    for (std::size_t e = 0; e < op.edges.size(); ++e) {
      const double tau = t * gamma * op.edges[e].w;
      for (int r = 0; r < 3; ++r) {
        const auto idx = static_cast<Eigen::Index>(3 * e + r);
        const double y = res.m[idx] + step * (target[idx] - res.m[idx]);
        next[idx] = soft_threshold(y, tau);
        if (!std::isfinite(next[idx]))
          throw ConvergenceError("non-finite m-update iterate on edge (" + std::to_string(op.edges[e].i) +
                                 ", " + std::to_string(op.edges[e].j) + ") component " + std::to_string(r) +
                                 ": target " + num(target[idx]) + ", previous " + num(res.m[idx]));
        change = std::max(change, std::abs(next[idx] - res.m[idx]));
      }
    }
    res.m.swap(next);
    res.iterations = it;
    if (change <= prox_tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

Eigen::VectorXd u_update(const Eigen::VectorXd& u, const EdgeOperator& op, const Eigen::VectorXd& p,
                         const Eigen::VectorXd& m) {
  if (u.size() != m.size() || u.size() != op.v.size()) throw InvalidArgument("u_update: dimension mismatch");
  return u + (op.apply(p) - m);
}

double linearized_gtv(const EdgeOperator& op, const Eigen::VectorXd& p) {
  const Eigen::VectorXd diff = op.apply(p);
  double total = 0.0;
  for (std::size_t e = 0; e < op.edges.size(); ++e)
    total += op.edges[e].w * diff.segment<3>(static_cast<Eigen::Index>(3 * e)).lpNorm<1>();
  return total;
}

PartiteResult admm_denoise_partite(const Eigen::VectorXd& q, const EdgeOperator& op,
                                   const DenoiseParams& params, const Eigen::VectorXd& p0) {
  params.validate();
  if (q.size() != static_cast<Eigen::Index>(3 * op.node_count))
    throw InvalidArgument("admm_denoise_partite: q has the wrong length");
  if (p0.size() != 0 && p0.size() != q.size()) throw InvalidArgument("admm_denoise_partite: p0 has the wrong length");
  const auto start = Clock::now();
  PartiteResult res;
  res.p = p0.size() == 0 ? q : p0;
  res.m = op.apply(res.p);
  res.u = Eigen::VectorXd::Zero(res.m.size());
  // Fidelity-only objective: the minimizer is q itself.
  if (params.gamma == 0.0 || op.edges.empty()) {
    res.p = q;
    res.m = op.apply(q);
    res.converged = true;
    return res;
  }

  double first_residual = 0.0;
  std::size_t above = 0;
  for (std::size_t it = 1; it <= params.admm_max_iter; ++it) {
    CgResult cg = p_update(q, op, res.m, res.u, params.rho, params.cg_tol, params.cg_max_iter, res.p);
    if (!cg.converged) ++res.cg_not_converged;
    res.p = std::move(cg.p);

    ProxResult prox = m_update(op, res.p, res.u, res.m, params.rho, params.gamma, params.t,
                               params.prox_tol, params.prox_max_iter);
    if (!prox.converged) ++res.prox_not_converged;
    const double dual = params.rho * (op.Bt * (prox.m - res.m)).norm();
    res.m = std::move(prox.m);

    const Eigen::VectorXd bpv = op.apply(res.p);
    const Eigen::VectorXd primal = bpv - res.m;
    res.u += primal;
    if (!res.p.allFinite() || !res.u.allFinite())
      throw ConvergenceError("ADMM produced a non-finite iterate at iteration " + std::to_string(it));

    const double residual = primal.norm() / std::max(res.m.norm(), 1.0);
    const double dual_residual = dual / std::max(params.rho * (op.Bt * res.u).norm(), 1.0);
    double gtv = 0.0;
    for (std::size_t e = 0; e < op.edges.size(); ++e)
      gtv += op.edges[e].w * bpv.segment<3>(static_cast<Eigen::Index>(3 * e)).lpNorm<1>();
    res.residuals.push_back(residual);
    res.dual_residuals.push_back(dual_residual);
    res.gtvs.push_back(gtv);
    res.objectives.push_back((q - res.p).squaredNorm() + params.gamma * gtv);
    res.seconds.push_back(seconds_since(start));

    if (it == 1) first_residual = residual;
    above = residual > 10.0 * first_residual ? above + 1 : 0;
    if (above >= 5)
      throw ConvergenceError("ADMM diverging: primal residual " + num(residual) + " exceeds 10x its initial value " +
                             num(first_residual) + "; try a smaller t or a larger admm_max_iter");
    // A small primal residual alone can stop while p is still moving.
    if (residual <= params.admm_tol && dual_residual <= params.admm_tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

PartiteResult admm_denoise_partite(const Eigen::VectorXd& q, const WeightedGraph& red_graph,
                                   std::span<const std::optional<NormalLinearization>> lins,
                                   const DenoiseParams& params) {
  return admm_denoise_partite(q, assemble_edge_operator(red_graph, lins), params);
}

namespace {

struct RunState {
  DiagnosticsReport& report;
  std::size_t window = 0;
  std::set<std::size_t> no_support;  // global (caller) indices
};

// Solves one color class in place. `global` maps local indices to the
// caller's indices for reporting.
void solve_partite(std::vector<Vec3>& positions, std::span<const Vec3> observed, const WeightedGraph& graph,
                   const Bipartition& bp, Color color, std::size_t outer, const DenoiseParams& params,
                   std::span<const std::size_t> global, RunState& state) {
  const auto start = Clock::now();
  PassSummary pass;
  pass.pass = state.report.passes.size() + 1;
  pass.outer = outer;
  pass.window = state.window;
  pass.color = color;

  const PartiteNormals pn = estimate_partite_normals(positions, graph, bp, color, params.k, params.collinearity_tol);
  pass.no_support_pair = pn.failed.size();
  for (auto i : pn.failed) {
    positions[i] = observed[i];
    state.no_support.insert(global[i]);
  }

  std::vector<std::size_t> nodes;
  std::vector<std::optional<NormalLinearization>> lins;
  for (std::size_t a = 0; a < pn.nodes.size(); ++a) {
    if (!pn.linearizations[a]) continue;
    nodes.push_back(pn.nodes[a]);
    lins.push_back(pn.linearizations[a]);
  }
  pass.nodes = nodes.size();

  if (nodes.size() >= 2) {
    std::vector<Vec3> red_pos;
    red_pos.reserve(nodes.size());
    for (auto i : nodes) red_pos.push_back(positions[i]);
    std::optional<WeightedGraph> red_graph;
    try {
      red_graph = build_knn_graph(red_pos, std::min(params.k, nodes.size() - 1), params.sigma_p);
    } catch (const DegenerateInput&) {
      state.report.warnings.push_back("pass " + std::to_string(pass.pass) + ": red positions coincide, skipped");
    }
    if (red_graph) {
      Eigen::VectorXd q(static_cast<Eigen::Index>(3 * nodes.size()));
      Eigen::VectorXd p0(q.size());
      for (std::size_t a = 0; a < nodes.size(); ++a) {
        q.segment<3>(static_cast<Eigen::Index>(3 * a)) = observed[nodes[a]];
        p0.segment<3>(static_cast<Eigen::Index>(3 * a)) = positions[nodes[a]];
      }
      const EdgeOperator op = assemble_edge_operator(*red_graph, lins);
      pass.edges = op.edges.size();
      const PartiteResult res = admm_denoise_partite(q, op, params, p0);
      for (std::size_t a = 0; a < nodes.size(); ++a) positions[nodes[a]] = res.p.segment<3>(static_cast<Eigen::Index>(3 * a));

      pass.admm_iterations = res.residuals.size();
      pass.admm_converged = res.converged;
      pass.cg_not_converged = res.cg_not_converged;
      pass.prox_not_converged = res.prox_not_converged;
      if (!res.residuals.empty()) {
        pass.initial_residual = res.residuals.front();
        pass.final_residual = res.residuals.back();
        pass.final_dual_residual = res.dual_residuals.back();
        pass.objective = res.objectives.back();
        pass.gtv = res.gtvs.back();
      } else {
        pass.gtv = linearized_gtv(op, res.p);
        pass.objective = (q - res.p).squaredNorm() + params.gamma * pass.gtv;
      }
      for (std::size_t it = 0; it < res.residuals.size(); ++it) {
        state.report.iterations.push_back(
            {pass.pass, it + 1, res.residuals[it], res.objectives[it], res.gtvs[it], res.seconds[it]});
      }
    }
  }
  pass.seconds = seconds_since(start);
  state.report.passes.push_back(pass);
}

double stacked_norm(std::span<const Vec3> pts) {
  double s = 0.0;
  for (const auto& p : pts) s += p.squaredNorm();
  return std::sqrt(s);
}

// Alternating red/blue solves over one point set. Returns the outer
// iteration count; `positions` is updated in place.
void denoise_points(std::vector<Vec3>& positions, std::span<const std::size_t> global,
                    const DenoiseParams& params, RunState& state) {
  const std::size_t n = positions.size();
  const std::vector<Vec3> observed = positions;
  const std::size_t k = std::min(params.k, n - 1);
  WeightedGraph graph = build_knn_graph(positions, k, params.sigma_p);
  const std::size_t start = resolve_start_node(params, n);
  Bipartition bp = approximate_bipartite(graph, bipartite_options(params, start));
  if (state.window == 0) {
    const auto red = bp.members(Color::Red).size();
    state.report.set("graph_edges", std::to_string(graph.edge_count()));
    state.report.set("bipartition_red", std::to_string(red));
    state.report.set("bipartition_blue", std::to_string(n - red));
    state.report.set("bipartite_edges", std::to_string(induced_bipartite_graph(graph, bp).edge_count()));
  }

  DenoiseParams local = params;
  local.k = k;
  for (std::size_t outer = 1; outer <= params.outer_max_iter; ++outer) {
    const std::vector<Vec3> before = positions;
    if (params.recompute_bipartition && outer > 1) {
      graph = build_knn_graph(positions, k, params.sigma_p);
      bp = approximate_bipartite(graph, bipartite_options(params, start));
    }
    solve_partite(positions, observed, graph, bp, Color::Red, outer, local, global, state);
    solve_partite(positions, observed, graph, bp, Color::Blue, outer, local, global, state);

    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff += (positions[i] - before[i]).squaredNorm();
    const double base = stacked_norm(before);
    const double change = base > 0.0 ? std::sqrt(diff) / base : std::sqrt(diff);
    state.report.outer_iterations = std::max(state.report.outer_iterations, outer);
    state.report.final_relative_change = change;
    if (change <= params.outer_tol) {
      state.report.outer_converged = true;
      return;
    }
  }
  state.report.outer_converged = false;
}

}  // namespace

DenoiseResult denoise(const PointCloud& cloud, const DenoiseParams& params) {
  params.validate();
  const auto start = Clock::now();
  const std::size_t n = cloud.size();
  if (n < 4) throw DegenerateInput("denoising needs at least 4 points, got " + std::to_string(n));

  DiagnosticsReport report;
  report.set("points", std::to_string(n));
  report.set("gamma", num(params.gamma));
  report.set("rho", num(params.rho));
  report.set("t", num(params.t));
  report.set("sigma_p", num(params.sigma_p));
  report.set("k", std::to_string(params.k));
  report.set("delta", num(params.delta));
  report.warnings = params.warnings();

  std::vector<Vec3> positions(cloud.positions().begin(), cloud.positions().end());
  if (params.gamma == 0.0) {
    // Fidelity-only objective: every partite solve returns its input.
    report.outer_converged = true;
    report.seconds = seconds_since(start);
    return {cloud, std::move(report)};
  }

  const auto windows = partition_windows(positions, params.node_budget);
  report.windows = windows.size();
  RunState state{report, 0, {}};
  if (windows.size() == 1) {
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    denoise_points(positions, ids, params, state);
  } else {
    std::vector<Vec3> result = positions;
    bool all_converged = true;
    for (std::size_t w = 0; w < windows.size(); ++w) {
      const auto& win = windows[w];
      state.window = w + 1;
      report.outer_converged = false;
      std::vector<Vec3> local;
      local.reserve(win.members.size());
      for (auto i : win.members) local.push_back(positions[i]);
      if (local.size() < 4) {
        report.warnings.push_back("window " + std::to_string(w + 1) + " has fewer than 4 points; left as observed");
        continue;
      }
      denoise_points(local, win.members, params, state);
      all_converged = all_converged && report.outer_converged;
      // Core points take this window's solution; halo points are context only.
      std::size_t c = 0;
      for (std::size_t a = 0; a < win.members.size() && c < win.core.size(); ++a) {
        if (win.members[a] == win.core[c]) {
          result[win.core[c]] = local[a];
          ++c;
        }
      }
    }
    report.outer_converged = all_converged;
    positions = std::move(result);
  }
  report.no_support_pair_nodes = state.no_support.size();
  report.seconds = seconds_since(start);
  return {PointCloud(std::move(positions)), std::move(report)};
}

}  // namespace gtvd
