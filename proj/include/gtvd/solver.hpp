#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "gtvd/bipartite.hpp"
#include "gtvd/cloud.hpp"
#include "gtvd/diagnostics.hpp"
#include "gtvd/graph.hpp"
#include "gtvd/normals.hpp"

namespace gtvd {

struct DenoiseParams {
  double gamma = 0.05;   // GTV weight
  double rho = 5.0;      // ADMM penalty
  double t = 0.1;        // proximal step
  double sigma_p = 1.5;  // kernel bandwidth
  std::size_t k = 8;
  double delta = 0.01;   // GMRF regularizer for the bipartite approximation
  double collinearity_tol = kCollinearityTol;  // support pairs need sin(angle) above this

  double cg_tol = 1e-6;
  std::size_t cg_max_iter = 200;
  double prox_tol = 1e-6;
  std::size_t prox_max_iter = 100;
  double admm_tol = 1e-5;
  std::size_t admm_max_iter = 100;
  double outer_tol = 1e-4;
  std::size_t outer_max_iter = 10;

  std::size_t start_node = 0;
  std::optional<std::uint64_t> start_seed;  // when set, picks the start node at random
  std::size_t kld_window_hops = 2;
  bool recompute_bipartition = false;
  std::size_t node_budget = 20000;  // larger clouds are split into spatial windows; 0 disables

  // Throws InvalidArgument on any violated positivity constraint.
  void validate() const;
  // Non-fatal advisories (step size vs. penalty).
  std::vector<std::string> warnings() const;
};

// start_seed when set, else start_node (which must be < n).
std::size_t resolve_start_node(const DenoiseParams& params, std::size_t n);
BipartiteOptions bipartite_options(const DenoiseParams& params, std::size_t start);

// m = B p + v over the red-graph edges: edge e = (i, j) owns rows 3e..3e+2
// with A_i in block column i, -A_j in block column j, and v_e = b_i - b_j.
struct EdgeOperator {
  Eigen::SparseMatrix<double, Eigen::RowMajor> B;
  Eigen::SparseMatrix<double, Eigen::RowMajor> Bt;
  Eigen::VectorXd v;
  std::vector<Edge> edges;  // canonical edge order; weights for the l1 term
  std::size_t node_count = 0;
  std::vector<Mat3> gram_blocks;  // diagonal 3x3 blocks of B^T B, one per node

  Eigen::VectorXd apply(const Eigen::VectorXd& p) const { return B * p + v; }
};

EdgeOperator assemble_edge_operator(const WeightedGraph& red_graph,
                                    std::span<const std::optional<NormalLinearization>> lins);

struct CgResult {
  Eigen::VectorXd p;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

// Solves (2I + rho B^T B) p = 2q + rho B^T (m - u - v) by conjugate gradient
// with a block-Jacobi preconditioner, warm-started at `p0` (q when empty).
// Failure to reach cg_tol is reported in the result, never thrown.
CgResult p_update(const Eigen::VectorXd& q, const EdgeOperator& op, const Eigen::VectorXd& m,
                  const Eigen::VectorXd& u, double rho, double cg_tol, std::size_t cg_max_iter,
                  const Eigen::VectorXd& p0 = {});

inline double soft_threshold(double value, double tau) {
  if (value > tau) return value - tau;
  if (value < -tau) return value + tau;
  return 0.0;
}

struct ProxResult {
  Eigen::VectorXd m;
  std::size_t iterations = 0;
  bool converged = false;
};

// Proximal gradient on (rho/2)|Bp + v - m + u|^2 + gamma * sum_e w_e |m_e|_1:
// m <- soft(m + t rho (Bp + v + u - m), t gamma w_e) until the sup-norm step
// is <= prox_tol. Throws ConvergenceError on a non-finite iterate.
ProxResult m_update(const EdgeOperator& op, const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& m_init, double rho, double gamma, double t,
                    double prox_tol, std::size_t prox_max_iter);

// u + (Bp + v - m).
Eigen::VectorXd u_update(const Eigen::VectorXd& u, const EdgeOperator& op, const Eigen::VectorXd& p,
                         const Eigen::VectorXd& m);

// Per-edge weighted l1 of the linearized normal differences, each edge once.
double linearized_gtv(const EdgeOperator& op, const Eigen::VectorXd& p);

struct PartiteResult {
  Eigen::VectorXd p;
  Eigen::VectorXd m;
  Eigen::VectorXd u;
  std::vector<double> residuals;       // primal, per ADMM iteration
  std::vector<double> dual_residuals;  // |rho B^T (m_k - m_{k-1})| / max(|rho B^T u|, 1)
  std::vector<double> objectives;  // |q - p|^2 + gamma * GTV at m = Bp + v
  std::vector<double> gtvs;
  std::vector<double> seconds;
  std::size_t cg_not_converged = 0;
  std::size_t prox_not_converged = 0;
  bool converged = false;
};

// One ADMM solve for a partite with fidelity against q: starts at p0 (q when
// empty; normally the linearization point), m0 = B p0 + v, u0 = 0, then p/m/u
// updates until |Bp + v - m| / max(|m|, 1) and the relative dual residual
// are both <= admm_tol. Throws
// ConvergenceError when the residual stays above 10x its first value for 5
// consecutive iterations.
PartiteResult admm_denoise_partite(const Eigen::VectorXd& q, const EdgeOperator& op,
                                   const DenoiseParams& params, const Eigen::VectorXd& p0 = {});
PartiteResult admm_denoise_partite(const Eigen::VectorXd& q, const WeightedGraph& red_graph,
                                   std::span<const std::optional<NormalLinearization>> lins,
                                   const DenoiseParams& params);

struct DenoiseResult {
  PointCloud cloud;
  DiagnosticsReport diagnostics;
};

// Full pipeline: k-NN graph, bipartite approximation, then alternating red
// and blue partite solves until the relative position change drops below
// outer_tol. Nodes without a support pair keep their observed positions.
DenoiseResult denoise(const PointCloud& cloud, const DenoiseParams& params);

}  // namespace gtvd
