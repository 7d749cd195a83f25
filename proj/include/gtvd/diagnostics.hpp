#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "gtvd/bipartite.hpp"

namespace gtvd {

struct IterationRecord {
  std::size_t pass = 0;  // 1-based partite pass counter across the whole run
  std::size_t iteration = 0;
  double primal_residual = 0.0;
  double objective = 0.0;
  double gtv = 0.0;
  double seconds = 0.0;  // since the start of the pass
};

struct PassSummary {
  std::size_t pass = 0;
  std::size_t outer = 0;  // 1-based outer iteration
  std::size_t window = 0;
  Color color = Color::Red;
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t no_support_pair = 0;
  std::size_t admm_iterations = 0;
  bool admm_converged = false;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  double final_dual_residual = 0.0;
  double objective = 0.0;  // fidelity + gamma * GTV at the accepted iterate
  double gtv = 0.0;
  std::size_t cg_not_converged = 0;
  std::size_t prox_not_converged = 0;
  double seconds = 0.0;
};

// Run report: "key: value" header lines, then one CSV block per pass summary
// and per ADMM iteration.
struct DiagnosticsReport {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<PassSummary> passes;
  std::vector<IterationRecord> iterations;
  std::vector<std::string> warnings;
  std::size_t outer_iterations = 0;
  bool outer_converged = false;
  double final_relative_change = 0.0;
  std::size_t no_support_pair_nodes = 0;  // distinct nodes left at their observed position
  std::size_t windows = 1;
  double seconds = 0.0;

  void set(std::string key, std::string value);
};

void write_diagnostics(std::ostream& out, const DiagnosticsReport& report);

}  // namespace gtvd
