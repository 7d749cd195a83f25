#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "gtvd/graph.hpp"

namespace gtvd {

enum class Color : std::uint8_t { Red = 0, Blue = 1 };

inline Color opposite(Color c) { return c == Color::Red ? Color::Blue : Color::Red; }
const char* color_name(Color c);

// Two-class node assignment. Red is the first set (the one seeded with the
// start node), Blue the second.
struct Bipartition {
  std::vector<Color> colors;

  std::size_t size() const noexcept { return colors.size(); }
  Color operator[](std::size_t i) const { return colors[i]; }
  std::vector<std::size_t> members(Color c) const;
  friend bool operator==(const Bipartition&, const Bipartition&) = default;
};

// KL divergence between zero-mean GMRFs with precisions L_orig + delta*I and
// L_bip + delta*I:
//   0.5 * (tr(P_bip * P_orig^-1) + ln det P_orig - ln det P_bip - n).
// Dense Cholesky; intended for window-sized matrices.
double kld(const Eigen::MatrixXd& laplacian_orig, const Eigen::MatrixXd& laplacian_bip, double delta);

struct BipartiteOptions {
  double delta = 0.01;
  std::size_t start_node = 0;
  // Hop radius of the local view used to score each candidate; 0 scores on
  // every node assigned so far.
  std::size_t window_hops = 2;
};

// One greedy decision, recorded when a trace is requested.
struct GreedyStep {
  std::size_t node = 0;
  double kld_red = 0.0;   // divergence if the node joins Red
  double kld_blue = 0.0;  // divergence if the node joins Blue
  Color chosen = Color::Red;
  bool tie = false;
  bool seed = false;  // component seed; no divergence evaluated
};

// Greedy BFS assignment. Each visited node goes to Red when
// kld_blue > kld_red, to Blue when kld_blue < kld_red, and alternates between
// the sets on a tie (|difference| <= 1e-12 * max(1, |kld_red|)), starting with
// Red. Disconnected graphs are handled one component at a time; later
// components are seeded at their lowest-index node through the tie rule.
Bipartition approximate_bipartite(const WeightedGraph& graph, const BipartiteOptions& options,
                                  std::vector<GreedyStep>* trace = nullptr);

// Keeps exactly the edges whose endpoints differ in color.
WeightedGraph induced_bipartite_graph(const WeightedGraph& graph, const Bipartition& bp);

// "node_index class" per line with class "red" or "blue".
void write_bipartition(std::ostream& out, const Bipartition& bp);

}  // namespace gtvd
