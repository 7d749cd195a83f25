#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "gtvd/cloud.hpp"

namespace gtvd {

struct Edge {
  std::size_t i;
  std::size_t j;
  double w;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct AdjacentNode {
  std::size_t node;
  double w;
};

// Undirected weighted graph without self-loops. Edges are stored once, in
// canonical (i < j) lexicographic order; weights lie in (0, 1].
class WeightedGraph {
 public:
  WeightedGraph() = default;
  // Validates and canonicalizes: swaps (j, i) to (i, j), sorts, and rejects
  // self-loops, duplicates, out-of-range endpoints and weights outside (0, 1].
  WeightedGraph(std::size_t node_count, std::vector<Edge> edges);

  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }
  std::span<const AdjacentNode> neighbors(std::size_t i) const;
  std::size_t degree(std::size_t i) const { return neighbors(i).size(); }
  double weighted_degree(std::size_t i) const;

  friend bool operator==(const WeightedGraph& a, const WeightedGraph& b) {
    return a.node_count_ == b.node_count_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<AdjacentNode> adjacency_;
};

// Gaussian kernel exp(-|pi - pj|^2 / sigma_p^2). No factor of 2 in the
// denominator.
double edge_weight(const Vec3& pi, const Vec3& pj, double sigma_p);

// Symmetrized k-NN graph: (i, j) is an edge when j is among i's k nearest or
// i is among j's. Distance ties resolve toward the smaller index. Kernel
// weights that underflow to zero are clamped to the smallest normal double.
WeightedGraph build_knn_graph(std::span<const Vec3> points, std::size_t k, double sigma_p);
WeightedGraph build_knn_graph(const PointCloud& cloud, std::size_t k, double sigma_p);

// L = D - W.
Eigen::SparseMatrix<double> laplacian(const WeightedGraph& graph);
Eigen::MatrixXd dense_laplacian(const WeightedGraph& graph);

// Connected component id per node; ids are numbered in order of each
// component's lowest node index.
std::vector<std::size_t> connected_components(const WeightedGraph& graph, std::size_t* count = nullptr);

// Subgraph on `nodes` (renumbered 0..nodes.size()-1 in the given order).
WeightedGraph induced_subgraph(const WeightedGraph& graph, std::span<const std::size_t> nodes);

// "i j w" per line, canonical order.
void write_edge_list(std::ostream& out, const WeightedGraph& graph);

}  // namespace gtvd
