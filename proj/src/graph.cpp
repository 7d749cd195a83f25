#include "gtvd/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "gtvd/errors.hpp"
#include "gtvd/kdtree.hpp"

namespace gtvd {

WeightedGraph::WeightedGraph(std::size_t node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
  for (auto& e : edges_) {
    if (e.i >= node_count_ || e.j >= node_count_)
      throw InvalidArgument("edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                            ") references a node outside [0, " + std::to_string(node_count_) + ")");
    if (e.i == e.j) throw InvalidArgument("self-loop on node " + std::to_string(e.i));
    if (!(e.w > 0.0 && e.w <= 1.0))
      throw InvalidArgument("edge weight must lie in (0, 1], got " + std::to_string(e.w));
    if (e.i > e.j) std::swap(e.i, e.j);
  }
  std::sort(edges_.begin(), edges_.end(),
            [](const Edge& a, const Edge& b) { return a.i < b.i || (a.i == b.i && a.j < b.j); });
  for (std::size_t e = 1; e < edges_.size(); ++e) {
    if (edges_[e].i == edges_[e - 1].i && edges_[e].j == edges_[e - 1].j)
      throw InvalidArgument("duplicate edge (" + std::to_string(edges_[e].i) + ", " +
                            std::to_string(edges_[e].j) + ")");
  }

  std::vector<std::size_t> deg(node_count_, 0);
  for (const auto& e : edges_) {
    ++deg[e.i];
    ++deg[e.j];
  }
  offsets_.assign(node_count_ + 1, 0);
  for (std::size_t i = 0; i < node_count_; ++i) offsets_[i + 1] = offsets_[i] + deg[i];
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  // Edges are sorted by (i, j), so each adjacency list comes out sorted by
  // neighbor index.
  for (const auto& e : edges_) adjacency_[fill[e.j]++] = {e.i, e.w};
  for (const auto& e : edges_) adjacency_[fill[e.i]++] = {e.j, e.w};
  for (std::size_t i = 0; i < node_count_; ++i) {
    std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
              adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]),
              [](const AdjacentNode& a, const AdjacentNode& b) { return a.node < b.node; });
  }
}

std::span<const AdjacentNode> WeightedGraph::neighbors(std::size_t i) const {
  if (i >= node_count_) throw InvalidArgument("node index out of range");
  return std::span<const AdjacentNode>(adjacency_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

double WeightedGraph::weighted_degree(std::size_t i) const {
  double s = 0.0;
  for (const auto& n : neighbors(i)) s += n.w;
  return s;
}

double edge_weight(const Vec3& pi, const Vec3& pj, double sigma_p) {
  if (!(sigma_p > 0.0)) throw InvalidArgument("kernel bandwidth sigma_p must be > 0");
  return std::exp(-(pi - pj).squaredNorm() / (sigma_p * sigma_p));
}

WeightedGraph build_knn_graph(std::span<const Vec3> points, std::size_t k, double sigma_p) {
  const std::size_t n = points.size();
  if (n < 2) throw InvalidArgument("k-NN graph needs at least 2 points");
  if (k < 1 || k >= n)
    throw InvalidArgument("k must satisfy 1 <= k < N (k=" + std::to_string(k) +
                          ", N=" + std::to_string(n) + ")");
  if (!(sigma_p > 0.0)) throw InvalidArgument("kernel bandwidth sigma_p must be > 0");
  const bool all_coincident = std::all_of(points.begin(), points.end(),
                                          [&](const Vec3& p) { return p == points.front(); });
  if (all_coincident) throw DegenerateInput("all points coincide; k-NN graph is undefined");

  KdTree tree(points);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    // k + 1 to make room for i itself, which may not come first when
    // duplicates with smaller indices exist.
    auto nn = tree.knn(points[i], k + 1);
    std::size_t taken = 0;
    for (const auto& nb : nn) {
      if (nb.index == i) continue;
      if (taken == k) break;
      pairs.emplace_back(std::min(i, nb.index), std::max(i, nb.index));
      ++taken;
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (auto [i, j] : pairs) {
    double w = edge_weight(points[i], points[j], sigma_p);
    w = std::max(w, std::numeric_limits<double>::min());
    edges.push_back({i, j, w});
  }
  return WeightedGraph(n, std::move(edges));
}

WeightedGraph build_knn_graph(const PointCloud& cloud, std::size_t k, double sigma_p) {
  return build_knn_graph(cloud.positions(), k, sigma_p);
}

Eigen::SparseMatrix<double> laplacian(const WeightedGraph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * graph.edge_count());
  for (const auto& e : graph.edges()) {
    const auto i = static_cast<Eigen::Index>(e.i), j = static_cast<Eigen::Index>(e.j);
    trip.emplace_back(i, j, -e.w);
    trip.emplace_back(j, i, -e.w);
    trip.emplace_back(i, i, e.w);
    trip.emplace_back(j, j, e.w);
  }
  Eigen::SparseMatrix<double> L(n, n);
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

Eigen::MatrixXd dense_laplacian(const WeightedGraph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : graph.edges()) {
    const auto i = static_cast<Eigen::Index>(e.i), j = static_cast<Eigen::Index>(e.j);
    L(i, j) -= e.w;
    L(j, i) -= e.w;
    L(i, i) += e.w;
    L(j, j) += e.w;
  }
  return L;
}

std::vector<std::size_t> connected_components(const WeightedGraph& graph, std::size_t* count) {
  constexpr auto unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> comp(graph.node_count(), unset);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < graph.node_count(); ++s) {
    if (comp[s] != unset) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (const auto& nb : graph.neighbors(v)) {
        if (comp[nb.node] == unset) {
          comp[nb.node] = next;
          stack.push_back(nb.node);
        }
      }
    }
    ++next;
  }
  if (count) *count = next;
  return comp;
}

WeightedGraph induced_subgraph(const WeightedGraph& graph, std::span<const std::size_t> nodes) {
  constexpr auto absent = static_cast<std::size_t>(-1);
  std::vector<std::size_t> local(graph.node_count(), absent);
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    if (nodes[a] >= graph.node_count()) throw InvalidArgument("subgraph node out of range");
    if (local[nodes[a]] != absent) throw InvalidArgument("duplicate node in subgraph selection");
    local[nodes[a]] = a;
  }
  std::vector<Edge> edges;
  for (const auto& e : graph.edges()) {
    if (local[e.i] != absent && local[e.j] != absent) edges.push_back({local[e.i], local[e.j], e.w});
  }
  return WeightedGraph(nodes.size(), std::move(edges));
}

void write_edge_list(std::ostream& out, const WeightedGraph& graph) {
  char buf[32];
  for (const auto& e : graph.edges()) {
    auto res = std::to_chars(buf, buf + sizeof buf, e.w);
    out << e.i << ' ' << e.j << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf))
        << '\n';
  }
}

}  // namespace gtvd
