#include "gtvd/normals.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <ostream>
#include <queue>
#include <string>
#include <tuple>

#include "gtvd/errors.hpp"
#include "gtvd/kdtree.hpp"

namespace gtvd {

bool non_collinear(const Vec3& pi, const Vec3& pk, const Vec3& pl, double tol) {
  const Vec3 a = pi - pk;
  const Vec3 b = pk - pl;
  return a.cross(b).norm() > tol * a.norm() * b.norm();
}

SupportPair select_support_pair(std::size_t node, std::span<const Vec3> positions,
                                std::span<const std::size_t> candidates, double tol) {
  if (candidates.size() >= 2) {
    const Vec3& pi = positions[node];
    for (std::size_t a = 0; a + 1 < candidates.size(); ++a) {
      for (std::size_t b = a + 1; b < candidates.size(); ++b) {
        if (non_collinear(pi, positions[candidates[a]], positions[candidates[b]], tol))
          return {node, candidates[a], candidates[b]};
      }
    }
  }
  throw NoSupportPair(node);
}

RawNormal raw_normal(const Vec3& pi, const Vec3& pk, const Vec3& pl, double tol) {
  // (p_i - p_k) x a with a = p_k - p_l splits into C p_i + d where
  // C x = x x a (C = -[a]_x) and d = a x p_k.
  const Vec3 a = pk - pl;
  RawNormal out;
  out.C << 0.0, a.z(), -a.y(),
          -a.z(), 0.0, a.x(),
           a.y(), -a.x(), 0.0;
  out.d = a.cross(pk);
  const Vec3 cross = out.C * pi + out.d;
  out.norm = cross.norm();
  if (!(out.norm > tol * (pi - pk).norm() * a.norm()) || out.norm == 0.0)
    throw DegenerateInput("collinear triple: normal is undefined");
  out.n = cross / out.norm;
  return out;
}

namespace {

// Undirected union k-NN pairs (i < j) over `positions`.
std::vector<std::pair<std::size_t, std::size_t>> knn_pairs(std::span<const Vec3> positions,
                                                           std::size_t k) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t n = positions.size();
  if (n < 2) return pairs;
  k = std::min(k, n - 1);
  KdTree tree(positions);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t taken = 0;
    for (const auto& nb : tree.knn(positions[i], k + 1)) {
      if (nb.index == i) continue;
      if (taken == k) break;
      pairs.emplace_back(std::min(i, nb.index), std::max(i, nb.index));
      ++taken;
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

}  // namespace

std::vector<int> orient_normals(std::span<const Vec3> positions, std::span<const Vec3> normals,
                                std::size_t k, std::vector<std::pair<std::size_t, std::size_t>>* tree_edges) {
  const std::size_t n = positions.size();
  if (n == 0) throw InvalidArgument("orient_normals needs at least one node");
  if (normals.size() != n) throw InvalidArgument("orient_normals: one normal per position required");
  if (k < 1) throw InvalidArgument("orient_normals: k must be >= 1");

  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (auto [i, j] : knn_pairs(positions, k)) {
    const double cost = 1.0 - std::abs(normals[i].dot(normals[j]));
    adj[i].emplace_back(j, cost);
    adj[j].emplace_back(i, cost);
  }

  std::vector<int> alpha(n, 0);
  std::vector<bool> in_tree(n, false);
  // Roots in order of decreasing z (ties by index).
  std::vector<std::size_t> by_height(n);
  for (std::size_t i = 0; i < n; ++i) by_height[i] = i;
  std::stable_sort(by_height.begin(), by_height.end(),
                   [&](std::size_t a, std::size_t b) { return positions[a].z() > positions[b].z(); });

  // (cost, child, parent); min-heap, ties by child then parent index.
  using Item = std::tuple<double, std::size_t, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (std::size_t root : by_height) {
    if (in_tree[root]) continue;
    alpha[root] = normals[root].z() >= 0.0 ? 1 : -1;
    in_tree[root] = true;
    for (auto [j, c] : adj[root]) heap.emplace(c, j, root);
    while (!heap.empty()) {
      auto [cost, child, parent] = heap.top();
      heap.pop();
      if (in_tree[child]) continue;
      in_tree[child] = true;
      const double agree = (alpha[parent] * normals[parent]).dot(normals[child]);
      alpha[child] = agree >= 0.0 ? 1 : -1;
      if (tree_edges) tree_edges->emplace_back(parent, child);
      for (auto [j, c] : adj[child])
        if (!in_tree[j]) heap.emplace(c, j, child);
    }
  }
  return alpha;
}

NormalLinearization linearize(const Vec3& p_in, const Mat3& C, const Vec3& d, int alpha, double tol) {
  if (alpha != 1 && alpha != -1) throw InvalidArgument("orientation sign must be +1 or -1");
  const double norm = (C * p_in + d).norm();
  if (!(norm > tol) || !std::isfinite(norm))
    throw DegenerateInput("degenerate normal: |C p + d| is below tolerance");
  NormalLinearization lin;
  lin.C = C;
  lin.d = d;
  lin.alpha = alpha;
  lin.norm_in = norm;
  lin.A = C * (alpha / norm);
  lin.b = d * (alpha / norm);
  return lin;
}

PartiteNormals estimate_partite_normals(std::span<const Vec3> positions, const WeightedGraph& graph,
                                        const Bipartition& bp, Color color, std::size_t k, double tol) {
  if (positions.size() != graph.node_count() || bp.size() != graph.node_count())
    throw InvalidArgument("positions, graph and bipartition disagree on node count");
  PartiteNormals out;
  out.color = color;
  out.nodes = bp.members(color);
  const std::vector<std::size_t> others = bp.members(opposite(color));
  std::unique_ptr<KdTree> others_tree;  // built on first fallback

  std::vector<std::optional<RawNormal>> raws(out.nodes.size());
  out.pairs.resize(out.nodes.size());
  std::vector<std::size_t> candidates;
  for (std::size_t a = 0; a < out.nodes.size(); ++a) {
    const std::size_t i = out.nodes[a];
    const Vec3& pi = positions[i];
    candidates.clear();
    for (const auto& nb : graph.neighbors(i))
      if (bp[nb.node] != color) candidates.push_back(nb.node);
    std::sort(candidates.begin(), candidates.end(), [&](std::size_t x, std::size_t y) {
      const double dx = (positions[x] - pi).squaredNorm(), dy = (positions[y] - pi).squaredNorm();
      return dx < dy || (dx == dy && x < y);
    });

    std::optional<SupportPair> pair;
    try {
      pair = select_support_pair(i, positions, candidates, tol);
    } catch (const NoSupportPair&) {
      if (others.size() >= 2) {
        if (!others_tree) {
          std::vector<Vec3> pts;
          pts.reserve(others.size());
          for (auto o : others) pts.push_back(positions[o]);
          others_tree = std::make_unique<KdTree>(pts);
        }
        for (std::size_t kk = std::max<std::size_t>(k, 2);; kk = std::min(2 * kk, others.size())) {
          candidates.clear();
          for (const auto& nb : others_tree->knn(pi, kk)) candidates.push_back(others[nb.index]);
          try {
            pair = select_support_pair(i, positions, candidates, tol);
            break;
          } catch (const NoSupportPair&) {
            if (kk >= others.size()) break;
          }
        }
      }
    }
    if (!pair) {
      out.failed.push_back(i);
      continue;
    }
    out.pairs[a] = pair;
    raws[a] = raw_normal(pi, positions[pair->k], positions[pair->l], tol);
  }

  // Orientation over the nodes that have a normal.
  std::vector<std::size_t> ok;
  std::vector<Vec3> ok_pos, ok_n;
  for (std::size_t a = 0; a < out.nodes.size(); ++a) {
    if (!raws[a]) continue;
    ok.push_back(a);
    ok_pos.push_back(positions[out.nodes[a]]);
    ok_n.push_back(raws[a]->n);
  }
  out.linearizations.resize(out.nodes.size());
  out.oriented.assign(out.nodes.size(), Vec3::Zero());
  if (ok.empty()) return out;
  const std::vector<int> alpha = orient_normals(ok_pos, ok_n, k);
  for (std::size_t s = 0; s < ok.size(); ++s) {
    const std::size_t a = ok[s];
    const RawNormal& r = *raws[a];
    out.linearizations[a] = linearize(positions[out.nodes[a]], r.C, r.d, alpha[s], 0.0);
    out.oriented[a] = alpha[s] * r.n;
  }
  return out;
}

void write_normals(std::ostream& out, const PartiteNormals& normals) {
  auto num = [&](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
  };
  for (std::size_t a = 0; a < normals.nodes.size(); ++a) {
    if (!normals.linearizations[a]) continue;
    const Vec3& n = normals.oriented[a];
    out << normals.nodes[a] << ' ';
    num(n.x());
    out << ' ';
    num(n.y());
    out << ' ';
    num(n.z());
    out << ' ' << normals.linearizations[a]->alpha << ' ' << normals.pairs[a]->k << ' '
        << normals.pairs[a]->l << '\n';
  }
}

}  // namespace gtvd
