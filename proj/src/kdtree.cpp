#include "gtvd/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace gtvd {

namespace {

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), order_(points.size()),
      leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
    build(0, points_.size());
  }
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as one leaf

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];

  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  return id;
}

void KdTree::search(std::size_t node_id, const Vec3& q, std::size_t k,
                    std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[node_id];
  if (node.left == kNone) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      Neighbor cand{idx, (points_[idx] - q).squaredNorm()};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }
  // Left subtree holds coordinates <= split, right holds >= split.
  const double diff = q[node.axis] - node.split;
  const std::size_t near = diff <= 0.0 ? node.left : node.right;
  const std::size_t far = diff <= 0.0 ? node.right : node.left;
  search(near, q, k, heap);
  // Visit on equality too: a tied point with a smaller index may live there.
  if (heap.size() < k || diff * diff <= heap.front().dist2) search(far, q, k, heap);
}

std::vector<Neighbor> KdTree::knn(const Vec3& query, std::size_t k) const {
  std::vector<Neighbor> heap;
  k = std::min(k, points_.size());
  if (k == 0) return heap;
  heap.reserve(k + 1);
  search(0, query, k, heap);
  std::sort_heap(heap.begin(), heap.end(), closer);
  return heap;
}

Neighbor KdTree::nearest(const Vec3& query) const { return knn(query, 1).front(); }

std::vector<Neighbor> brute_force_knn(std::span<const Vec3> points, const Vec3& query,
                                      std::size_t k) {
  std::vector<Neighbor> all;
  all.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) all.push_back({i, (points[i] - query).squaredNorm()});
  std::sort(all.begin(), all.end(), closer);
  all.resize(std::min(k, all.size()));
  return all;
}

}  // namespace gtvd
