#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gtvd/cloud.hpp"

namespace gtvd {

struct Neighbor {
  std::size_t index;
  double dist2;  // squared Euclidean distance
};

// Exact k-nearest-neighbor index over a fixed point set (axis-aligned median
// splits, full backtracking). Results are ordered by (distance, index), so
// distance ties always resolve toward the smaller point index regardless of
// how the tree happened to be built.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points, std::size_t leaf_size = 8);

  std::size_t size() const noexcept { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  // Up to k nearest points to `query` (fewer if the set is smaller).
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;

  // Nearest point; the tree must be non-empty.
  Neighbor nearest(const Vec3& query) const;

 private:
  struct Node {
    // Leaf iff left == kNone; then [begin, end) indexes into order_.
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t left = kNone;
    std::size_t right = kNone;
    int axis = 0;
    double split = 0.0;
  };
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  std::size_t build(std::size_t begin, std::size_t end);
  void search(std::size_t node, const Vec3& q, std::size_t k, std::vector<Neighbor>& heap) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

// Brute-force reference with the same (distance, index) ordering. Used as the
// oracle in tests and for tiny point sets.
std::vector<Neighbor> brute_force_knn(std::span<const Vec3> points, const Vec3& query,
                                      std::size_t k);

}  // namespace gtvd
