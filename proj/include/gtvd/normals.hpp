#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "gtvd/bipartite.hpp"
#include "gtvd/cloud.hpp"
#include "gtvd/graph.hpp"

namespace gtvd {

// Relative collinearity tolerance: a triple (i, k, l) is usable when
// |(p_i - p_k) x (p_k - p_l)| > tol * |p_i - p_k| * |p_k - p_l|.
inline constexpr double kCollinearityTol = 1e-3;

struct SupportPair {
  std::size_t node;
  std::size_t k;
  std::size_t l;
};

bool non_collinear(const Vec3& pi, const Vec3& pk, const Vec3& pl, double tol = kCollinearityTol);

// Scans candidates in the given (distance) order: k is the first candidate
// that forms a valid triple with some later candidate l, and l is the first
// such partner. Throws NoSupportPair naming `node` when none exists.
SupportPair select_support_pair(std::size_t node, std::span<const Vec3> positions,
                                std::span<const std::size_t> candidates,
                                double tol = kCollinearityTol);

// The plane normal through (p_i, p_k, p_l) written affinely in p_i:
//   C p_i + d = (p_i - p_k) x (p_k - p_l),  C skew-symmetric.
struct RawNormal {
  Vec3 n;       // unit normal
  Mat3 C;
  Vec3 d;
  double norm;  // |C p_i + d|
};

RawNormal raw_normal(const Vec3& pi, const Vec3& pk, const Vec3& pl, double tol = kCollinearityTol);

// Consistent orientation: MST (Prim, cost 1 - |n_i . n_j|) over the k-NN
// graph of the given positions, rooted at the max-z node with its normal
// pointed toward +z; each child's sign makes its normal agree with its
// parent's. Components are oriented independently. Returns +1/-1 per node.
std::vector<int> orient_normals(std::span<const Vec3> positions, std::span<const Vec3> normals,
                                std::size_t k, std::vector<std::pair<std::size_t, std::size_t>>* tree_edges = nullptr);

// n_i = A p_i + b with the normalization and sign frozen at p_in:
// A = alpha C / |C p_in + d|, b = alpha d / |C p_in + d|.
struct NormalLinearization {
  Mat3 C;
  Vec3 d;
  int alpha = 1;
  Mat3 A;
  Vec3 b;
  double norm_in = 0.0;

  Vec3 evaluate(const Vec3& p) const { return A * p + b; }
};

NormalLinearization linearize(const Vec3& p_in, const Mat3& C, const Vec3& d, int alpha,
                              double tol = kCollinearityTol);

// Normals of every node of one color, built from the current positions of
// the opposite color.
struct PartiteNormals {
  Color color = Color::Red;
  std::vector<std::size_t> nodes;                    // global indices of `color` nodes
  std::vector<std::optional<SupportPair>> pairs;     // per entry of `nodes`
  std::vector<std::optional<NormalLinearization>> linearizations;
  std::vector<Vec3> oriented;                        // alpha * raw normal (zero when missing)
  std::vector<std::size_t> failed;                   // global indices without a support pair
};

// Support candidates for node i are its neighbors of the opposite color in
// `graph`, ordered by current distance (ties by index). When those yield no
// valid pair, a k-NN query over all opposite-color nodes is retried with
// k, 2k, 4k, ... capped at that class's size.
PartiteNormals estimate_partite_normals(std::span<const Vec3> positions, const WeightedGraph& graph,
                                        const Bipartition& bp, Color color, std::size_t k,
                                        double tol = kCollinearityTol);

// "node nx ny nz alpha k l" per node with a normal.
void write_normals(std::ostream& out, const PartiteNormals& normals);

}  // namespace gtvd
