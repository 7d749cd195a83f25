#include "gtvd/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "gtvd/errors.hpp"
#include "gtvd/kdtree.hpp"

namespace gtvd {

namespace {

double one_sided_c2c(const PointCloud& from, const KdTree& to, bool squared) {
  double sum = 0.0;
  for (const auto& p : from.positions()) {
    const double d2 = to.nearest(p).dist2;
    sum += squared ? d2 : std::sqrt(d2);
  }
  return sum / static_cast<double>(from.size());
}

// Mean squared distance from each point of `from` to the tangent plane at
// its nearest point in `to`.
double one_sided_c2p(const PointCloud& from, const KdTree& to, std::size_t k, std::size_t& degenerate) {
  double sum = 0.0;
  for (const auto& a : from.positions()) {
    const Neighbor nb = to.nearest(a);
    const Vec3& b = to.point(nb.index);
    // b plus its k nearest others.
    const auto hood = to.knn(b, k + 1);
    Vec3 centroid = Vec3::Zero();
    for (const auto& h : hood) centroid += to.point(h.index);
    centroid /= static_cast<double>(hood.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& h : hood) {
      const Vec3 c = to.point(h.index) - centroid;
      cov += c * c.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 ev = eig.eigenvalues();  // ascending
    const double scale = ev[2];
    if (hood.size() < 3 || !(scale > 0.0) || ev[1] <= 1e-12 * scale) {
      ++degenerate;
      sum += nb.dist2;
      continue;
    }
    const Vec3 normal = eig.eigenvectors().col(0);
    const double d = (a - b).dot(normal);
    sum += d * d;
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace

C2cResult c2c(const PointCloud& ground, const PointCloud& test, bool squared) {
  const KdTree ground_tree(ground.positions());
  const KdTree test_tree(test.positions());
  C2cResult r;
  r.ground_to_test = one_sided_c2c(ground, test_tree, squared);
  r.test_to_ground = one_sided_c2c(test, ground_tree, squared);
  r.symmetric = 0.5 * (r.ground_to_test + r.test_to_ground);
  return r;
}

C2pResult c2p(const PointCloud& ground, const PointCloud& test, std::size_t k) {
  if (k < 2) throw InvalidArgument("C2P plane fit needs k >= 2");
  const KdTree ground_tree(ground.positions());
  const KdTree test_tree(test.positions());
  C2pResult r;
  r.ground_to_test = one_sided_c2p(ground, test_tree, k, r.degenerate);
  r.test_to_ground = one_sided_c2p(test, ground_tree, k, r.degenerate);
  r.symmetric = 0.5 * (r.ground_to_test + r.test_to_ground);
  return r;
}

MetricReport evaluate(const PointCloud& ground, const PointCloud& test, std::size_t k) {
  MetricReport m;
  m.c2c_dist = c2c(ground, test, false);
  m.c2c_sq = c2c(ground, test, true);
  m.c2p_sq = c2p(ground, test, k);
  return m;
}

double gtv_value(std::span<const Vec3> normals, const WeightedGraph& graph) {
  if (normals.size() != graph.node_count())
    throw InvalidArgument("gtv_value: graph has " + std::to_string(graph.node_count()) + " nodes but " +
                          std::to_string(normals.size()) + " normals were given");
  double total = 0.0;
  for (const auto& e : graph.edges()) total += e.w * (normals[e.i] - normals[e.j]).lpNorm<1>();
  return total;
}

void write_metric_table(std::ostream& out, const MetricReport& r) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::left << std::setw(14) << "metric" << std::right << std::setw(16) << "ground->test"
      << std::setw(16) << "test->ground" << std::setw(16) << "symmetric" << '\n';
  auto row = [&](const char* name, double a, double b, double s) {
    out << std::left << std::setw(14) << name << std::right << std::scientific << std::setprecision(6)
        << std::setw(16) << a << std::setw(16) << b << std::setw(16) << s << '\n';
    out.flags(flags);
  };
  row("c2c_unsq", r.c2c_dist.ground_to_test, r.c2c_dist.test_to_ground, r.c2c_dist.symmetric);
  row("c2c_sq", r.c2c_sq.ground_to_test, r.c2c_sq.test_to_ground, r.c2c_sq.symmetric);
  row("c2p", r.c2p_sq.ground_to_test, r.c2p_sq.test_to_ground, r.c2p_sq.symmetric);
  if (r.c2p_sq.degenerate) out << "c2p degenerate planes: " << r.c2p_sq.degenerate << '\n';
  out.precision(prec);
}

std::string metric_csv_row(const std::string& model, double sigma, const MetricReport& r, double runtime_s) {
  std::ostringstream ss;
  ss.precision(9);
  ss << model << ',' << sigma << ',' << r.c2c_mean_dist() << ',' << r.c2c_mean_sq() << ',' << r.c2p_mean_sq()
     << ',' << runtime_s;
  return ss.str();
}

}  // namespace gtvd
