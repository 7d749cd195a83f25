#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>

#include "gtvd/cloud.hpp"
#include "gtvd/graph.hpp"

namespace gtvd {

// One-sided values are means over the points of the first cloud (ground ->
// test) or the second (test -> ground); symmetric values are their average.
struct C2cResult {
  double ground_to_test = 0.0;
  double test_to_ground = 0.0;
  double symmetric = 0.0;
};

C2cResult c2c(const PointCloud& ground, const PointCloud& test, bool squared);

struct C2pResult {
  double ground_to_test = 0.0;
  double test_to_ground = 0.0;
  double symmetric = 0.0;
  // Points whose tangent plane was undefined (coincident or collinear
  // neighborhood) and contributed their squared C2C distance instead.
  std::size_t degenerate = 0;
};

// Squared point-to-plane distance, where the plane passes through the
// nearest point b of the other cloud with its normal taken from a PCA fit of
// b and its k nearest neighbors.
C2pResult c2p(const PointCloud& ground, const PointCloud& test, std::size_t k = 8);

struct MetricReport {
  C2cResult c2c_dist;  // unsquared
  C2cResult c2c_sq;
  C2pResult c2p_sq;

  double c2c_mean_dist() const { return c2c_dist.symmetric; }
  double c2c_mean_sq() const { return c2c_sq.symmetric; }
  double c2p_mean_sq() const { return c2p_sq.symmetric; }
};

MetricReport evaluate(const PointCloud& ground, const PointCloud& test, std::size_t k = 8);

// Sum over undirected edges of w_ij * |n_i - n_j|_1.
double gtv_value(std::span<const Vec3> normals, const WeightedGraph& graph);

void write_metric_table(std::ostream& out, const MetricReport& report);

inline constexpr const char* kMetricCsvHeader = "model,sigma,c2c_unsq,c2c_sq,c2p,runtime_s";
std::string metric_csv_row(const std::string& model, double sigma, const MetricReport& report,
                           double runtime_s);

}  // namespace gtvd
