#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gtvd {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Ordered, non-empty set of finite 3D positions. Immutable once built; index i
// refers to the same point across every operation that does not resample.
class PointCloud {
 public:
  // Throws InvalidArgument on an empty input or a non-finite coordinate.
  explicit PointCloud(std::vector<Vec3> positions);

  std::size_t size() const noexcept { return positions_.size(); }
  const Vec3& operator[](std::size_t i) const { return positions_[i]; }
  std::span<const Vec3> positions() const noexcept { return positions_; }

  // Stacked [x0 y0 z0 x1 ...] copy, length 3N.
  Eigen::VectorXd stacked() const;
  static PointCloud from_stacked(const Eigen::VectorXd& xyz);

  friend bool operator==(const PointCloud& a, const PointCloud& b) {
    return a.positions_ == b.positions_;
  }

 private:
  std::vector<Vec3> positions_;
};

enum class CloudFormat { Xyz, PlyAscii };

// Guesses the format from the file extension (.xyz/.txt/.pts -> Xyz, .ply ->
// PlyAscii). Throws InvalidArgument for anything else.
CloudFormat format_from_path(const std::filesystem::path& path);
std::string_view format_name(CloudFormat format);

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);

// Parses from an in-memory buffer. Errors carry 1-based line numbers.
PointCloud parse_cloud(std::string_view text, CloudFormat format);

// Coordinates are written in shortest round-trip decimal form, so
// load(save(c)) == c exactly.
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path);
std::string format_cloud(const PointCloud& cloud, CloudFormat format);

// Identifier of the generator behind add_gaussian_noise. Recorded in run
// metadata; changing the sampling algorithm must change this string.
inline constexpr std::string_view kNoiseRngId = "mt19937_64/box-muller/v1";

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

// q = p + e with e ~ N(0, sigma^2 I) drawn independently per axis and point.
PointCloud add_gaussian_noise(const PointCloud& cloud, const NoiseSpec& spec);

// Portable standard-normal sampler: mt19937_64 words mapped to (0,1] doubles
// by their top 53 bits, then Box-Muller. Produces identical streams across
// standard library implementations, unlike std::normal_distribution.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed);
  double operator()();

 private:
  double uniform_open();

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct BoundingBox {
  Vec3 min;
  Vec3 max;
  double diagonal() const { return (max - min).norm(); }
};

BoundingBox bounding_box(std::span<const Vec3> points);

// Uniformly rescales about the box center so the bounding-box diagonal is 1
// and the box center sits at the origin. Rejects zero-extent clouds.
PointCloud normalize_to_unit_diagonal(const PointCloud& cloud);

}  // namespace gtvd
