#include "gtvd/windows.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "gtvd/errors.hpp"

namespace gtvd {

namespace {

using CellKey = std::array<long, 3>;

std::vector<SpatialWindow> windows_for_cell_size(std::span<const Vec3> points, const Vec3& origin,
                                                 double cell) {
  std::map<CellKey, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 rel = (points[i] - origin) / cell;
    cells[{static_cast<long>(std::floor(rel.x())), static_cast<long>(std::floor(rel.y())),
           static_cast<long>(std::floor(rel.z()))}]
        .push_back(i);
  }
  std::vector<SpatialWindow> out;
  out.reserve(cells.size());
  for (const auto& [key, core] : cells) {
    SpatialWindow w;
    w.core = core;
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          auto it = cells.find({key[0] + dx, key[1] + dy, key[2] + dz});
          if (it != cells.end()) w.members.insert(w.members.end(), it->second.begin(), it->second.end());
        }
    std::sort(w.members.begin(), w.members.end());
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

std::vector<SpatialWindow> partition_windows(std::span<const Vec3> points, std::size_t node_budget) {
  if (points.empty()) throw InvalidArgument("cannot partition an empty point set");
  if (node_budget == 0 || points.size() <= node_budget) {
    SpatialWindow all;
    all.core.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) all.core[i] = i;
    all.members = all.core;
    return {all};
  }
  const BoundingBox box = bounding_box(points);
  const Vec3 extent = box.max - box.min;
  const double longest = extent.maxCoeff();
  if (!(longest > 0.0)) throw DegenerateInput("all points coincide; cannot tile the cloud");

  // First guess: a cell count whose 27-cell windows hold about half the
  // budget for uniformly filled volumes; surfaces usually need fewer cells.
  const double target_cells =
      std::max(1.0, 27.0 * static_cast<double>(points.size()) / (0.5 * static_cast<double>(node_budget)));
  const Vec3 padded = extent.cwiseMax(Vec3::Constant(longest * 1e-3));
  double cell = std::cbrt(padded.prod() / target_cells);
  cell = std::min(cell, longest);

  std::vector<SpatialWindow> best;
  for (int attempt = 0; attempt < 40; ++attempt) {
    best = windows_for_cell_size(points, box.min, cell);
    std::size_t largest = 0;
    for (const auto& w : best) largest = std::max(largest, w.members.size());
    if (largest <= node_budget) break;
    cell *= 0.8;
  }
  return best;
}

}  // namespace gtvd
