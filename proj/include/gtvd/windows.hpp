#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gtvd/cloud.hpp"

namespace gtvd {

// One tile of a large cloud: `core` points belong to exactly one window;
// `members` adds the points of the 26 neighboring grid cells as context.
// Both lists are sorted ascending.
struct SpatialWindow {
  std::vector<std::size_t> core;
  std::vector<std::size_t> members;
};

// Uniform grid over the bounding box, cell size chosen so that no window
// (cell plus one-cell halo) exceeds `node_budget` points when achievable.
// Empty cells produce no window. Every point is core in exactly one window.
std::vector<SpatialWindow> partition_windows(std::span<const Vec3> points, std::size_t node_budget);

}  // namespace gtvd
