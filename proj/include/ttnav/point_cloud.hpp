#pragma once

#include <Eigen/Core>
#include <vector>

namespace ttnav {

// World-frame 2D obstacle points for one sensor frame.
struct PointCloud {
  std::vector<Eigen::Vector2d> points;
  int stamp = 0;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

}  // namespace ttnav
