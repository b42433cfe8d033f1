#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "ttnav/geometry.hpp"
#include "ttnav/point_cloud.hpp"

namespace ttnav {

struct Aabb {
  Eigen::Vector2d min = Eigen::Vector2d::Zero();
  Eigen::Vector2d max = Eigen::Vector2d::Zero();

  bool contains(const Eigen::Vector2d& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() &&
           p.y() <= max.y();
  }
};

struct Obstacle {
  ConvexPolygon polygon;
  Pose2D pose;
  // World-frame vertices, cached for ray casting and rendering.
  std::vector<Eigen::Vector2d> world_vertices;
};

struct World {
  std::vector<Obstacle> obstacles;
  Aabb bounds;

  void add_obstacle(ConvexPolygon poly, const Pose2D& pose);
};

struct LidarConfig {
  int n_beams = 360;
  double fov = 2.0 * M_PI;
  double max_range = 20.0;
  Eigen::Vector2d mount_offset = Eigen::Vector2d::Zero();  // tractor frame
  double noise_sigma = 0.0;  // range noise, meters
};

// Casts n_beams rays evenly across the field of view centered on the sensor
// heading (beam midpoints, so a full circle has no duplicate ray). Each beam
// keeps the nearest obstacle intersection within max_range; misses produce
// no point. Range noise is deterministic per (seed, stamp, beam).
PointCloud scan(const World& world, const Pose2D& sensor_pose,
                const LidarConfig& cfg, std::uint64_t seed, int stamp);

// Voxel-grid downsampling: one centroid per occupied cell, cells emitted in
// lexicographic cell order.
PointCloud downsample(const PointCloud& cloud, double voxel);

}  // namespace ttnav
