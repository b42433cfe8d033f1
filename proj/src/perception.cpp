#include "ttnav/perception.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "ttnav/errors.hpp"
#include "ttnav/rng.hpp"

namespace ttnav {

void World::add_obstacle(ConvexPolygon poly, const Pose2D& pose) {
  Obstacle obs;
  obs.world_vertices.reserve(poly.vertices.size());
  for (const auto& v : poly.vertices)
    obs.world_vertices.push_back(transform_point_to_world(v, pose));
  obs.polygon = std::move(poly);
  obs.pose = pose;
  obstacles.push_back(std::move(obs));
}

namespace {

// Ray (origin, dir, t in (0, t_max]) against segment ab; returns hit t or
// infinity.
double ray_segment(const Eigen::Vector2d& origin, const Eigen::Vector2d& dir,
                   const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double denom = dir.x() * ab.y() - dir.y() * ab.x();
  if (std::abs(denom) < 1e-15) return std::numeric_limits<double>::infinity();
  const Eigen::Vector2d ao = a - origin;
  const double t = (ao.x() * ab.y() - ao.y() * ab.x()) / denom;
  const double s = (ao.x() * dir.y() - ao.y() * dir.x()) / denom;
  if (t <= 0.0 || s < 0.0 || s > 1.0)
    return std::numeric_limits<double>::infinity();
  return t;
}

}  // namespace

PointCloud scan(const World& world, const Pose2D& sensor_pose,
                const LidarConfig& cfg, std::uint64_t seed, int stamp) {
  PointCloud cloud;
  cloud.stamp = stamp;
  const Eigen::Vector2d origin =
      transform_point_to_world(cfg.mount_offset, sensor_pose);
  const double heading = std::atan2(sensor_pose.R(1, 0), sensor_pose.R(0, 0));

  std::vector<Eigen::Vector2d> hits(cfg.n_beams,
                                    Eigen::Vector2d::Constant(
                                        std::numeric_limits<double>::quiet_NaN()));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < cfg.n_beams; ++i) {
    const double angle =
        heading - cfg.fov / 2.0 + cfg.fov * (i + 0.5) / cfg.n_beams;
    const Eigen::Vector2d dir(std::cos(angle), std::sin(angle));
    double best = cfg.max_range;
    bool hit = false;
    for (const auto& obs : world.obstacles) {
      // Bounding-circle reject.
      const Eigen::Vector2d to_center =
          transform_point_to_world(obs.polygon.center, obs.pose) - origin;
      const double proj = to_center.dot(dir);
      const double perp2 = to_center.squaredNorm() - proj * proj;
      const double r = obs.polygon.bounding_radius;
      if (proj < -r || perp2 > r * r) continue;
      const auto& verts = obs.world_vertices;
      const int n = static_cast<int>(verts.size());
      for (int k = 0; k < n; ++k) {
        const double t = ray_segment(origin, dir, verts[k], verts[(k + 1) % n]);
        if (t < best) {
          best = t;
          hit = true;
        }
      }
    }
    if (hit) {
      double range = best;
      if (cfg.noise_sigma > 0.0) {
        RngStream noise(mix_seed(seed, static_cast<std::uint64_t>(stamp),
                                 static_cast<std::uint64_t>(i)));
        range += cfg.noise_sigma * noise.normal();
      }
      hits[i] = origin + range * dir;
    }
  }
  for (const auto& p : hits)
    if (!std::isnan(p.x())) cloud.points.push_back(p);
  return cloud;
}

PointCloud downsample(const PointCloud& cloud, double voxel) {
  if (voxel <= 0.0) throw ConfigError("voxel size must be positive");
  struct Cell {
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    int count = 0;
  };
  std::map<std::pair<long long, long long>, Cell> cells;
  for (const auto& p : cloud.points) {
    const auto key = std::make_pair(
        static_cast<long long>(std::floor(p.x() / voxel)),
        static_cast<long long>(std::floor(p.y() / voxel)));
    auto& cell = cells[key];
    cell.sum += p;
    ++cell.count;
  }
  PointCloud out;
  out.stamp = cloud.stamp;
  out.points.reserve(cells.size());
  for (const auto& [key, cell] : cells) out.points.push_back(cell.sum / cell.count);
  return out;
}

}  // namespace ttnav
