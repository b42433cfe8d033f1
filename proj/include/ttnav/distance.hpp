#pragma once

#include <string>
#include <vector>

#include "ttnav/encoder.hpp"
#include "ttnav/geometry.hpp"
#include "ttnav/point_cloud.hpp"
#include "ttnav/vehicle.hpp"

namespace ttnav {

enum class DistanceMethod { exact, encoder };

DistanceMethod distance_method_from_string(const std::string& name);
std::string to_string(DistanceMethod method);

// Single posed polygon vs cloud with method dispatch. The encoder pointer is
// required for DistanceMethod::encoder. Throws EmptyCloud.
double min_distance_to_cloud(const ConvexPolygon& poly, const Pose2D& pose,
                             const PointCloud& cloud, DistanceMethod method,
                             const EncoderNetwork* net = nullptr);

// Batched minimum-distance queries for a whole footprint against one cloud.
// Queries prune points with the exact bound |p - center| - bounding_radius
// before evaluating the configured method on the survivors, which keeps
// rollout cost proportional to the nearby points only. The prune slack must
// dominate the encoder's worst-case error for the pruned and full results
// to coincide in encoder mode (it is exact for the exact method with any
// slack >= 0).
class FootprintDistance {
 public:
  // nets must parallel params' polygon list (tractor first) when method is
  // encoder; pass {} for exact. empty_cloud_distance is the sentinel
  // returned when the cloud has no points.
  FootprintDistance(const VehicleParams& params, DistanceMethod method,
                    std::vector<EncoderNetwork> nets, double empty_cloud_distance,
                    double prune_slack = 0.25);

  // Minimum signed distance from any body polygon to any cloud point.
  double min_distance(const std::vector<PosedPolygon>& posed,
                      const PointCloud& cloud) const;

  // Brute-force evaluation of every point (no pruning); reference for tests.
  double min_distance_full(const std::vector<PosedPolygon>& posed,
                           const PointCloud& cloud) const;

  DistanceMethod method() const { return method_; }
  double empty_cloud_distance() const { return empty_cloud_distance_; }
  const std::vector<EncoderNetwork>& nets() const { return nets_; }

 private:
  double polygon_min(const ConvexPolygon& poly, const Pose2D& pose,
                     const EncoderNetwork* net, const PointCloud& cloud,
                     double upper_bound) const;

  DistanceMethod method_;
  std::vector<EncoderNetwork> nets_;
  double empty_cloud_distance_;
  double prune_slack_;
};

}  // namespace ttnav
