#include "ttnav/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ttnav/errors.hpp"

namespace ttnav {

DistanceMethod distance_method_from_string(const std::string& name) {
  if (name == "exact") return DistanceMethod::exact;
  if (name == "encoder") return DistanceMethod::encoder;
  throw ConfigError("unknown distance method: " + name);
}

std::string to_string(DistanceMethod method) {
  return method == DistanceMethod::exact ? "exact" : "encoder";
}

double min_distance_to_cloud(const ConvexPolygon& poly, const Pose2D& pose,
                             const PointCloud& cloud, DistanceMethod method,
                             const EncoderNetwork* net) {
  if (method == DistanceMethod::exact)
    return min_distance_to_cloud_exact(poly, pose, cloud);
  if (!net) throw EncoderMissing("encoder method requested without a network");
  return predict_distance(*net, poly, pose, cloud).min_distance;
}

FootprintDistance::FootprintDistance(const VehicleParams& params,
                                     DistanceMethod method,
                                     std::vector<EncoderNetwork> nets,
                                     double empty_cloud_distance,
                                     double prune_slack)
    : method_(method),
      nets_(std::move(nets)),
      empty_cloud_distance_(empty_cloud_distance),
      prune_slack_(prune_slack) {
  if (method_ == DistanceMethod::encoder) {
    const std::size_t expected =
        params.tractor_polygons.size() + params.trailer_polygons.size();
    if (nets_.size() != expected)
      throw EncoderMissing("need one trained encoder per body polygon");
    std::size_t idx = 0;
    for (const auto& poly : params.tractor_polygons)
      if (nets_[idx++].polygon_id != polygon_hash(poly))
        throw CorruptWeights("encoder/polygon pairing mismatch (tractor)");
    for (const auto& poly : params.trailer_polygons)
      if (nets_[idx++].polygon_id != polygon_hash(poly))
        throw CorruptWeights("encoder/polygon pairing mismatch (trailer)");
  }
}

double FootprintDistance::polygon_min(const ConvexPolygon& poly,
                                      const Pose2D& pose,
                                      const EncoderNetwork* net,
                                      const PointCloud& cloud,
                                      double upper_bound) const {
  const int m = static_cast<int>(cloud.points.size());
  const Eigen::Vector2d center = transform_point_to_world(poly.center, pose);
  const double radius = poly.bounding_radius;

  // Exact lower bound per point; anything provably worse than the current
  // upper bound (plus slack) cannot change the minimum.
  static thread_local std::vector<double> lb;
  lb.resize(m);
  int seed_idx = 0;
  double seed_lb = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    lb[i] = (cloud.points[i] - center).norm() - radius;
    if (lb[i] < seed_lb) {
      seed_lb = lb[i];
      seed_idx = i;
    }
  }
  if (seed_lb > upper_bound + prune_slack_)
    return std::numeric_limits<double>::infinity();

  auto eval_local = [&](const Eigen::MatrixXd& local) -> Eigen::VectorXd {
    if (method_ == DistanceMethod::exact) {
      Eigen::VectorXd out(local.rows());
      for (int i = 0; i < local.rows(); ++i)
        out(i) = closed_form_distance(poly, local.row(i).transpose()).distance;
      return out;
    }
    return encoder_distances_local(*net, poly, local);
  };

  // Seed the bound with the most promising point, then evaluate survivors.
  Eigen::MatrixXd seed_local(1, 2);
  seed_local.row(0) =
      transform_point_to_local(cloud.points[seed_idx], pose).transpose();
  double best = std::min(upper_bound, eval_local(seed_local)(0));

  static thread_local std::vector<int> candidates;
  candidates.clear();
  for (int i = 0; i < m; ++i)
    if (i != seed_idx && lb[i] <= best + prune_slack_) candidates.push_back(i);
  if (!candidates.empty()) {
    Eigen::MatrixXd local(static_cast<int>(candidates.size()), 2);
    for (std::size_t i = 0; i < candidates.size(); ++i)
      local.row(static_cast<int>(i)) =
          transform_point_to_local(cloud.points[candidates[i]], pose).transpose();
    best = std::min(best, eval_local(local).minCoeff());
  }
  return best;
}

double FootprintDistance::min_distance(const std::vector<PosedPolygon>& posed,
                                       const PointCloud& cloud) const {
  if (cloud.empty()) return empty_cloud_distance_;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < posed.size(); ++i) {
    const EncoderNetwork* net =
        method_ == DistanceMethod::encoder ? &nets_[i] : nullptr;
    best = std::min(best, polygon_min(*posed[i].polygon, posed[i].pose, net,
                                      cloud, best));
  }
  return best;
}

double FootprintDistance::min_distance_full(const std::vector<PosedPolygon>& posed,
                                            const PointCloud& cloud) const {
  if (cloud.empty()) return empty_cloud_distance_;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < posed.size(); ++i) {
    if (method_ == DistanceMethod::exact) {
      best = std::min(best, min_distance_to_cloud_exact(*posed[i].polygon,
                                                        posed[i].pose, cloud));
    } else {
      best = std::min(best, predict_distance(nets_[i], *posed[i].polygon,
                                             posed[i].pose, cloud)
                                .min_distance);
    }
  }
  return best;
}

}  // namespace ttnav
