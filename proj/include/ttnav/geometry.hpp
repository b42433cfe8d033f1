#pragma once

#include <Eigen/Core>
#include <vector>

#include "ttnav/point_cloud.hpp"

namespace ttnav {

// Rigid 2D transform: world_point = R * local_point + t.
struct Pose2D {
  Eigen::Matrix2d R = Eigen::Matrix2d::Identity();
  Eigen::Vector2d t = Eigen::Vector2d::Zero();

  static Pose2D from_xytheta(double x, double y, double theta);
  static Pose2D identity() { return {}; }

  // det(R) = 1 and R^T R = I within tol.
  bool is_rigid(double tol = 1e-9) const;
};

// Convex polygon as the half-space intersection {x : G x <= h} together with
// its CCW vertex list. Rows of G are unit outward edge normals, so h entries
// and all derived distances are in meters.
struct ConvexPolygon {
  Eigen::Matrix<double, Eigen::Dynamic, 2> G;
  Eigen::VectorXd h;
  std::vector<Eigen::Vector2d> vertices;

  // Cached bounding circle, used to prune far points in batched queries.
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double bounding_radius = 0.0;

  int edge_count() const { return static_cast<int>(G.rows()); }
};

// Builds the (G, h) form from a CCW vertex list.
// Throws DegeneratePolygon (collinear or < 3 distinct vertices after dedup
// at 1e-9) or NonConvex (any clockwise turn).
ConvexPolygon make_polygon(const std::vector<Eigen::Vector2d>& vertices);

// Checks the ConvexPolygon type invariants (unit normals, vertex/half-space
// consistency, each constraint active at exactly two vertices, positive
// area). Used by tests and config validation.
bool polygon_invariants_hold(const ConvexPolygon& poly, double tol = 1e-9);

inline Eigen::Vector2d transform_point_to_local(const Eigen::Vector2d& p,
                                                const Pose2D& pose) {
  return pose.R.transpose() * (p - pose.t);
}

inline Eigen::Vector2d transform_point_to_world(const Eigen::Vector2d& p,
                                                const Pose2D& pose) {
  return pose.R * p + pose.t;
}

struct ClosestPointResult {
  double distance = 0.0;          // signed: negative inside (penetration depth)
  Eigen::Vector2d closest_point;  // on the boundary
};

// Exact point-to-polygon distance in the polygon's local frame.
// Exterior points: Euclidean distance to the nearest edge/vertex (> 0).
// Interior points: negative penetration depth, -min_k(h_k - G_k p).
// Independent of the dual solver; serves as its oracle.
ClosestPointResult closed_form_distance(const ConvexPolygon& poly,
                                        const Eigen::Vector2d& p_local);

// Result of the penalized dual solve. mu >= 0 selects active edges, lambda
// lives in the unit ball and encodes the world-frame distance direction,
// distance is mu^T (G p_local - h) after projecting mu onto the dual
// constraint boundary.
struct DualSolution {
  Eigen::VectorXd mu;
  Eigen::Vector2d lambda = Eigen::Vector2d::Zero();
  double distance = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct BcdSettings {
  double penalty_weight = 100.0;
  int max_iter = 200;
  double tol = 1e-6;
  int mu_steps_per_iter = 5;  // projected-gradient sub-steps on the mu block
  // When set, receives the penalized objective value after every outer
  // iteration (monotone non-increasing).
  std::vector<double>* objective_trace = nullptr;
};

// Inexact block coordinate descent on the penalized dual problem
//   min_{mu >= 0, |lambda| <= 1}  mu^T (h - G p) + w_p |G^T mu + R^T lambda|^2
// alternating a closed-form unit-ball lambda update with projected-gradient
// mu updates. Throws InvalidPenalty when penalty_weight <= 0.
DualSolution solve_dual_bcd(const ConvexPolygon& poly,
                            const Eigen::Vector2d& p_local, const Pose2D& pose,
                            const BcdSettings& settings = {});

// lambda = -R G^T mu, the world-frame distance direction implied by the dual
// equality constraint mu^T G + lambda^T R = 0. Unit norm at an exact dual
// optimum of an exterior point.
Eigen::Vector2d recover_lambda(const Eigen::VectorXd& mu,
                               const ConvexPolygon& poly, const Pose2D& pose);

// Minimum of the exact signed distance over all cloud points for one posed
// polygon. Throws EmptyCloud.
double min_distance_to_cloud_exact(const ConvexPolygon& poly, const Pose2D& pose,
                                   const PointCloud& cloud);

// True iff the local-frame point satisfies G p <= h + tol.
bool point_inside(const ConvexPolygon& poly, const Eigen::Vector2d& p_local,
                  double tol = 0.0);

// Separating-axis overlap test between two posed convex polygons. Boolean
// only; used for scenario validation, not distance queries.
bool polygons_overlap(const ConvexPolygon& a, const Pose2D& pose_a,
                      const ConvexPolygon& b, const Pose2D& pose_b);

// FNV-1a over edge count and the (G, h) bit patterns; identifies which
// polygon a trained encoder belongs to.
std::uint64_t polygon_hash(const ConvexPolygon& poly);

}  // namespace ttnav
