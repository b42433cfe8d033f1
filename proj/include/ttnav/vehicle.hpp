#pragma once

#include <Eigen/Core>
#include <vector>

#include "ttnav/geometry.hpp"

namespace ttnav {

// Geometry and limits of the articulated tractor-trailer. Body polygons are
// expressed in their body frames: tractor frame at the rear axle, trailer
// frame at the trailer axle, both with +x forward.
struct VehicleParams {
  double wheelbase = 1.9;        // L0, tractor wheelbase
  double trailer_length = 1.5;   // L1, hitch point to trailer axle
  double hitch_offset = 0.5;     // Lh, rear axle to hitch point

  std::vector<ConvexPolygon> tractor_polygons;
  std::vector<ConvexPolygon> trailer_polygons;

  double v_min = -2.0, v_max = 3.0;  // m/s
  double psi_limit = 0.6;            // rad
  double a_limit = 1.5;              // m/s^2
  double zeta_limit = 1.0;           // rad/s
  double phi_limit = 1.2;            // rad, jackknife bound used for validation

  // 3.35 x 1.48 m tractor with the rear axle 0.8 m from its rear edge;
  // 1.2 x 3.6 m trailer bed laterally centered on the trailer axis plus a
  // triangular drawbar reaching the hitch.
  static VehicleParams defaults();

  int polygon_count() const {
    return static_cast<int>(tractor_polygons.size() + trailer_polygons.size());
  }
};

// Augmented state [x, y, theta, phi, v, psi].
struct VehicleState {
  double x = 0, y = 0;
  double theta = 0;  // tractor heading
  double phi = 0;    // articulation angle theta1 - theta
  double v = 0;      // longitudinal velocity
  double psi = 0;    // steering angle
};

struct ControlInput {
  double a = 0;     // longitudinal acceleration
  double zeta = 0;  // steering rate
};

// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

// Continuous-time rates (xdot, ydot, thetadot, phidot) of the kinematic
// model at the state's stored (v, psi). Throws SteeringSingularity when
// |psi| >= pi/2.
Eigen::Vector4d derivatives(const VehicleState& state, const VehicleParams& params);

// One forward-Euler step: pose/articulation integrate with the pre-update
// (v, psi), then the first-order actuator states update, then v and psi are
// clamped and angles wrapped. Inputs are clamped to actuator limits first.
VehicleState step(const VehicleState& state, const ControlInput& input, double dt,
                  const VehicleParams& params);

// Trailer frame pose: hitch at (x - Lh cos(theta), y - Lh sin(theta)),
// heading theta + phi, axle one trailer length behind the hitch.
Pose2D trailer_pose(const VehicleState& state, const VehicleParams& params);

struct PosedPolygon {
  const ConvexPolygon* polygon = nullptr;
  Pose2D pose;
};

// All body polygons with their world poses; tractor polygons first.
std::vector<PosedPolygon> footprint(const VehicleState& state,
                                    const VehicleParams& params);
void footprint_into(const VehicleState& state, const VehicleParams& params,
                    std::vector<PosedPolygon>& out);

}  // namespace ttnav
