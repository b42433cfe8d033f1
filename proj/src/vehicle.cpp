#include "ttnav/vehicle.hpp"

#include <algorithm>
#include <cmath>

#include "ttnav/errors.hpp"

namespace ttnav {

VehicleParams VehicleParams::defaults() {
  VehicleParams p;
  // Tractor frame: rear axle at origin, body from -0.8 m (rear edge) to
  // +2.55 m, width 1.48 m.
  p.tractor_polygons = {make_polygon(
      {{-0.8, -0.74}, {2.55, -0.74}, {2.55, 0.74}, {-0.8, 0.74}})};
  // Trailer frame: axle at origin, hitch at (+L1, 0). Bed 3.6 m long and
  // 1.2 m wide ending 0.5 m before the hitch; drawbar triangle covers the
  // remaining gap.
  p.trailer_polygons = {
      make_polygon({{-2.6, -0.6}, {1.0, -0.6}, {1.0, 0.6}, {-2.6, 0.6}}),
      make_polygon({{1.0, -0.45}, {1.5, 0.0}, {1.0, 0.45}})};
  return p;
}

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * M_PI);
  if (r <= -M_PI) r += 2.0 * M_PI;
  return r;
}

Eigen::Vector4d derivatives(const VehicleState& s, const VehicleParams& p) {
  if (std::abs(s.psi) >= M_PI / 2.0)
    throw SteeringSingularity("steering angle at or beyond pi/2");
  const double tan_psi = std::tan(s.psi);
  Eigen::Vector4d rates;
  rates(0) = s.v * std::cos(s.theta);
  rates(1) = s.v * std::sin(s.theta);
  rates(2) = s.v / p.wheelbase * tan_psi;
  rates(3) = s.v * (-std::sin(s.phi) / p.trailer_length -
                    tan_psi / p.wheelbase -
                    p.hitch_offset * std::cos(s.phi) * tan_psi /
                        (p.wheelbase * p.trailer_length));
  return rates;
}

VehicleState step(const VehicleState& s, const ControlInput& input, double dt,
                  const VehicleParams& p) {
  const double a = std::clamp(input.a, -p.a_limit, p.a_limit);
  const double zeta = std::clamp(input.zeta, -p.zeta_limit, p.zeta_limit);

  const Eigen::Vector4d rates = derivatives(s, p);
  VehicleState next;
  next.x = s.x + rates(0) * dt;
  next.y = s.y + rates(1) * dt;
  next.theta = wrap_angle(s.theta + rates(2) * dt);
  next.phi = wrap_angle(s.phi + rates(3) * dt);
  next.v = std::clamp(s.v + a * dt, p.v_min, p.v_max);
  next.psi = std::clamp(s.psi + zeta * dt, -p.psi_limit, p.psi_limit);
  return next;
}

Pose2D trailer_pose(const VehicleState& s, const VehicleParams& p) {
  const double hitch_x = s.x - p.hitch_offset * std::cos(s.theta);
  const double hitch_y = s.y - p.hitch_offset * std::sin(s.theta);
  const double theta1 = s.theta + s.phi;
  const double x1 = hitch_x - p.trailer_length * std::cos(theta1);
  const double y1 = hitch_y - p.trailer_length * std::sin(theta1);
  return Pose2D::from_xytheta(x1, y1, theta1);
}

void footprint_into(const VehicleState& s, const VehicleParams& p,
                    std::vector<PosedPolygon>& out) {
  out.clear();
  out.reserve(p.polygon_count());
  const Pose2D tractor = Pose2D::from_xytheta(s.x, s.y, s.theta);
  for (const auto& poly : p.tractor_polygons) out.push_back({&poly, tractor});
  const Pose2D trailer = trailer_pose(s, p);
  for (const auto& poly : p.trailer_polygons) out.push_back({&poly, trailer});
}

std::vector<PosedPolygon> footprint(const VehicleState& s,
                                    const VehicleParams& p) {
  std::vector<PosedPolygon> out;
  footprint_into(s, p, out);
  return out;
}

}  // namespace ttnav
