#pragma once

// Shared generators for property-style tests.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "ttnav/geometry.hpp"
#include "ttnav/rng.hpp"

namespace ttnav::testing {

// Random convex polygon: 3..8 vertices placed on a circle (convexity by
// construction) with a minimum angular gap so edges stay well conditioned.
inline ConvexPolygon random_polygon(RngStream& rng, int min_edges = 3,
                                    int max_edges = 8) {
  const int n = rng.uniform_int(min_edges, max_edges);
  const double radius = rng.uniform(0.5, 3.0);
  const Eigen::Vector2d center(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
  std::vector<double> angles;
  while (static_cast<int>(angles.size()) < n) {
    const double a = rng.uniform(0.0, 2.0 * M_PI);
    bool ok = true;
    for (double b : angles) {
      double diff = std::abs(a - b);
      diff = std::min(diff, 2.0 * M_PI - diff);
      if (diff < 0.25) {
        ok = false;
        break;
      }
    }
    if (ok) angles.push_back(a);
  }
  std::sort(angles.begin(), angles.end());
  std::vector<Eigen::Vector2d> verts;
  verts.reserve(n);
  for (double a : angles)
    verts.push_back(center + radius * Eigen::Vector2d(std::cos(a), std::sin(a)));
  return make_polygon(verts);
}

// Point in [-30,30]^2, strictly outside the polygon.
inline Eigen::Vector2d random_exterior_point(RngStream& rng,
                                             const ConvexPolygon& poly) {
  for (;;) {
    const Eigen::Vector2d p(rng.uniform(-30.0, 30.0), rng.uniform(-30.0, 30.0));
    if (!point_inside(poly, p, 1e-6)) return p;
  }
}

inline Pose2D random_pose(RngStream& rng, double span = 10.0) {
  return Pose2D::from_xytheta(rng.uniform(-span, span), rng.uniform(-span, span),
                              rng.uniform(-M_PI, M_PI));
}

}  // namespace ttnav::testing
