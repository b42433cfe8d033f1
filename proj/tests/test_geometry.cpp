#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "test_support.hpp"
#include "ttnav/errors.hpp"
#include "ttnav/geometry.hpp"

using namespace ttnav;
using Eigen::Vector2d;

namespace {

ConvexPolygon unit_square() {
  return make_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
}

// Row order of G is construction-dependent; compare as sets.
bool has_halfspace(const ConvexPolygon& poly, const Vector2d& normal, double h) {
  for (int i = 0; i < poly.edge_count(); ++i) {
    if ((poly.G.row(i).transpose() - normal).norm() < 1e-12 &&
        std::abs(poly.h(i) - h) < 1e-12)
      return true;
  }
  return false;
}

}  // namespace

TEST_CASE("make_polygon: unit square half-spaces") {
  const auto sq = unit_square();
  CHECK(sq.edge_count() == 4);
  CHECK(has_halfspace(sq, {0, -1}, 0));
  CHECK(has_halfspace(sq, {1, 0}, 1));
  CHECK(has_halfspace(sq, {0, 1}, 1));
  CHECK(has_halfspace(sq, {-1, 0}, 0));
  CHECK(polygon_invariants_hold(sq));
}

TEST_CASE("make_polygon: tractor-sized rectangle gives 4 half-spaces") {
  const auto rect =
      make_polygon({{0, 0}, {3.35, 0}, {3.35, 1.48}, {0, 1.48}});
  CHECK(rect.edge_count() == 4);
  CHECK(polygon_invariants_hold(rect));
}

TEST_CASE("make_polygon: degenerate and non-convex inputs") {
  CHECK_THROWS_AS(make_polygon({{0, 0}, {0, 0}, {1, 1}}), DegeneratePolygon);
  CHECK_THROWS_AS(make_polygon({{0, 0}, {1, 0}, {2, 0}, {1, 1}}),
                  DegeneratePolygon);  // collinear run
  CHECK_THROWS_AS(
      make_polygon({{0, 0}, {2, 0}, {0.9, 0.1}, {0, 2}}),  // reflex vertex
      NonConvex);
  CHECK_THROWS_AS(make_polygon({{0, 0}, {0, 1}, {1, 1}, {1, 0}}),  // clockwise
                  NonConvex);
}

TEST_CASE("make_polygon: random polygons satisfy the type invariants") {
  RngStream rng(42);
  for (int i = 0; i < 200; ++i) {
    CHECK(polygon_invariants_hold(testing::random_polygon(rng)));
  }
}

TEST_CASE("transform_point_to_local: pinned values") {
  const Pose2D identity_shift = Pose2D::from_xytheta(1, 0, 0);
  CHECK(transform_point_to_local({2, 0}, identity_shift).isApprox(Vector2d(1, 0)));

  const Pose2D quarter = Pose2D::from_xytheta(0, 0, M_PI / 2);
  CHECK((transform_point_to_local({0, 1}, quarter) - Vector2d(1, 0)).norm() <
        1e-15);

  const Pose2D any = Pose2D::from_xytheta(3.7, -1.2, 0.9);
  CHECK(transform_point_to_local(any.t, any).norm() < 1e-15);
}

TEST_CASE("transform round trip within 1e-12") {
  RngStream rng(7);
  for (int i = 0; i < 100; ++i) {
    const Pose2D pose = testing::random_pose(rng);
    CHECK(pose.is_rigid());
    const Vector2d p(rng.uniform(-20, 20), rng.uniform(-20, 20));
    const Vector2d back =
        transform_point_to_world(transform_point_to_local(p, pose), pose);
    CHECK((back - p).norm() < 1e-12);
  }
}

TEST_CASE("closed_form_distance: face, vertex and interior cases") {
  const auto sq = unit_square();

  auto face = closed_form_distance(sq, {2, 0.5});
  CHECK(face.distance == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(face.closest_point.isApprox(Vector2d(1, 0.5)));

  auto corner = closed_form_distance(sq, {2, 2});
  CHECK(corner.distance == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(corner.closest_point.isApprox(Vector2d(1, 1)));

  auto inside = closed_form_distance(sq, {0.5, 0.5});
  CHECK(inside.distance == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("closed_form_distance: sign matches half-space membership") {
  RngStream rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto poly = testing::random_polygon(rng);
    const Vector2d p(rng.uniform(-6, 6), rng.uniform(-6, 6));
    const bool member = point_inside(poly, p);
    const double d = closed_form_distance(poly, p).distance;
    CHECK(member == (d <= 1e-12));
    // Closest point lies on the boundary.
    const Vector2d cp = closed_form_distance(poly, p).closest_point;
    CHECK(std::abs(closed_form_distance(poly, cp).distance) < 1e-9);
  }
}

TEST_CASE("solve_dual_bcd: unit square face point") {
  const auto sq = unit_square();
  const auto sol = solve_dual_bcd(sq, {2, 0.5}, Pose2D::identity());
  CHECK(sol.converged);
  CHECK(sol.distance == doctest::Approx(1.0).epsilon(1e-6));
  // mu mass only on the x<=1 face.
  for (int i = 0; i < sq.edge_count(); ++i) {
    const bool is_right_face = (sq.G.row(i).transpose() - Vector2d(1, 0)).norm() < 1e-9;
    if (!is_right_face) CHECK(sol.mu(i) < 1e-5);
  }
}

TEST_CASE("solve_dual_bcd: boundary point gives zero distance") {
  const auto sq = unit_square();
  const auto sol = solve_dual_bcd(sq, {1.0, 0.5}, Pose2D::identity());
  CHECK(std::abs(sol.distance) < 1e-6);
  CHECK(std::abs(sol.mu.dot(sq.G * Vector2d(1.0, 0.5) - sq.h)) < 1e-6);
}

TEST_CASE("solve_dual_bcd: vertex-region point uses exactly two faces") {
  const auto sq = unit_square();
  const auto sol = solve_dual_bcd(sq, {2, 2}, Pose2D::identity());
  CHECK(sol.converged);
  CHECK(sol.distance == doctest::Approx(std::sqrt(2.0)).epsilon(1e-5));
  int nonzero = 0;
  for (int i = 0; i < sq.edge_count(); ++i)
    if (sol.mu(i) > 1e-6) ++nonzero;
  CHECK(nonzero == 2);
}

TEST_CASE("solve_dual_bcd: rejects non-positive penalty") {
  const auto sq = unit_square();
  BcdSettings bad;
  bad.penalty_weight = 0.0;
  CHECK_THROWS_AS(solve_dual_bcd(sq, {2, 0.5}, Pose2D::identity(), bad),
                  InvalidPenalty);
}

TEST_CASE("solve_dual_bcd: oracle equivalence on random exterior points") {
  RngStream rng(101);
  double max_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto poly = testing::random_polygon(rng);
    const Vector2d p = testing::random_exterior_point(rng, poly);
    const auto sol = solve_dual_bcd(poly, p, Pose2D::identity());
    const double oracle = closed_form_distance(poly, p).distance;
    max_err = std::max(max_err, std::abs(sol.distance - oracle));
    CHECK(sol.mu.minCoeff() >= 0.0);
    CHECK(sol.lambda.norm() <= 1.0 + 1e-9);
  }
  CHECK(max_err < 1e-5);
}

TEST_CASE("solve_dual_bcd: penalized objective is monotone non-increasing") {
  RngStream rng(55);
  for (int i = 0; i < 50; ++i) {
    const auto poly = testing::random_polygon(rng);
    const Vector2d p = testing::random_exterior_point(rng, poly);
    std::vector<double> trace;
    BcdSettings settings;
    settings.objective_trace = &trace;
    solve_dual_bcd(poly, p, Pose2D::identity(), settings);
    for (std::size_t k = 1; k < trace.size(); ++k)
      CHECK(trace[k] <= trace[k - 1] + 1e-12);
  }
}

TEST_CASE("recover_lambda: pinned values and rotation equivariance") {
  const auto sq = unit_square();
  CHECK(recover_lambda(Eigen::VectorXd::Zero(4), sq, Pose2D::identity()).norm() ==
        0.0);

  const auto sol = solve_dual_bcd(sq, {2, 0.5}, Pose2D::identity());
  const Vector2d lam = recover_lambda(sol.mu, sq, Pose2D::identity());
  CHECK((lam - Vector2d(-1, 0)).norm() < 1e-5);
  // Direction agrees with (closest point - query point) from the oracle.
  const auto cf = closed_form_distance(sq, {2, 0.5});
  const Vector2d dir = (cf.closest_point - Vector2d(2, 0.5)).normalized();
  CHECK((lam - dir).norm() < 1e-5);

  // Same local configuration under a rotated pose: lambda rotates with it.
  const Pose2D rot = Pose2D::from_xytheta(0, 0, M_PI / 2);
  const auto sol_rot = solve_dual_bcd(sq, {2, 0.5}, rot);
  CHECK((sol_rot.lambda - rot.R * lam).norm() < 1e-5);
}

TEST_CASE("recover_lambda: unit norm at exterior optima") {
  RngStream rng(202);
  for (int i = 0; i < 200; ++i) {
    const auto poly = testing::random_polygon(rng);
    const Vector2d p = testing::random_exterior_point(rng, poly);
    const auto sol = solve_dual_bcd(poly, p, Pose2D::identity());
    if (!sol.converged) continue;
    const double norm = recover_lambda(sol.mu, poly, Pose2D::identity()).norm();
    CHECK(norm > 1.0 - 1e-4);
    CHECK(norm <= 1.0 + 1e-4);
  }
}

TEST_CASE("translation invariance of local-frame distances") {
  RngStream rng(303);
  for (int i = 0; i < 100; ++i) {
    const auto poly = testing::random_polygon(rng);
    const Pose2D pose = testing::random_pose(rng);
    const Vector2d world_point(rng.uniform(-15, 15), rng.uniform(-15, 15));
    const double base =
        closed_form_distance(poly, transform_point_to_local(world_point, pose))
            .distance;

    // Apply an extra rigid transform to both the pose and the world point.
    const Pose2D extra = testing::random_pose(rng);
    Pose2D moved;
    moved.R = extra.R * pose.R;
    moved.t = extra.R * pose.t + extra.t;
    const Vector2d moved_point = transform_point_to_world(world_point, extra);
    const double after =
        closed_form_distance(poly, transform_point_to_local(moved_point, moved))
            .distance;
    CHECK(after == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("min_distance_to_cloud_exact: reductions and errors") {
  const auto sq = unit_square();
  const Pose2D id = Pose2D::identity();

  PointCloud single;
  single.points = {{2, 0.5}};
  CHECK(min_distance_to_cloud_exact(sq, id, single) == doctest::Approx(1.0));

  PointCloud two;
  two.points = {{4, 0.5}, {1.2, 0.5}};
  CHECK(min_distance_to_cloud_exact(sq, id, two) ==
        doctest::Approx(0.2).epsilon(1e-9));

  PointCloud mixed;
  mixed.points = {{5, 5}, {0.5, 0.5}, {3, 0}};
  CHECK(min_distance_to_cloud_exact(sq, id, mixed) < 0.0);

  CHECK_THROWS_AS(min_distance_to_cloud_exact(sq, id, PointCloud{}), EmptyCloud);
}

TEST_CASE("polygons_overlap: separating axis sanity") {
  const auto sq = unit_square();
  CHECK(polygons_overlap(sq, Pose2D::identity(), sq,
                         Pose2D::from_xytheta(0.5, 0.5, 0.3)));
  CHECK_FALSE(polygons_overlap(sq, Pose2D::identity(), sq,
                               Pose2D::from_xytheta(3.0, 0.0, 0.0)));
  // Touching-but-separated corner case: distinct squares with a gap.
  CHECK_FALSE(polygons_overlap(sq, Pose2D::identity(), sq,
                               Pose2D::from_xytheta(1.01, 1.01, 0.0)));
}
