#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "ttnav/errors.hpp"
#include "ttnav/mppi.hpp"
#include "ttnav/perception.hpp"

using namespace ttnav;

namespace {

FootprintDistance exact_distance(const VehicleParams& params,
                                 double empty_sentinel = 20.0) {
  return FootprintDistance(params, DistanceMethod::exact, {}, empty_sentinel);
}

Vector6d make_goal(double x, double y, double theta) {
  return (Vector6d() << x, y, theta, 0, 0, 0).finished();
}

}  // namespace

TEST_CASE("sample_noise: zero covariance gives exact zeros") {
  MppiConfig cfg;
  cfg.sigma_w = {0.0, 0.0};
  for (int tau = 0; tau < 5; ++tau)
    CHECK(sample_noise(cfg, 0, 3, tau).norm() == 0.0);
}

TEST_CASE("sample_noise: mean and covariance of many draws") {
  MppiConfig cfg;  // sigma_w = diag(2, 2)
  cfg.seed = 5;
  cfg.horizon = 1;
  const int n = 1'000'000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  Eigen::Vector2d sum_sq = Eigen::Vector2d::Zero();
  double cross = 0.0;
  for (int k = 0; k < n; ++k) {
    const Eigen::Vector2d w = sample_noise(cfg, 0, k, 0);
    sum += w;
    sum_sq += w.cwiseProduct(w);
    cross += w.x() * w.y();
  }
  const Eigen::Vector2d mean = sum / n;
  // CLT bound: 3 sigma / sqrt(n), sigma = sqrt(2).
  CHECK(std::abs(mean.x()) < 3.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(mean.y()) < 3.0 * std::sqrt(2.0 / n));
  CHECK(sum_sq.x() / n == doctest::Approx(2.0).epsilon(0.02));
  CHECK(sum_sq.y() / n == doctest::Approx(2.0).epsilon(0.02));
  CHECK(std::abs(cross / n) < 0.02);
}

TEST_CASE("sample_noise: deterministic per (seed, step, rollout, tau)") {
  MppiConfig cfg;
  cfg.seed = 11;
  CHECK(sample_noise(cfg, 2, 7, 13) == sample_noise(cfg, 2, 7, 13));
  CHECK(sample_noise(cfg, 2, 7, 13) != sample_noise(cfg, 2, 8, 13));
  CHECK(sample_noise(cfg, 2, 7, 13) != sample_noise(cfg, 3, 7, 13));
}

TEST_CASE("running_cost: pinned obstacle terms") {
  MppiConfig cfg;
  VehicleState at_goal;
  const Vector6d goal = Vector6d::Zero();

  // All terms vanish as d grows.
  const double far = running_cost(at_goal, {}, {}, 1e9, goal, cfg);
  CHECK(far == doctest::Approx(0.0).epsilon(1e-6));

  // d = 1, eps = 0.01, w_obs = 5 -> 5 / 1.01.
  const double near = running_cost(at_goal, {}, {}, 1.0, goal, cfg);
  CHECK(near == doctest::Approx(5.0 / 1.01).epsilon(1e-12));

  // d = -0.2, w_coll = 50 -> 10.
  const double inside = running_cost(at_goal, {}, {}, -0.2, goal, cfg);
  CHECK(inside == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("obstacle_cost: monotone in clearance on both branches") {
  MppiConfig cfg;
  double prev = obstacle_cost(0.01, cfg);
  for (double d = 0.1; d < 30.0; d += 0.1) {
    const double cur = obstacle_cost(d, cfg);
    CHECK(cur < prev);
    prev = cur;
  }
  prev = obstacle_cost(0.0, cfg);
  for (double d = -0.1; d > -3.0; d -= 0.1) {
    const double cur = obstacle_cost(d, cfg);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("evaluate_rollout: zero controls from rest has closed-form cost") {
  const auto params = VehicleParams::defaults();
  MppiConfig cfg;
  cfg.horizon = 10;
  const auto dist = exact_distance(params);
  const Vector6d goal = make_goal(3.0, 4.0, 0.5);

  VehicleState rest;
  const DistanceFn fn = [&](const std::vector<PosedPolygon>&) {
    return dist.empty_cloud_distance();
  };
  const auto rollout =
      evaluate_rollout(rest, std::vector<ControlInput>(cfg.horizon), {}, 20.0,
                       goal, cfg, params, fn);

  REQUIRE(rollout.states.size() == cfg.horizon + 1);
  REQUIRE(rollout.min_dists.size() == cfg.horizon);
  const Vector6d r = goal_residual(rest, goal);
  const double goal_term = r.dot(cfg.goal_weights.asDiagonal() * r);
  const double term = r.dot(cfg.terminal_weights.asDiagonal() * r);
  const double obstacle = obstacle_cost(20.0, cfg);
  const double expected = (cfg.horizon + 1) * (goal_term + obstacle) + term;
  CHECK(rollout.cost == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("evaluate_rollout: veering beats driving at a wall") {
  const auto params = VehicleParams::defaults();
  MppiConfig cfg;
  cfg.horizon = 30;
  const auto dist = exact_distance(params);
  PointCloud wall;
  for (double y = -2.0; y <= 2.0; y += 0.05) wall.points.push_back({6.0, y});

  const DistanceFn fn = [&](const std::vector<PosedPolygon>& posed) {
    return dist.min_distance(posed, wall);
  };

  VehicleState start;
  start.v = 2.0;
  const Vector6d goal = make_goal(12.0, 0.0, 0.0);

  std::vector<ControlInput> straight(cfg.horizon);
  std::vector<ControlInput> veer(cfg.horizon);
  for (int tau = 0; tau < cfg.horizon; ++tau) veer[tau].zeta = tau < 10 ? 1.0 : -0.5;

  const auto r_straight =
      evaluate_rollout(start, straight, {}, fn(footprint(start, params)), goal,
                       cfg, params, fn);
  const auto r_veer = evaluate_rollout(start, veer, {},
                                       fn(footprint(start, params)), goal, cfg,
                                       params, fn);
  CHECK(r_straight.cost > r_veer.cost);
}

TEST_CASE("evaluate_rollout: re-simulation reproduces states bit for bit") {
  const auto params = VehicleParams::defaults();
  MppiConfig cfg;
  cfg.horizon = 25;
  cfg.seed = 31;
  VehicleState start;
  start.v = 1.0;
  const DistanceFn fn = [](const std::vector<PosedPolygon>&) { return 5.0; };

  ControllerState ctrl = make_controller_state(cfg);
  std::vector<Rollout> rollouts;
  evaluate_rollouts(ctrl, start, make_goal(5, 5, 0), cfg, params, fn, 5.0,
                    rollouts, false);
  for (const auto& rollout : rollouts) {
    VehicleState s = start;
    for (int tau = 0; tau < cfg.horizon; ++tau) {
      s = step(s, rollout.controls[tau], cfg.dt, params);
      CHECK(s.x == rollout.states[tau + 1].x);
      CHECK(s.y == rollout.states[tau + 1].y);
      CHECK(s.theta == rollout.states[tau + 1].theta);
      CHECK(s.phi == rollout.states[tau + 1].phi);
      CHECK(s.v == rollout.states[tau + 1].v);
      CHECK(s.psi == rollout.states[tau + 1].psi);
    }
  }
}

TEST_CASE("mppi_weights: simplex, baseline invariance, temperature limit") {
  RngStream rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = rng.uniform_int(2, 32);
    Eigen::VectorXd costs(k);
    for (int i = 0; i < k; ++i) costs(i) = rng.uniform(0.0, 100.0);

    const Eigen::VectorXd w = mppi_weights(costs, 1.0);
    CHECK(w.minCoeff() >= 0.0);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));

    // Adding a constant to every cost leaves the weights unchanged.
    const Eigen::VectorXd shifted =
        mppi_weights(costs.array() + 1234.5, 1.0);
    CHECK((w - shifted).cwiseAbs().maxCoeff() < 1e-12);

    // Tiny temperature selects the argmin rollout.
    const Eigen::VectorXd cold = mppi_weights(costs, 1e-6);
    int argmin = 0;
    costs.minCoeff(&argmin);
    CHECK(cold(argmin) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("update_controls: pinned small cases") {
  const auto params = VehicleParams::defaults();
  MppiConfig cfg;
  cfg.horizon = 3;

  Rollout a;
  a.controls = {{0.5, 0.1}, {0.2, -0.2}, {0.0, 0.0}};
  a.cost = 0.0;
  Rollout b;
  b.controls = {{-1.0, 0.4}, {0.0, 0.3}, {1.0, -0.1}};
  b.cost = std::numeric_limits<double>::infinity();

  // K=1: the nominal is that rollout's controls.
  const auto only = update_controls({a}, cfg, params);
  CHECK(only[0].a == doctest::Approx(0.5));
  CHECK(only[1].zeta == doctest::Approx(-0.2));

  // Costs (0, inf): all the weight goes to the first rollout.
  const auto pair = update_controls({a, b}, cfg, params);
  for (int tau = 0; tau < 3; ++tau) {
    CHECK(pair[tau].a == doctest::Approx(a.controls[tau].a));
    CHECK(pair[tau].zeta == doctest::Approx(a.controls[tau].zeta));
  }

  // Equal costs: uniform average.
  Rollout c = b;
  c.cost = 7.0;
  Rollout d = a;
  d.cost = 7.0;
  const auto avg = update_controls({c, d}, cfg, params);
  CHECK(avg[0].a == doctest::Approx(0.5 * (a.controls[0].a + b.controls[0].a)));

  // Every cost infinite: no usable weights.
  Rollout bad = b;
  CHECK_THROWS_AS(update_controls({b, bad}, cfg, params), DegenerateWeights);
}

TEST_CASE("control_step: at the goal with no obstacles the control is small") {
  const auto params = VehicleParams::defaults();
  MppiConfig cfg;
  cfg.samples = 1000;
  cfg.horizon = 50;
  cfg.seed = 17;
  const auto dist = exact_distance(params);
  VehicleState at_goal;
  at_goal.x = 2.0;
  at_goal.y = 1.0;
  auto ctrl = make_controller_state(cfg);
  const auto decision =
      control_step(ctrl, at_goal, PointCloud{}, make_goal(2.0, 1.0, 0.0), cfg,
                   params, dist);
  CHECK(std::abs(decision.input.a) < 0.2);
  CHECK(std::abs(decision.input.zeta) < 0.2);
}

TEST_CASE("control_step: identical seeds give identical controls") {
  const auto params = VehicleParams::defaults();
  MppiConfig cfg;
  cfg.samples = 64;
  cfg.horizon = 20;
  cfg.seed = 23;
  const auto dist = exact_distance(params);
  PointCloud cloud;
  cloud.points = {{8, 1}, {9, -2}, {7, 0.5}};

  VehicleState start;
  auto c1 = make_controller_state(cfg);
  auto c2 = make_controller_state(cfg);
  const auto d1 =
      control_step(c1, start, cloud, make_goal(10, 0, 0), cfg, params, dist);
  const auto d2 =
      control_step(c2, start, cloud, make_goal(10, 0, 0), cfg, params, dist);
  CHECK(d1.input.a == d2.input.a);
  CHECK(d1.input.zeta == d2.input.zeta);
}

TEST_CASE("serial and parallel rollout evaluation agree bitwise") {
  const auto params = VehicleParams::defaults();
  MppiConfig cfg;
  cfg.samples = 48;
  cfg.horizon = 15;
  cfg.seed = 3;
  const auto dist = exact_distance(params);
  PointCloud cloud;
  RngStream rng(8);
  for (int i = 0; i < 200; ++i)
    cloud.points.push_back({rng.uniform(-15, 15), rng.uniform(-15, 15)});

  const DistanceFn fn = [&](const std::vector<PosedPolygon>& posed) {
    return dist.min_distance(posed, cloud);
  };
  VehicleState start;
  start.v = 1.0;
  auto ctrl = make_controller_state(cfg);

  std::vector<Rollout> serial, parallel;
  evaluate_rollouts(ctrl, start, make_goal(5, 0, 0), cfg, params, fn, 10.0,
                    serial, false);
  evaluate_rollouts(ctrl, start, make_goal(5, 0, 0), cfg, params, fn, 10.0,
                    parallel, true);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t k = 0; k < serial.size(); ++k) {
    CHECK(serial[k].cost == parallel[k].cost);
    for (int tau = 0; tau < cfg.horizon; ++tau) {
      CHECK(serial[k].controls[tau].a == parallel[k].controls[tau].a);
      CHECK(serial[k].min_dists[tau] == parallel[k].min_dists[tau]);
    }
  }
}

TEST_CASE("control_step: empty cloud uses the sentinel clearance") {
  const auto params = VehicleParams::defaults();
  MppiConfig cfg;
  cfg.samples = 16;
  cfg.horizon = 10;
  const auto dist = exact_distance(params, 20.0);
  VehicleState start;
  auto ctrl = make_controller_state(cfg);
  const auto decision = control_step(ctrl, start, PointCloud{},
                                     make_goal(5, 0, 0), cfg, params, dist);
  CHECK(decision.diagnostics.initial_dist == 20.0);
}
