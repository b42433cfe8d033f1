#include "ttnav/mppi.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "ttnav/errors.hpp"
#include "ttnav/rng.hpp"

namespace ttnav {

namespace {

int worker_count() {
  if (const char* env = std::getenv("TTNAV_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
}

}  // namespace

ControllerState make_controller_state(const MppiConfig& cfg) {
  ControllerState ctrl;
  ctrl.nominal.assign(cfg.horizon, ControlInput{});
  return ctrl;
}

std::vector<Eigen::Vector2d> noise_stream(const MppiConfig& cfg, int step,
                                          int rollout) {
  RngStream rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(step),
                         static_cast<std::uint64_t>(rollout)));
  const double std_a = std::sqrt(cfg.sigma_w(0));
  const double std_zeta = std::sqrt(cfg.sigma_w(1));
  std::vector<Eigen::Vector2d> draws(cfg.horizon);
  for (int tau = 0; tau < cfg.horizon; ++tau) {
    draws[tau].x() = std_a > 0.0 ? std_a * rng.normal() : 0.0;
    draws[tau].y() = std_zeta > 0.0 ? std_zeta * rng.normal() : 0.0;
  }
  return draws;
}

Eigen::Vector2d sample_noise(const MppiConfig& cfg, int step, int rollout,
                             int tau) {
  return noise_stream(cfg, step, rollout).at(tau);
}

Vector6d goal_residual(const VehicleState& s, const Vector6d& goal) {
  Vector6d r;
  r << s.x - goal(0), s.y - goal(1), wrap_angle(s.theta - goal(2)),
      wrap_angle(s.phi - goal(3)), s.v - goal(4), s.psi - goal(5);
  return r;
}

double obstacle_cost(double min_dist, const MppiConfig& cfg) {
  if (min_dist > 0.0) return cfg.obstacle_weight / (min_dist + cfg.barrier_epsilon);
  return cfg.collision_weight * std::abs(min_dist);
}

namespace {

double state_cost(const VehicleState& s, double min_dist, const Vector6d& goal,
                  const MppiConfig& cfg) {
  const Vector6d r = goal_residual(s, goal);
  return r.dot(cfg.goal_weights.asDiagonal() * r) +
         cfg.articulation_weight * s.phi * s.phi + obstacle_cost(min_dist, cfg);
}

double control_cost(const ControlInput& u, const ControlInput& prev,
                    const MppiConfig& cfg) {
  const Eigen::Vector2d uv(u.a, u.zeta);
  const Eigen::Vector2d du(u.a - prev.a, u.zeta - prev.zeta);
  return uv.dot(cfg.control_weights.asDiagonal() * uv) +
         du.dot(cfg.smooth_weights.asDiagonal() * du);
}

}  // namespace

double running_cost(const VehicleState& state, const ControlInput& input,
                    const ControlInput& prev_input, double min_dist,
                    const Vector6d& goal, const MppiConfig& cfg) {
  return state_cost(state, min_dist, goal, cfg) +
         control_cost(input, prev_input, cfg);
}

Rollout evaluate_rollout(const VehicleState& initial,
                         std::vector<ControlInput> controls,
                         const ControlInput& prev_applied, double initial_dist,
                         const Vector6d& goal, const MppiConfig& cfg,
                         const VehicleParams& params,
                         const DistanceFn& distance_fn) {
  const int horizon = static_cast<int>(controls.size());
  Rollout rollout;
  rollout.controls = std::move(controls);
  rollout.states.reserve(horizon + 1);
  rollout.states.push_back(initial);
  rollout.min_dists.reserve(horizon);

  double cost = state_cost(initial, initial_dist, goal, cfg);
  std::vector<PosedPolygon> posed;
  ControlInput prev = prev_applied;
  for (int tau = 0; tau < horizon; ++tau) {
    // Clamp before stepping so the rollout and the later averaging both use
    // dynamically feasible inputs.
    ControlInput& u = rollout.controls[tau];
    u.a = std::clamp(u.a, -params.a_limit, params.a_limit);
    u.zeta = std::clamp(u.zeta, -params.zeta_limit, params.zeta_limit);

    const VehicleState next = step(rollout.states.back(), u, cfg.dt, params);
    footprint_into(next, params, posed);
    const double d = distance_fn(posed);
    rollout.states.push_back(next);
    rollout.min_dists.push_back(d);
    cost += state_cost(next, d, goal, cfg) + control_cost(u, prev, cfg);
    prev = u;
  }

  const Vector6d r_term = goal_residual(rollout.states.back(), goal);
  cost += r_term.dot(cfg.terminal_weights.asDiagonal() * r_term);
  rollout.cost = cost;
  return rollout;
}

Eigen::VectorXd mppi_weights(const Eigen::VectorXd& costs, double lambda_temp) {
  const double baseline = costs.minCoeff();
  if (!std::isfinite(baseline))
    throw DegenerateWeights("every rollout cost is infinite");
  Eigen::VectorXd w =
      ((costs.array() - baseline) / -lambda_temp).exp();
  const double total = w.sum();
  return w / total;
}

std::vector<ControlInput> update_controls(const std::vector<Rollout>& rollouts,
                                          const MppiConfig& cfg,
                                          const VehicleParams& params) {
  if (rollouts.empty()) throw DegenerateWeights("no rollouts to average");
  Eigen::VectorXd costs(rollouts.size());
  for (std::size_t k = 0; k < rollouts.size(); ++k) costs(k) = rollouts[k].cost;
  const Eigen::VectorXd w = mppi_weights(costs, cfg.lambda_temp);

  const int horizon = static_cast<int>(rollouts.front().controls.size());
  std::vector<ControlInput> nominal(horizon);
  for (int tau = 0; tau < horizon; ++tau) {
    double a = 0.0, zeta = 0.0;
    for (std::size_t k = 0; k < rollouts.size(); ++k) {
      a += w(k) * rollouts[k].controls[tau].a;
      zeta += w(k) * rollouts[k].controls[tau].zeta;
    }
    nominal[tau].a = std::clamp(a, -params.a_limit, params.a_limit);
    nominal[tau].zeta = std::clamp(zeta, -params.zeta_limit, params.zeta_limit);
  }
  return nominal;
}

void evaluate_rollouts(const ControllerState& ctrl, const VehicleState& current,
                       const Vector6d& goal, const MppiConfig& cfg,
                       const VehicleParams& params, const DistanceFn& distance_fn,
                       double initial_dist, std::vector<Rollout>& rollouts,
                       bool parallel) {
  rollouts.resize(cfg.samples);
  const int threads = parallel ? worker_count() : 1;
#pragma omp parallel for schedule(static) num_threads(threads) if (parallel)
  for (int k = 0; k < cfg.samples; ++k) {
    const auto noise = noise_stream(cfg, ctrl.step, k);
    std::vector<ControlInput> perturbed(cfg.horizon);
    for (int tau = 0; tau < cfg.horizon; ++tau) {
      perturbed[tau].a = ctrl.nominal[tau].a + noise[tau].x();
      perturbed[tau].zeta = ctrl.nominal[tau].zeta + noise[tau].y();
    }
    rollouts[k] =
        evaluate_rollout(current, std::move(perturbed), ctrl.prev_applied,
                         initial_dist, goal, cfg, params, distance_fn);
  }
}

ControlDecision control_step(ControllerState& ctrl, const VehicleState& current,
                             const PointCloud& cloud, const Vector6d& goal,
                             const MppiConfig& cfg, const VehicleParams& params,
                             const FootprintDistance& distance, bool parallel) {
  const auto t0 = std::chrono::steady_clock::now();

  if (static_cast<int>(ctrl.nominal.size()) != cfg.horizon)
    ctrl.nominal.resize(cfg.horizon, ControlInput{});

  const DistanceFn distance_fn = [&](const std::vector<PosedPolygon>& posed) {
    return distance.min_distance(posed, cloud);
  };

  // The start state is shared by all rollouts; compute its clearance once.
  const double initial_dist = distance_fn(footprint(current, params));

  static thread_local std::vector<Rollout> rollouts;
  evaluate_rollouts(ctrl, current, goal, cfg, params, distance_fn, initial_dist,
                    rollouts, parallel);

  ctrl.nominal = update_controls(rollouts, cfg, params);

  ControlDecision decision;
  decision.input = ctrl.nominal.front();

  std::size_t best = 0;
  double mean = 0.0;
  for (std::size_t k = 0; k < rollouts.size(); ++k) {
    mean += rollouts[k].cost;
    if (rollouts[k].cost < rollouts[best].cost) best = k;
  }
  decision.diagnostics.best_cost = rollouts[best].cost;
  decision.diagnostics.mean_cost = mean / static_cast<double>(rollouts.size());
  double min_d = initial_dist;
  for (double d : rollouts[best].min_dists) min_d = std::min(min_d, d);
  decision.diagnostics.min_dist_best = min_d;
  decision.diagnostics.initial_dist = initial_dist;

  // Receding horizon: drop the applied control, repeat the last entry.
  if (ctrl.nominal.size() > 1) {
    std::rotate(ctrl.nominal.begin(), ctrl.nominal.begin() + 1,
                ctrl.nominal.end());
    ctrl.nominal.back() = ctrl.nominal[ctrl.nominal.size() - 2];
  }
  ctrl.prev_applied = decision.input;
  ++ctrl.step;

  const auto t1 = std::chrono::steady_clock::now();
  decision.diagnostics.wall_ms =
      std::chrono::duration<double, std::milli>(t1 - t0).count();
  return decision;
}

}  // namespace ttnav
