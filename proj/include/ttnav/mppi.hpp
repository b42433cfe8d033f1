#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "ttnav/distance.hpp"
#include "ttnav/point_cloud.hpp"
#include "ttnav/vehicle.hpp"

namespace ttnav {

using Vector6d = Eigen::Matrix<double, 6, 1>;

// Horizon, sampling and cost weights of the path-integral controller.
struct MppiConfig {
  int horizon = 50;   // N steps
  int samples = 256;  // K rollouts
  double dt = 0.1;

  Eigen::Vector2d sigma_w{2.0, 2.0};  // exploration noise variances (a, zeta)
  double lambda_temp = 1.0;

  Vector6d goal_weights = (Vector6d() << 1, 1, 0.5, 0.5, 0, 0).finished();
  Eigen::Vector2d control_weights{0.1, 0.1};
  Eigen::Vector2d smooth_weights{0.1, 0.1};
  double articulation_weight = 1.0;
  double obstacle_weight = 5.0;    // w_obs, barrier numerator
  double collision_weight = 50.0;  // w_coll, penetration slope
  Vector6d terminal_weights = (Vector6d() << 10, 10, 5, 5, 0, 0).finished();
  double barrier_epsilon = 0.01;  // m

  std::uint64_t seed = 0;
};

// One simulated trajectory under a perturbed control sequence.
struct Rollout {
  std::vector<VehicleState> states;    // N+1, including the shared start
  std::vector<ControlInput> controls;  // N perturbed, limit-clamped controls
  std::vector<double> min_dists;       // N, at states[1..N]
  double cost = 0.0;
};

struct ControllerState {
  std::vector<ControlInput> nominal;  // length N
  int step = 0;
  ControlInput prev_applied;  // smoothness reference for the first move
};

ControllerState make_controller_state(const MppiConfig& cfg);

// Gaussian exploration noise, deterministic per (seed, step, rollout, tau).
// Rollouts draw whole streams; this entry point exists for tests.
Eigen::Vector2d sample_noise(const MppiConfig& cfg, int step, int rollout,
                             int tau);

// All noise draws for one rollout at one controller step, in tau order.
std::vector<Eigen::Vector2d> noise_stream(const MppiConfig& cfg, int step,
                                          int rollout);

// Wrapped goal residual: positions and velocities differ plainly, heading
// and articulation angles wrap to (-pi, pi].
Vector6d goal_residual(const VehicleState& s, const Vector6d& goal);

// Barrier obstacle cost: w_obs / (d + eps) outside, w_coll * |d| at contact
// and inside.
double obstacle_cost(double min_dist, const MppiConfig& cfg);

// Per-tau running cost: goal + control + smoothness + articulation +
// obstacle. The terminal term is applied once at the horizon end by
// evaluate_rollout.
double running_cost(const VehicleState& state, const ControlInput& input,
                    const ControlInput& prev_input, double min_dist,
                    const Vector6d& goal, const MppiConfig& cfg);

using DistanceFn =
    std::function<double(const std::vector<PosedPolygon>& posed)>;

// Propagates the clamped controls from `initial`, accumulating
//   sum_{tau=0..N} [goal + articulation + obstacle](s_tau)
// + sum_{tau=0..N-1} [control + smoothness](u_tau)
// + terminal(s_N),
// where the obstacle term at the shared start state uses initial_dist.
Rollout evaluate_rollout(const VehicleState& initial,
                         std::vector<ControlInput> controls,
                         const ControlInput& prev_applied, double initial_dist,
                         const Vector6d& goal, const MppiConfig& cfg,
                         const VehicleParams& params,
                         const DistanceFn& distance_fn);

// Importance-sampled update: weights exp(-(J - J_min)/lambda), normalized,
// averaged over the sampled controls. Throws DegenerateWeights when every
// cost is infinite.
std::vector<ControlInput> update_controls(const std::vector<Rollout>& rollouts,
                                          const MppiConfig& cfg,
                                          const VehicleParams& params);

// Exponential weights for a raw cost vector (exposed for the algebraic
// property tests).
Eigen::VectorXd mppi_weights(const Eigen::VectorXd& costs, double lambda_temp);

struct StepDiagnostics {
  double best_cost = 0;
  double mean_cost = 0;
  double min_dist_best = 0;  // smallest clearance along the best rollout
  double initial_dist = 0;
  double wall_ms = 0;
};

struct ControlDecision {
  ControlInput input;
  StepDiagnostics diagnostics;
};

// One receding-horizon update: sample K rollouts from `current`, reweight,
// emit the first control of the updated nominal sequence, then shift it
// (padding the tail with a copy of the last entry). Rollouts run in
// parallel when `parallel` is true; results are identical either way since
// every rollout owns its seed stream and the reduction order is fixed.
ControlDecision control_step(ControllerState& ctrl, const VehicleState& current,
                             const PointCloud& cloud, const Vector6d& goal,
                             const MppiConfig& cfg, const VehicleParams& params,
                             const FootprintDistance& distance,
                             bool parallel = true);

// Rollout evaluation shared by control_step and the benchmark: fills
// `rollouts` (size K) from the nominal sequence. Exposed so the serial
// reference and the OpenMP path can be compared directly.
void evaluate_rollouts(const ControllerState& ctrl, const VehicleState& current,
                       const Vector6d& goal, const MppiConfig& cfg,
                       const VehicleParams& params, const DistanceFn& distance_fn,
                       double initial_dist, std::vector<Rollout>& rollouts,
                       bool parallel);

}  // namespace ttnav
