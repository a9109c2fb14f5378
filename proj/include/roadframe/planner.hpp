#pragma once

#include "roadframe/qp.hpp"
#include "roadframe/track.hpp"
#include "roadframe/vehicle.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace roadframe {

struct SpeedBump {
  double s = 0.0;
  double v_limit = 1.5;
  double half_length = 5.0;  // proximity falls linearly to zero this far away
};

struct PlannerConfig {
  int horizon_steps = 20;
  double dt = 0.1;
  double w_ey = 2.0;
  double w_epsi = 1.0;
  double w_v = 1.0;
  double w_a = 0.5;
  double w_omega = 2.0;
  double w_obs = 50.0;
  double terminal_scale = 10.0;
  double v_cruise = 3.0;
  double d_safe = 0.6;
  double r_ego = 0.5;
  double lane_half_width = 2.3;
  int sqp_iters = 3;
  double w_bump = 0.0;
  std::vector<SpeedBump> bumps;
  double terminal_e_psi_max = 0.5;
  double slack_weight = 1e6;
  VehicleParams vehicle;

  double horizon() const { return horizon_steps * dt; }
  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

/// Obstacle in the road frame, moving at constant speed along a constant
/// heading relative to the lane.
struct ObstacleConstraint {
  double s = 0.0;
  double e_y = 0.0;
  double radius = 0.7;
  double speed = 0.0;
  double heading = 0.0;

  /// (s, e_y) after `t` seconds, ignoring lane curvature.
  Eigen::Vector2d position_at(double t) const;
};

struct Trajectory {
  std::vector<EgoState> states;       // N + 1
  std::vector<ControlInput> inputs;   // N
  std::vector<double> stage_costs;    // N, each already multiplied by dt
  double terminal_cost = 0.0;
  std::vector<double> residuals;      // N, largest hard-constraint value at stage k+1
  bool relaxed = false;               // solved through the slack pass

  double total_cost() const;
};

enum class SolveStatus { converged, max_iter, infeasible_fallback };

std::string to_string(SolveStatus s);

struct Command {
  double delta_r = 0.0;
  double v_r = 0.0;
  SolveStatus status = SolveStatus::converged;
  double solve_time = 0.0;
};

struct SolveInfo {
  std::vector<double> merit;  // merit after each accepted iterate, first entry at the initial guess
  int qp_iterations = 0;
  int sqp_iterations = 0;
  bool relaxed = false;
};

struct PlanResult {
  Trajectory trajectory;
  Command command;
  SolveInfo info;
};

/// L(x, u) at time `t` into the horizon (obstacles are propagated to t).
double stage_cost(const EgoState& x, const ControlInput& u, const PlannerConfig& cfg,
                  const std::vector<ObstacleConstraint>& obstacles, const Track& track, double t = 0.0);
double terminal_cost(const EgoState& x, const PlannerConfig& cfg);

/// Forward simulation of an input sequence with cost bookkeeping.
Trajectory rollout(const EgoState& x0, const std::vector<ControlInput>& inputs, const PlannerConfig& cfg,
                   const std::vector<ObstacleConstraint>& obstacles, const Track& track);

/// Sum of dt * L over stages plus E, and its gradient with respect to the
/// stacked inputs (a_0, omega_0, a_1, ...).
double total_cost(const EgoState& x0, const std::vector<ControlInput>& inputs, const PlannerConfig& cfg,
                  const std::vector<ObstacleConstraint>& obstacles, const Track& track);
Eigen::VectorXd cost_gradient(const EgoState& x0, const std::vector<ControlInput>& inputs, const PlannerConfig& cfg,
                              const std::vector<ObstacleConstraint>& obstacles, const Track& track);

/// Previous inputs shifted one stage with the last one repeated.
std::vector<ControlInput> shift_inputs(const std::vector<ControlInput>& inputs);

/// Condensed single-shooting SQP with a fixed iteration budget.
PlanResult solve(const EgoState& x0, const std::vector<ObstacleConstraint>& obstacles, const Track& track,
                 const PlannerConfig& cfg, const Trajectory* warm_start = nullptr);

struct SolutionReport {
  std::vector<std::string> violations;
  double max_defect = 0.0;
  double max_constraint = 0.0;

  bool ok() const { return violations.empty(); }
};

/// Dynamic feasibility, hard bounds and the terminal box.
SolutionReport check_solution(const Trajectory& traj, const PlannerConfig& cfg, const Track& track);

/// Keeps the previous solution for warm starts.
class Planner {
 public:
  Planner(const Track& track, PlannerConfig cfg);

  PlanResult plan(const EgoState& x0, const std::vector<ObstacleConstraint>& obstacles);
  void reset() { has_warm_ = false; }
  const PlannerConfig& config() const { return cfg_; }

 private:
  const Track& track_;
  PlannerConfig cfg_;
  Trajectory last_;
  bool has_warm_ = false;
};

}  // namespace roadframe
