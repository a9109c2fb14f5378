#pragma once

#include "roadframe/actuation.hpp"
#include "roadframe/planner.hpp"
#include "roadframe/scenario.hpp"
#include "roadframe/vehicle.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace roadframe {

inline constexpr double kTickDt = 0.01;
inline constexpr int kTicksPerCycle = 10;
inline constexpr double kCycleDt = kTickDt * kTicksPerCycle;

struct TrackSummary {
  int id = 0;
  double s = 0.0;
  double e_y = 0.0;
  double radius = 0.0;
  double speed = 0.0;
};

/// One 10 Hz planner cycle.
struct CycleRecord {
  double time = 0.0;
  int lap = 1;
  int segment = 0;
  bool straight = true;
  bool start_straight = false;  // first straight of the first lap (standstill start)
  double obstacle_ds = std::numeric_limits<double>::quiet_NaN();  // truth s minus nearest active obstacle s
  double clearance = std::numeric_limits<double>::quiet_NaN();    // truth distance to its edge
  EgoState truth;
  EgoState estimate;
  double covariance_trace = 0.0;
  double nees = 0.0;
  std::vector<TrackSummary> tracks;  // confirmed only
  double delta_r = 0.0;
  double v_r = 0.0;
  SolveStatus status = SolveStatus::converged;
  int sqp_iterations = 0;
  int qp_iterations = 0;
  bool relaxed = false;
  std::string frame_hex;

  // Wall-clock seconds. Kept out of log.csv so it stays reproducible.
  double estimator_time = 0.0;
  double perception_time = 0.0;
  double planner_time = 0.0;
  double cycle_time = 0.0;
};

/// One 100 Hz plant/actuation tick.
struct TickRecord {
  double time = 0.0;
  EgoState truth;
  double delta_ref = 0.0;
  double v_ref = 0.0;
  ActuatorOutput actuator;
  bool watchdog = false;
};

struct SimLog {
  std::vector<CycleRecord> cycles;
  std::vector<TickRecord> ticks;
  std::vector<std::string> events;
  bool aborted = false;
  std::string abort_reason;
  double lane_half_width = 0.0;
  double v_cruise = 0.0;
};

struct RunOptions {
  /// Planner and actuation on separate threads paced by a wall clock.
  bool concurrent = false;
  /// Simulated seconds per wall-clock second in concurrent mode.
  double speedup = 1.0;
  /// Stop after this much simulated time (0 = until the laps are done).
  double max_time = 0.0;
};

/// Closed loop: sensors from truth, estimator, perception and tracking,
/// planner, command frame, then ten 100 Hz actuation and plant ticks.
/// Deterministic for a given seed in single-threaded mode.
SimLog run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {});

}  // namespace roadframe
