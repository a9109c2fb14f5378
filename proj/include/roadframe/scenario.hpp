#pragma once

#include "roadframe/actuation.hpp"
#include "roadframe/perception.hpp"
#include "roadframe/planner.hpp"
#include "roadframe/track.hpp"
#include "roadframe/tracker.hpp"
#include "roadframe/vehicle.hpp"

#include <cstdint>
#include <istream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace roadframe {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ObstacleSpec {
  double s = 0.0;
  double e_y = 0.0;
  double radius = 0.7;
  std::vector<int> laps;  // 1-based; empty means every lap

  bool active_in(int lap) const;
};

struct NoiseConfig {
  double gps_sigma = 0.05;
  double gps_rate = 10.0;
  double speed_sigma = 0.05;
  double speed_rate = 100.0;
  double yaw_sigma = 0.01;
  double yaw_rate = 100.0;
  double steer_sigma = 0.002;  // steering encoder, rad
  double lidar_sigma = 0.02;
  double radar_position_sigma = 0.1;
  double radar_rate_sigma = 0.05;
};

struct EncoderConfig {
  int ticks_per_rev = 4096;
  double wheel_radius = 0.26;
  double track_width = 1.2;
};

struct ScenarioConfig {
  std::string track_name = "campus";  // "campus" or a track file path
  std::shared_ptr<const Track> track;
  int laps = 2;
  double v_cruise = 3.0;
  std::vector<ObstacleSpec> obstacles;
  NoiseConfig noise;
  EncoderConfig encoder;
  std::uint64_t seed = 1;
  VehicleParams vehicle;
  PlannerConfig planner;
  ActuationConfig actuation;
  TrackerConfig tracker;
  LidarConfig lidar;
  RadarConfig radar;
  double safety_half_width = 3.0;  // physical road edge; beyond it the run aborts
  double time_limit = 0.0;         // 0 picks a limit from the lap length and cruise speed

  /// Copies cruise speed, vehicle and lane width into the sub-configs and
  /// checks every field. Throws ScenarioError.
  void finalize();
};

/// Line-oriented text format:
///   scenario v1
///   track campus | track <path>
///   laps 2
///   cruise 3.0
///   obstacle <s> <e_y> <radius> [laps...]
///   noise gps|speed|yaw|steer|lidar|radar|radar_rate <sigma> [rate]
///   seed <n>
///   horizon <steps>
///   weight ey|epsi|v|a|omega|obs|bump <value>
///   safety d_safe|r_ego <value>
///   bump <s> <v_limit> <half_length>
///   pid steering|speed <kp> <ki> <kd>
///   vehicle wheelbase|delta_max|a_max|a_min|omega_max|tau_delta|tau_v|v_max <value>
/// `#` starts a comment. Relative track paths resolve against `base_dir`.
ScenarioConfig parse_scenario(std::istream& in, const std::string& base_dir = ".");
ScenarioConfig load_scenario(const std::string& path);

/// The nominal two-lap campus run with the first-lap obstacle.
ScenarioConfig nominal_scenario();

}  // namespace roadframe
