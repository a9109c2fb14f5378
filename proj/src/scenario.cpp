#include "roadframe/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace roadframe {

bool ObstacleSpec::active_in(int lap) const {
  return laps.empty() || std::find(laps.begin(), laps.end(), lap) != laps.end();
}

void ScenarioConfig::finalize() {
  auto fail = [](const std::string& what) { throw ScenarioError(what); };
  if (!track) {
    if (track_name != "campus") fail("track '" + track_name + "' was not loaded");
    track = std::make_shared<const Track>(build_campus_loop());
  }
  if (!track->closed()) fail("track does not close; laps need a closed loop");
  if (laps < 1) fail("laps must be >= 1");
  if (!(v_cruise > 0.0) || !std::isfinite(v_cruise)) fail("cruise speed must be > 0");
  if (!(safety_half_width > track->lane_half_width())) fail("safety half-width must exceed the lane half-width");
  for (const auto& o : obstacles) {
    if (!(o.s >= 0.0 && o.s < track->total_length())) fail("obstacle s outside the track");
    if (!(std::abs(o.e_y) <= track->lane_half_width())) fail("obstacle e_y outside the lane");
    if (!(o.radius > 0.0)) fail("obstacle radius must be > 0");
    for (int lap : o.laps)
      if (lap < 1) fail("obstacle lap numbers start at 1");
  }
  const NoiseConfig& n = noise;
  for (double sigma : {n.gps_sigma, n.speed_sigma, n.yaw_sigma, n.steer_sigma, n.lidar_sigma, n.radar_position_sigma,
                       n.radar_rate_sigma}) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) fail("noise sigmas must be > 0");
  }
  for (double rate : {n.gps_rate, n.speed_rate, n.yaw_rate}) {
    // Sensors are sampled on the 100 Hz tick grid.
    if (!(rate > 0.0 && rate <= 100.0) || std::abs(100.0 / rate - std::round(100.0 / rate)) > 1e-9) {
      fail("sensor rates must divide 100 Hz");
    }
  }
  if (encoder.ticks_per_rev <= 0 || !(encoder.wheel_radius > 0.0) || !(encoder.track_width > 0.0)) {
    fail("encoder parameters must be positive");
  }

  planner.v_cruise = v_cruise;
  planner.lane_half_width = track->lane_half_width();
  planner.vehicle = vehicle;
  actuation.a_min = vehicle.a_min;
  lidar.range_sigma = noise.lidar_sigma;
  radar.position_sigma = noise.radar_position_sigma;
  radar.range_rate_sigma = noise.radar_rate_sigma;
  if (time_limit <= 0.0) time_limit = laps * track->total_length() / (0.3 * v_cruise) + 30.0;
  try {
    vehicle.validate();
    planner.validate();
    actuation.steering.validate();
    actuation.speed.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
}

ScenarioConfig parse_scenario(std::istream& in, const std::string& base_dir) {
  ScenarioConfig cfg;
  std::string line;
  int line_no = 0;
  bool header = false;

  auto fail = [&](const std::string& what) { throw ScenarioError("line " + std::to_string(line_no) + ": " + what); };

  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string keyword;
    if (!(tokens >> keyword)) continue;

    auto number = [&]() {
      double v;
      if (!(tokens >> v)) fail("expected a number after '" + keyword + "'");
      return v;
    };
    auto word = [&]() {
      std::string w;
      if (!(tokens >> w)) fail("expected a name after '" + keyword + "'");
      return w;
    };
    auto integer = [&]() {
      const double v = number();
      if (v != std::floor(v)) fail("expected an integer after '" + keyword + "'");
      return v;
    };

    if (!header) {
      std::string version;
      tokens >> version;
      if (keyword != "scenario" || version != "v1") fail("expected header 'scenario v1'");
      header = true;
    } else if (keyword == "track") {
      cfg.track_name = word();
      if (cfg.track_name == "campus") {
        cfg.track = std::make_shared<const Track>(build_campus_loop());
      } else {
        std::filesystem::path p(cfg.track_name);
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        try {
          cfg.track = std::make_shared<const Track>(load_track(p.string()));
        } catch (const TrackError& e) {
          fail(e.what());
        }
      }
    } else if (keyword == "laps") {
      cfg.laps = static_cast<int>(integer());
    } else if (keyword == "cruise") {
      cfg.v_cruise = number();
    } else if (keyword == "seed") {
      std::string w = word();
      try {
        std::size_t used = 0;
        cfg.seed = std::stoull(w, &used);
        if (used != w.size()) fail("bad seed '" + w + "'");
      } catch (const std::logic_error&) {
        fail("bad seed '" + w + "'");
      }
    } else if (keyword == "obstacle") {
      ObstacleSpec o;
      o.s = number();
      o.e_y = number();
      o.radius = number();
      double lap;
      while (tokens >> lap) {
        if (lap != std::floor(lap)) fail("obstacle laps must be integers");
        o.laps.push_back(static_cast<int>(lap));
      }
      if (!tokens.eof()) fail("obstacle laps must be integers");
      cfg.obstacles.push_back(o);
      continue;
    } else if (keyword == "noise") {
      const std::string sensor = word();
      const double sigma = number();
      double rate = 0.0;
      const bool has_rate = static_cast<bool>(tokens >> rate);
      if (!has_rate && !tokens.eof()) fail("expected a rate after the sigma");
      NoiseConfig& n = cfg.noise;
      if (sensor == "gps") {
        n.gps_sigma = sigma;
        if (has_rate) n.gps_rate = rate;
      } else if (sensor == "speed") {
        n.speed_sigma = sigma;
        if (has_rate) n.speed_rate = rate;
      } else if (sensor == "yaw") {
        n.yaw_sigma = sigma;
        if (has_rate) n.yaw_rate = rate;
      } else if (sensor == "steer" || sensor == "lidar" || sensor == "radar" || sensor == "radar_rate") {
        if (has_rate) fail("sensor '" + sensor + "' has no configurable rate");
        (sensor == "steer"   ? n.steer_sigma
         : sensor == "lidar" ? n.lidar_sigma
         : sensor == "radar" ? n.radar_position_sigma
                             : n.radar_rate_sigma) = sigma;
      } else {
        fail("unknown sensor '" + sensor + "'");
      }
      continue;
    } else if (keyword == "horizon") {
      cfg.planner.horizon_steps = static_cast<int>(integer());
    } else if (keyword == "weight") {
      const std::string name = word();
      const double v = number();
      PlannerConfig& p = cfg.planner;
      if (name == "ey") {
        p.w_ey = v;
      } else if (name == "epsi") {
        p.w_epsi = v;
      } else if (name == "v") {
        p.w_v = v;
      } else if (name == "a") {
        p.w_a = v;
      } else if (name == "omega") {
        p.w_omega = v;
      } else if (name == "obs") {
        p.w_obs = v;
      } else if (name == "bump") {
        p.w_bump = v;
      } else {
        fail("unknown weight '" + name + "'");
      }
    } else if (keyword == "safety") {
      const std::string name = word();
      const double v = number();
      if (name == "d_safe") {
        cfg.planner.d_safe = v;
      } else if (name == "r_ego") {
        cfg.planner.r_ego = v;
      } else {
        fail("unknown safety parameter '" + name + "'");
      }
    } else if (keyword == "bump") {
      SpeedBump b;
      b.s = number();
      b.v_limit = number();
      b.half_length = number();
      cfg.planner.bumps.push_back(b);
    } else if (keyword == "pid") {
      const std::string loop = word();
      PidGains* g = loop == "steering" ? &cfg.actuation.steering : loop == "speed" ? &cfg.actuation.speed : nullptr;
      if (!g) fail("unknown loop '" + loop + "'");
      g->kp = number();
      g->ki = number();
      g->kd = number();
    } else if (keyword == "vehicle") {
      const std::string name = word();
      const double v = number();
      VehicleParams& vp = cfg.vehicle;
      if (name == "wheelbase") {
        vp.wheelbase = v;
      } else if (name == "delta_max") {
        vp.delta_max = v;
      } else if (name == "a_max") {
        vp.a_max = v;
      } else if (name == "a_min") {
        vp.a_min = v;
      } else if (name == "omega_max") {
        vp.omega_delta_max = v;
      } else if (name == "tau_delta") {
        vp.tau_delta = v;
      } else if (name == "tau_v") {
        vp.tau_v = v;
      } else if (name == "v_max") {
        vp.v_max = v;
      } else {
        fail("unknown vehicle parameter '" + name + "'");
      }
    } else {
      fail("unknown keyword '" + keyword + "'");
    }
    std::string extra;
    if (tokens >> extra) fail("trailing token '" + extra + "'");
  }
  if (!header) throw ScenarioError("missing 'scenario v1' header");
  cfg.finalize();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path);
  try {
    return parse_scenario(in, std::filesystem::path(path).parent_path().string());
  } catch (const ScenarioError& e) {
    throw ScenarioError(path + ": " + e.what());
  }
}

ScenarioConfig nominal_scenario() {
  ScenarioConfig cfg;
  cfg.obstacles.push_back({200.0, 0.0, 0.7, {1}});
  cfg.finalize();
  return cfg;
}

}  // namespace roadframe
