#include "roadframe/sim.hpp"

#include "roadframe/estimator.hpp"
#include "roadframe/perception.hpp"
#include "roadframe/tracker.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <optional>
#include <random>
#include <thread>

namespace roadframe {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

struct Measurement {
  enum class Kind { gps, speed, yaw };
  double stamp = 0.0;
  Kind kind = Kind::gps;
  double a = 0.0;
  double b = 0.0;
};

struct Snapshot {
  double time = 0.0;
  PlantState plant;
  double progress = 0.0;
  double steer_measured = 0.0;
};

int lap_of(double progress, double length) { return static_cast<int>(std::floor(progress / length)) + 1; }

// Plant, actuation controller and sensor synthesis: the 100 Hz side.
class World {
 public:
  explicit World(const ScenarioConfig& cfg)
      : cfg_(cfg), track_(*cfg.track), ctl_(cfg.actuation), rng_(stream(cfg.seed, 1)) {
    const double per_tick = 2.0 * M_PI * cfg_.encoder.wheel_radius / cfg_.encoder.ticks_per_rev;
    wheel_per_tick_ = per_tick;
    gps_every_ = static_cast<int>(std::lround(100.0 / cfg_.noise.gps_rate));
    speed_every_ = static_cast<int>(std::lround(100.0 / cfg_.noise.speed_rate));
    yaw_every_ = static_cast<int>(std::lround(100.0 / cfg_.noise.yaw_rate));
    snap_.steer_measured = measure_steer();
  }

  void receive(const CommandFrame& f, double time) { ctl_.receive(f, time); }

  // Advances from tick index i to i + 1. Returns false on a safety abort.
  bool tick(int i, TickRecord& rec, std::string& abort_reason) {
    const double t = i * kTickDt;
    const EgoState& x = plant_.ego;
    const ActuatorOutput out = ctl_.tick(t, kTickDt, measure_steer(), x.v + gauss(cfg_.noise.speed_sigma));
    const PlantState prev = plant_;
    try {
      plant_ = plant_step(plant_, ctl_.delta_ref(), ctl_.v_ref(), cfg_.vehicle, track_, kTickDt).state;
    } catch (const SingularityError& e) {
      abort_reason = std::string("plant singularity: ") + e.what();
      return false;
    }
    progress_ += track_.s_difference(plant_.ego.s, prev.ego.s);
    const double now = (i + 1) * kTickDt;

    rec.time = now;
    rec.truth = plant_.ego;
    rec.delta_ref = ctl_.delta_ref();
    rec.v_ref = ctl_.v_ref();
    rec.actuator = out;
    rec.watchdog = ctl_.watchdog_tripped();

    sense(i + 1, prev, now);
    {
      std::lock_guard lock(mutex_);
      snap_.time = now;
      snap_.plant = plant_;
      snap_.progress = progress_;
      snap_.steer_measured = measure_steer();
    }
    if (std::abs(plant_.ego.e_y) > cfg_.safety_half_width) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "safety abort: |e_y| = %.3f m beyond %.2f m at t = %.2f s",
                    std::abs(plant_.ego.e_y), cfg_.safety_half_width, now);
      abort_reason = buf;
      return false;
    }
    return true;
  }

  Snapshot snapshot() {
    std::lock_guard lock(mutex_);
    return snap_;
  }

  std::vector<Measurement> drain() {
    std::lock_guard lock(mutex_);
    std::vector<Measurement> out;
    out.swap(pending_);
    return out;
  }

  double progress() const { return progress_; }
  const ActuationController& controller() const { return ctl_; }

 private:
  double gauss(double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng_); }
  double measure_steer() { return plant_.ego.delta + gauss(cfg_.noise.steer_sigma); }

  void sense(int tick_index, const PlantState& prev, double now) {
    // Wheel travel over the tick; the outer wheel covers more ground in a turn.
    const double v_mean = 0.5 * (prev.ego.v + plant_.ego.v);
    const double yaw = v_mean * std::tan(plant_.ego.delta) / cfg_.vehicle.wheelbase;
    const double half = 0.5 * cfg_.encoder.track_width;
    wheel_left_ += (v_mean - half * yaw) * kTickDt;
    wheel_right_ += (v_mean + half * yaw) * kTickDt;

    std::vector<Measurement> fresh;
    if (tick_index % gps_every_ == 0) {
      const CartesianPose pose = track_.frenet_to_cartesian({plant_.ego.s, plant_.ego.e_y, plant_.ego.e_psi});
      fresh.push_back({now, Measurement::Kind::gps, pose.x + gauss(cfg_.noise.gps_sigma),
                       pose.y + gauss(cfg_.noise.gps_sigma)});
    }
    if (tick_index % speed_every_ == 0) {
      const long left = static_cast<long>(std::floor(wheel_left_ / wheel_per_tick_));
      const long right = static_cast<long>(std::floor(wheel_right_ / wheel_per_tick_));
      const double v = encoder_speed(left - ticks_left_, right - ticks_right_, cfg_.encoder.ticks_per_rev,
                                     cfg_.encoder.wheel_radius, speed_every_ * kTickDt);
      ticks_left_ = left;
      ticks_right_ = right;
      fresh.push_back({now, Measurement::Kind::speed, v + gauss(cfg_.noise.speed_sigma), 0.0});
    }
    if (tick_index % yaw_every_ == 0) {
      fresh.push_back({now, Measurement::Kind::yaw, yaw + gauss(cfg_.noise.yaw_sigma), 0.0});
    }
    std::lock_guard lock(mutex_);
    pending_.insert(pending_.end(), fresh.begin(), fresh.end());
  }

  const ScenarioConfig& cfg_;
  const Track& track_;
  ActuationController ctl_;
  std::mt19937_64 rng_;
  PlantState plant_;
  double progress_ = 0.0;
  double wheel_per_tick_ = 0.0;
  double wheel_left_ = 0.0, wheel_right_ = 0.0;
  long ticks_left_ = 0, ticks_right_ = 0;
  int gps_every_ = 10, speed_every_ = 1, yaw_every_ = 1;

  std::mutex mutex_;
  Snapshot snap_;
  std::vector<Measurement> pending_;
};

// Estimation, perception, tracking and planning: the 10 Hz side.
class Brain {
 public:
  explicit Brain(const ScenarioConfig& cfg)
      : cfg_(cfg),
        track_(*cfg.track),
        estimator_(initial_state(), 0.0, ukf_config(cfg), *cfg.track),
        tracker_(*cfg.track, cfg.tracker),
        planner_(*cfg.track, cfg.planner),
        rng_(stream(cfg.seed, 2)) {}

  CommandFrame cycle(double time, const Snapshot& snap, const std::vector<Measurement>& meas, CycleRecord& rec) {
    const auto t_cycle = Clock::now();
    const double length = track_.total_length();
    const int lap = lap_of(snap.progress, length);
    const EgoState& truth = snap.plant.ego;

    // Estimation.
    auto t0 = Clock::now();
    estimator_.set_steering(snap.steer_measured);
    estimator_.set_acceleration(last_accel_);
    for (const auto& m : meas) {
      switch (m.kind) {
        case Measurement::Kind::gps:
          estimator_.apply(m.stamp, GpsMeasurement{m.a, m.b, true});
          break;
        case Measurement::Kind::speed:
          estimator_.apply(m.stamp, SpeedMeasurement{m.a});
          break;
        case Measurement::Kind::yaw:
          estimator_.apply(m.stamp, YawRateMeasurement{m.a});
          break;
      }
    }
    if (snap.time > estimator_.time()) estimator_.predict_to(snap.time);
    const GaussianState& est = estimator_.state();
    rec.estimator_time = seconds_since(t0);

    // Perception and tracking.
    t0 = Clock::now();
    std::vector<CircleObstacle> world_obstacles;
    for (const auto& o : cfg_.obstacles) {
      if (!o.active_in(lap)) continue;
      const CartesianPose c = track_.frenet_to_cartesian({o.s, o.e_y, 0.0});
      world_obstacles.push_back({c.position(), o.radius, Eigen::Vector2d::Zero()});
    }
    const CartesianPose truth_pose = track_.frenet_to_cartesian({truth.s, truth.e_y, truth.e_psi});
    const PointCloud scan = synth_lidar_scan(world_obstacles, truth_pose, cfg_.lidar, rng_, snap.time);
    const PointCloud above = remove_ground(scan, 0.25, 2.5);
    const OccupancyGrid grid = project_to_grid(above, 0.2, 40.0);
    const std::vector<Detection> clusters = cluster_grid(grid, 3);
    const std::vector<RadarReturn> radar = synth_radar(world_obstacles, truth_pose, truth.v, cfg_.radar, rng_);
    const std::vector<FusedDetection> fused = fuse_radar(clusters, radar, 1.0);

    const CartesianPose est_pose = track_.frenet_to_cartesian({est.mean.s, est.mean.e_y, est.mean.e_psi});
    const double c = std::cos(est_pose.psi), s = std::sin(est_pose.psi);
    std::vector<RoadDetection> dets;
    for (const auto& f : fused) {
      const Eigen::Vector2d& p = f.detection.centroid;
      CartesianPose w{est_pose.x + c * p.x() - s * p.y(), est_pose.y + s * p.x() + c * p.y(), 0.0};
      const FrenetPose fp = track_.cartesian_to_frenet(w);
      if (std::abs(fp.e_y) > track_.lane_half_width() + 1.0) continue;
      RoadDetection d{fp.s, fp.e_y, f.detection.radius, std::nullopt};
      if (f.speed && p.norm() > 1e-6) {
        // Range rate back to the obstacle's own radial speed.
        d.speed = std::max(0.0, *f.speed + est.mean.v * p.x() / p.norm());
      }
      dets.push_back(d);
    }
    tracker_.step(kCycleDt, dets);
    std::vector<ObstacleConstraint> obstacles;
    for (const auto& t : tracker_.confirmed()) {
      obstacles.push_back({t.s(), t.e_y(), t.radius, t.speed(), t.heading()});
      rec.tracks.push_back({t.id, t.s(), t.e_y(), t.radius, t.speed()});
    }
    rec.perception_time = seconds_since(t0);

    // Planning.
    EgoState x0 = est.mean;
    // Plan from the last steering reference, not the lagging measured angle.
    x0.delta = held_delta_r_ ? *held_delta_r_ : snap.steer_measured;
    const PlanResult plan = planner_.plan(x0, obstacles);
    rec.planner_time = plan.command.solve_time;
    last_accel_ = plan.trajectory.inputs.empty() ? 0.0 : plan.trajectory.inputs.front().a;

    const double delta_r = std::clamp(plan.command.delta_r, -kFrameSteerMax, kFrameSteerMax);
    held_delta_r_ = delta_r;
    const double v_r = std::clamp(plan.command.v_r, 0.0, kFrameSpeedMax);
    const std::uint8_t flags = plan.command.status == SolveStatus::infeasible_fallback ? kFlagEmergency : 0;
    const CommandFrame frame = encode_command(delta_r, v_r, seq_++, flags);

    rec.time = time;
    rec.lap = lap;
    rec.segment = static_cast<int>(track_.segment_index(truth.s));
    rec.straight = track_.segments()[rec.segment].kind == TrackSegment::Kind::straight;
    rec.start_straight = lap == 1 && rec.segment == 0;
    for (const auto& o : cfg_.obstacles) {
      if (!o.active_in(lap)) continue;
      const double ds = track_.s_difference(truth.s, o.s);
      if (std::isnan(rec.obstacle_ds) || std::abs(ds) < std::abs(rec.obstacle_ds)) {
        rec.obstacle_ds = ds;
        const Eigen::Vector2d oc = track_.frenet_to_cartesian({o.s, o.e_y, 0.0}).position();
        rec.clearance = (truth_pose.position() - oc).norm() - o.radius;
      }
    }
    rec.truth = truth;
    rec.estimate = x0;
    rec.covariance_trace = est.covariance.trace();
    rec.nees = nees(est, truth, track_);
    rec.delta_r = decode_command(frame)->delta_r;
    rec.v_r = decode_command(frame)->v_r;
    rec.status = plan.command.status;
    rec.sqp_iterations = plan.info.sqp_iterations;
    rec.qp_iterations = plan.info.qp_iterations;
    rec.relaxed = plan.info.relaxed;
    rec.frame_hex = frame.hex();
    rec.cycle_time = seconds_since(t_cycle);
    return frame;
  }

  const EgoEstimator& estimator() const { return estimator_; }

 private:
  static GaussianState initial_state() {
    GaussianState g;
    g.covariance = Eigen::Vector4d(0.25, 0.04, 0.01, 0.04).asDiagonal();
    return g;
  }

  static UkfConfig ukf_config(const ScenarioConfig& cfg) {
    UkfConfig u;
    u.gps_sigma = cfg.noise.gps_sigma;
    // Encoder quantisation adds lsb^2 / 12 per wheel, halved by the average.
    const double lsb = 2.0 * M_PI * cfg.encoder.wheel_radius / cfg.encoder.ticks_per_rev * cfg.noise.speed_rate;
    u.speed_sigma = std::sqrt(cfg.noise.speed_sigma * cfg.noise.speed_sigma + lsb * lsb / 24.0);
    u.yaw_rate_sigma = cfg.noise.yaw_sigma;
    u.wheelbase = cfg.vehicle.wheelbase;
    return u;
  }

  const ScenarioConfig& cfg_;
  const Track& track_;
  EgoEstimator estimator_;
  ObstacleTracker tracker_;
  Planner planner_;
  std::mt19937_64 rng_;
  double last_accel_ = 0.0;
  std::optional<double> held_delta_r_;
  std::uint8_t seq_ = 0;
};

bool finished(const ScenarioConfig& cfg, double progress, double time, const RunOptions& opts) {
  if (progress >= cfg.laps * cfg.track->total_length()) return true;
  return opts.max_time > 0.0 && time >= opts.max_time - 1e-9;
}

void collect_events(SimLog& log, const World& world) {
  for (const auto& e : world.controller().events()) log.events.push_back("actuation " + e);
}

SimLog run_serial(const ScenarioConfig& cfg, const RunOptions& opts) {
  SimLog log;
  log.lane_half_width = cfg.track->lane_half_width();
  log.v_cruise = cfg.v_cruise;
  World world(cfg);
  Brain brain(cfg);
  CommandMailbox mailbox;
  for (int k = 0;; ++k) {
    const double t = k * kCycleDt;
    if (finished(cfg, world.progress(), t, opts)) break;
    if (t > cfg.time_limit) {
      log.aborted = true;
      log.abort_reason = "time limit reached before the laps were completed";
      break;
    }
    CycleRecord rec;
    mailbox.post(brain.cycle(t, world.snapshot(), world.drain(), rec));
    log.cycles.push_back(std::move(rec));

    bool ok = true;
    for (int j = 0; j < kTicksPerCycle && ok; ++j) {
      const int i = k * kTicksPerCycle + j;
      if (auto f = mailbox.take()) world.receive(*f, i * kTickDt);
      TickRecord tr;
      ok = world.tick(i, tr, log.abort_reason);
      log.ticks.push_back(tr);
    }
    if (!ok) {
      log.aborted = true;
      break;
    }
  }
  collect_events(log, world);
  for (const auto& e : brain.estimator().events()) log.events.push_back("estimator " + e);
  return log;
}

SimLog run_concurrent(const ScenarioConfig& cfg, const RunOptions& opts) {
  SimLog log;
  log.lane_half_width = cfg.track->lane_half_width();
  log.v_cruise = cfg.v_cruise;
  World world(cfg);
  Brain brain(cfg);
  CommandMailbox mailbox;
  std::atomic<bool> stop{false};
  std::mutex abort_mutex;
  const double scale = 1.0 / opts.speedup;
  const auto start = Clock::now();
  auto at = [&](double sim_time) {
    return start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(sim_time * scale));
  };

  std::thread actuation([&] {
    for (int i = 0; !stop; ++i) {
      std::this_thread::sleep_until(at(i * kTickDt));
      if (auto f = mailbox.take()) world.receive(*f, i * kTickDt);
      TickRecord tr;
      std::string reason;
      const bool ok = world.tick(i, tr, reason);
      log.ticks.push_back(tr);
      if (!ok) {
        std::lock_guard lock(abort_mutex);
        log.aborted = true;
        log.abort_reason = reason;
        stop = true;
      } else if (finished(cfg, world.progress(), tr.time, opts)) {
        stop = true;
      } else if (tr.time > cfg.time_limit) {
        std::lock_guard lock(abort_mutex);
        log.aborted = true;
        log.abort_reason = "time limit reached before the laps were completed";
        stop = true;
      }
    }
  });

  std::vector<CycleRecord> cycles;
  for (int k = 0; !stop; ++k) {
    std::this_thread::sleep_until(at(k * kCycleDt));
    if (stop) break;
    const double now = seconds_since(start) * opts.speedup;
    CycleRecord rec;
    mailbox.post(brain.cycle(now, world.snapshot(), world.drain(), rec));
    cycles.push_back(std::move(rec));
  }
  actuation.join();
  log.cycles = std::move(cycles);
  collect_events(log, world);
  for (const auto& e : brain.estimator().events()) log.events.push_back("estimator " + e);
  return log;
}

}  // namespace

SimLog run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
  if (!cfg.track) throw ScenarioError("scenario has no track; call finalize()");
  if (opts.concurrent && !(opts.speedup > 0.0)) throw ScenarioError("speedup must be > 0");
  return opts.concurrent ? run_concurrent(cfg, opts) : run_serial(cfg, opts);
}

}  // namespace roadframe
