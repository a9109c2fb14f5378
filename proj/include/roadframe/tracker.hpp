#pragma once

#include "roadframe/chi_square.hpp"
#include "roadframe/track.hpp"
#include "roadframe/unscented.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace roadframe {

/// Obstacle in the road frame. mean = (s, e_y, heading relative to the lane,
/// speed).
struct ObstacleTrack {
  int id = 0;
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
  double radius = 0.0;
  int age = 1;     // number of cycles with a measurement
  int misses = 0;  // consecutive cycles without one
  int radius_samples = 1;

  double s() const { return mean(0); }
  double e_y() const { return mean(1); }
  double heading() const { return mean(2); }
  double speed() const { return mean(3); }
};

/// Detection already converted to the road frame.
struct RoadDetection {
  double s = 0.0;
  double e_y = 0.0;
  double radius = 0.0;
  std::optional<double> speed;
};

struct TrackerConfig {
  UnscentedParams ut;
  /// Spectral densities for (s, e_y, heading, speed), multiplied by dt.
  Eigen::Vector4d process_noise{0.005, 0.002, 0.0005, 0.02};
  double position_sigma = 0.1;
  double speed_sigma = 0.1;
  double initial_position_var = 0.04;
  double initial_heading_var = 0.05;
  double initial_speed_var = 4.0;
  GateLevel gate = GateLevel::p99;
  int confirm_age = 3;
  int max_misses = 5;
  double max_step = 0.02;  // integration sub-step inside predict
};

/// Constant speed along a constant heading relative to the lane.
ObstacleTrack track_predict(const ObstacleTrack& t, double dt, const Track& track, const TrackerConfig& cfg);

/// Squared Mahalanobis distance of a detection position from the track.
double position_distance2(const ObstacleTrack& t, const RoadDetection& d, const Track& track,
                          const TrackerConfig& cfg);

/// Unscented update with the position and, when present, the speed.
ObstacleTrack track_update(const ObstacleTrack& t, const RoadDetection& d, const Track& track,
                           const TrackerConfig& cfg);

/// Global nearest neighbour on the position Mahalanobis distance inside the
/// chi-square gate. Returns the detection index per track, or -1.
std::vector<int> associate(const std::vector<ObstacleTrack>& tracks, const std::vector<RoadDetection>& detections,
                           const Track& track, const TrackerConfig& cfg);

struct AssociationStats {
  std::vector<int> assignment;  // detection index per input track, or -1
  int spawned = 0;
  int deleted = 0;
};

/// Owns the obstacle tracks. One `step` per perception cycle.
class ObstacleTracker {
 public:
  ObstacleTracker(const Track& track, TrackerConfig cfg = {});

  const std::vector<ObstacleTrack>& tracks() const { return tracks_; }
  std::vector<ObstacleTrack> confirmed() const;
  const TrackerConfig& config() const { return cfg_; }

  void predict(double dt);
  AssociationStats associate_and_update(const std::vector<RoadDetection>& detections);
  AssociationStats step(double dt, const std::vector<RoadDetection>& detections);

 private:
  const Track& track_;
  TrackerConfig cfg_;
  std::vector<ObstacleTrack> tracks_;
  int next_id_ = 1;
};

}  // namespace roadframe
