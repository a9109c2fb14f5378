#pragma once

#include "roadframe/track.hpp"
#include "roadframe/unscented.hpp"
#include "roadframe/vehicle.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace roadframe {

/// Road-frame Gaussian over (s, e_y, e_psi, v). The steering angle in `mean`
/// is a known input taken from the steering encoder and carries no variance.
struct GaussianState {
  EgoState mean;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();

  Eigen::Vector4d vector() const { return {mean.s, mean.e_y, mean.e_psi, mean.v}; }
};

struct UkfConfig {
  UnscentedParams ut;
  /// Process noise spectral density per state, multiplied by dt in predict.
  Eigen::Vector4d process_noise{1e-4, 2e-3, 2e-3, 0.05};
  double gps_sigma = 0.05;
  double speed_sigma = 0.05;
  double yaw_rate_sigma = 0.01;
  /// GPS antenna distance ahead of the reference point along the heading.
  double antenna_offset = 0.0;
  double wheelbase = 1.73;
};

struct GpsMeasurement {
  double x = 0.0;
  double y = 0.0;
  bool valid = true;
};

struct SpeedMeasurement {
  double v = 0.0;
};

struct YawRateMeasurement {
  double r = 0.0;
};

struct PredictResult {
  GaussianState state;
  bool projected = false;  // a sigma point was pulled back inside the singularity radius
  bool repaired = false;   // covariance needed eigenvalue flooring
};

struct UpdateResult {
  GaussianState state;
  bool accepted = true;
  double nis = 0.0;
  Eigen::VectorXd innovation;
  Eigen::VectorXd predicted;  // UT mean of the measurement
};

SigmaPoints<4> sigma_points(const GaussianState& g, const UkfConfig& cfg);

/// Propagates the sigma points through the road-frame bicycle model and adds
/// process noise.
PredictResult predict(const GaussianState& g, const ControlInput& u, double dt, const Track& track,
                      const UkfConfig& cfg);

/// Antenna position through the nonlinear Frenet-to-Cartesian map.
UpdateResult update_gps(const GaussianState& g, const GpsMeasurement& z, const Track& track, const UkfConfig& cfg);
/// Linear measurement of v.
UpdateResult update_speed(const GaussianState& g, const SpeedMeasurement& z, const UkfConfig& cfg);
/// Yaw rate v*tan(delta)/wheelbase with delta known.
UpdateResult update_yaw_rate(const GaussianState& g, const YawRateMeasurement& z, const Track& track,
                             const UkfConfig& cfg);

/// Normalised estimation error squared over (s, e_y, e_psi, v).
double nees(const GaussianState& g, const EgoState& truth, const Track& track);

/// Antenna position seen by a GPS receiver on a vehicle at `pose`.
Eigen::Vector2d antenna_position(const CartesianPose& pose, double antenna_offset);

/// Single-owner ego filter that applies time-stamped measurements in order.
/// Measurements older than the filter time are dropped and counted.
class EgoEstimator {
 public:
  EgoEstimator(GaussianState initial, double time, UkfConfig cfg, const Track& track);

  const GaussianState& state() const { return state_; }
  double time() const { return time_; }
  const UkfConfig& config() const { return cfg_; }

  /// Steering-encoder reading used as the known delta input.
  void set_steering(double delta) { state_.mean.delta = delta; }
  void set_acceleration(double a) { accel_ = a; }

  void predict_to(double time);
  bool apply(double stamp, const GpsMeasurement& z);
  bool apply(double stamp, const SpeedMeasurement& z);
  bool apply(double stamp, const YawRateMeasurement& z);

  int dropped_out_of_order() const { return dropped_; }
  int gated() const { return gated_; }
  int projected() const { return projected_; }
  const std::vector<std::string>& events() const { return events_; }
  double last_gps_nis() const { return last_gps_nis_; }

 private:
  bool admit(double stamp, const char* what);
  bool record(const UpdateResult& r, const char* what);

  GaussianState state_;
  double time_;
  UkfConfig cfg_;
  const Track& track_;
  double accel_ = 0.0;
  int dropped_ = 0;
  int gated_ = 0;
  int projected_ = 0;
  double last_gps_nis_ = 0.0;
  std::vector<std::string> events_;
};

}  // namespace roadframe
