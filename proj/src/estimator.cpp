#include "roadframe/estimator.hpp"

#include "roadframe/angles.hpp"
#include "roadframe/chi_square.hpp"

#include <cmath>
#include <sstream>

namespace roadframe {
namespace {

using Points4 = Eigen::Matrix<double, 4, SigmaPoints<4>::kCount>;
using Weights = Eigen::Matrix<double, SigmaPoints<4>::kCount, 1>;

Eigen::Vector4d state_residual(const Eigen::Vector4d& a, const Eigen::Vector4d& b, const Track& track) {
  return {track.s_difference(a(0), b(0)), a(1) - b(1), wrap_angle(a(2) - b(2)), a(3) - b(3)};
}

Eigen::Vector4d state_mean(const Points4& pts, const Weights& wm, const Track& track) {
  const double ref = pts(0, 0);
  double ds = 0.0;
  for (int i = 0; i < pts.cols(); ++i) ds += wm(i) * track.s_difference(pts(0, i), ref);
  double s = ref + ds;
  if (track.closed()) s = track.wrap_s(s);
  return {s, pts.row(1).dot(wm), circular_mean(pts.row(2), wm), pts.row(3).dot(wm)};
}

Eigen::Vector4d add_correction(const Eigen::Vector4d& x, const Eigen::Vector4d& dx, const Track& track) {
  Eigen::Vector4d out = x + dx;
  if (track.closed()) out(0) = track.wrap_s(out(0));
  out(2) = wrap_angle(out(2));
  return out;
}

GaussianState with_vector(const GaussianState& g, const Eigen::Vector4d& x, const Eigen::Matrix4d& p) {
  GaussianState out = g;
  out.mean.s = x(0);
  out.mean.e_y = x(1);
  out.mean.e_psi = x(2);
  out.mean.v = x(3);
  out.covariance = 0.5 * (p + p.transpose());
  return out;
}

// Pulls e_y strictly inside the singularity radius of the local curvature.
bool project_inside(Eigen::Vector4d& x, const Track& track) {
  const double kappa = std::abs(track.curvature_at(x(0)));
  if (kappa == 0.0 || std::abs(x(1)) * kappa < 0.9) return false;
  x(1) = std::copysign(0.9 / kappa, x(1));
  return true;
}

template <int M, typename MeasureFn>
UpdateResult ukf_update(const GaussianState& g, const Eigen::Matrix<double, M, 1>& z,
                        const Eigen::Matrix<double, M, M>& r, MeasureFn&& measure, const Track& track,
                        const UkfConfig& cfg) {
  constexpr int K = SigmaPoints<4>::kCount;
  const SigmaPoints<4> sp = sigma_points(g, cfg);
  Eigen::Matrix<double, M, K> zs;
  for (int i = 0; i < K; ++i) {
    Eigen::Vector4d x = sp.points.col(i);
    project_inside(x, track);
    zs.col(i) = measure(x);
  }
  const auto zm = weighted_moments<M, K>(zs, sp.mean_weights, sp.cov_weights);

  Eigen::Matrix<double, 4, K> dx;
  const Eigen::Vector4d mean = g.vector();
  for (int i = 0; i < K; ++i) dx.col(i) = state_residual(sp.points.col(i), mean, track);
  const Eigen::Matrix<double, 4, M> cross = dx * sp.cov_weights.asDiagonal() * zm.deviations.transpose();
  const Eigen::Matrix<double, M, M> s = zm.covariance + r;
  const Eigen::Matrix<double, M, 1> nu = z - zm.mean;
  const auto s_ldlt = s.ldlt();

  UpdateResult out;
  out.innovation = nu;
  out.predicted = zm.mean;
  out.nis = nu.dot(s_ldlt.solve(nu));
  if (out.nis > chi_square_gate(M, GateLevel::p999)) {
    out.accepted = false;
    out.state = g;
    return out;
  }
  const Eigen::Matrix<double, 4, M> gain = s_ldlt.solve(cross.transpose()).transpose();
  const Eigen::Matrix4d p = g.covariance - gain * s * gain.transpose();
  out.state = with_vector(g, add_correction(mean, gain * nu, track), p);
  return out;
}

}  // namespace

Eigen::Vector2d antenna_position(const CartesianPose& pose, double antenna_offset) {
  return pose.position() + antenna_offset * Eigen::Vector2d(std::cos(pose.psi), std::sin(pose.psi));
}

SigmaPoints<4> sigma_points(const GaussianState& g, const UkfConfig& cfg) {
  return make_sigma_points<4>(g.vector(), g.covariance, cfg.ut);
}

PredictResult predict(const GaussianState& g, const ControlInput& u, double dt, const Track& track,
                      const UkfConfig& cfg) {
  if (!(dt > 0.0)) throw std::invalid_argument("predict needs dt > 0");
  constexpr int K = SigmaPoints<4>::kCount;
  const SigmaPoints<4> sp = sigma_points(g, cfg);
  PredictResult out;
  out.repaired = sp.repaired;

  Points4 pts;
  for (int i = 0; i < K; ++i) {
    Eigen::Vector4d x = sp.points.col(i);
    EgoState e{x(0), x(1), x(2), x(3), g.mean.delta};
    EgoState next;
    try {
      next = integrate_rk4(e, u, track, dt, cfg.wheelbase);
    } catch (const SingularityError&) {
      project_inside(x, track);
      e.e_y = x(1);
      out.projected = true;
      next = integrate_rk4(e, u, track, dt, cfg.wheelbase);
    }
    pts.col(i) << next.s, next.e_y, next.e_psi, next.v;
  }
  const auto m = weighted_moments<4, K>(
      pts, sp.mean_weights, sp.cov_weights, [&](const Points4& p, const Weights& w) { return state_mean(p, w, track); },
      [&](const Eigen::Vector4d& a, const Eigen::Vector4d& b) { return state_residual(a, b, track); });

  Eigen::Matrix4d p = m.covariance;
  p.diagonal() += cfg.process_noise * dt;
  out.state = with_vector(g, m.mean, p);
  out.state.mean.delta = g.mean.delta + u.omega_delta * dt;
  return out;
}

UpdateResult update_gps(const GaussianState& g, const GpsMeasurement& z, const Track& track, const UkfConfig& cfg) {
  if (!z.valid) throw std::invalid_argument("update_gps called with an invalid fix");
  const Eigen::Matrix2d r = Eigen::Matrix2d::Identity() * cfg.gps_sigma * cfg.gps_sigma;
  auto measure = [&](const Eigen::Vector4d& x) -> Eigen::Vector2d {
    return antenna_position(track.frenet_to_cartesian({x(0), x(1), x(2)}), cfg.antenna_offset);
  };
  return ukf_update<2>(g, Eigen::Vector2d(z.x, z.y), r, measure, track, cfg);
}

UpdateResult update_speed(const GaussianState& g, const SpeedMeasurement& z, const UkfConfig& cfg) {
  const double var = g.covariance(3, 3) + cfg.speed_sigma * cfg.speed_sigma;
  const double nu = z.v - g.mean.v;
  UpdateResult out;
  out.innovation = Eigen::VectorXd::Constant(1, nu);
  out.predicted = Eigen::VectorXd::Constant(1, g.mean.v);
  out.nis = nu * nu / var;
  if (out.nis > chi_square_gate(1, GateLevel::p999)) {
    out.accepted = false;
    out.state = g;
    return out;
  }
  const Eigen::Vector4d gain = g.covariance.col(3) / var;
  out.state = g;
  out.state.mean.s += gain(0) * nu;
  out.state.mean.e_y += gain(1) * nu;
  out.state.mean.e_psi = wrap_angle(g.mean.e_psi + gain(2) * nu);
  out.state.mean.v += gain(3) * nu;
  const Eigen::Matrix4d p = g.covariance - gain * var * gain.transpose();
  out.state.covariance = 0.5 * (p + p.transpose());
  return out;
}

UpdateResult update_yaw_rate(const GaussianState& g, const YawRateMeasurement& z, const Track& track,
                             const UkfConfig& cfg) {
  const double gain = std::tan(g.mean.delta) / cfg.wheelbase;
  const Eigen::Matrix<double, 1, 1> r = Eigen::Matrix<double, 1, 1>::Constant(cfg.yaw_rate_sigma * cfg.yaw_rate_sigma);
  auto measure = [&](const Eigen::Vector4d& x) { return Eigen::Matrix<double, 1, 1>::Constant(x(3) * gain); };
  return ukf_update<1>(g, Eigen::Matrix<double, 1, 1>::Constant(z.r), r, measure, track, cfg);
}

double nees(const GaussianState& g, const EgoState& truth, const Track& track) {
  const Eigen::Vector4d t{truth.s, truth.e_y, truth.e_psi, truth.v};
  const Eigen::Vector4d e = state_residual(g.vector(), t, track);
  return e.dot(g.covariance.ldlt().solve(e));
}

EgoEstimator::EgoEstimator(GaussianState initial, double time, UkfConfig cfg, const Track& track)
    : state_(std::move(initial)), time_(time), cfg_(std::move(cfg)), track_(track) {}

void EgoEstimator::predict_to(double time) {
  constexpr double kMaxStep = 0.05;
  while (time - time_ > 1e-12) {
    const double dt = std::min(kMaxStep, time - time_);
    const PredictResult r = predict(state_, ControlInput{accel_, 0.0}, dt, track_, cfg_);
    if (r.projected) ++projected_;
    state_ = r.state;
    time_ += dt;
  }
  time_ = std::max(time_, time);
}

bool EgoEstimator::admit(double stamp, const char* what) {
  if (stamp < time_ - 1e-12) {
    ++dropped_;
    std::ostringstream os;
    os << "dropped out-of-order " << what << " stamped " << stamp << " at filter time " << time_;
    events_.push_back(os.str());
    return false;
  }
  predict_to(stamp);
  return true;
}

bool EgoEstimator::record(const UpdateResult& r, const char* what) {
  if (!r.accepted) {
    ++gated_;
    std::ostringstream os;
    os << "gated " << what << " at t=" << time_ << " nis=" << r.nis;
    events_.push_back(os.str());
    return false;
  }
  state_ = r.state;
  return true;
}

bool EgoEstimator::apply(double stamp, const GpsMeasurement& z) {
  if (!z.valid || !admit(stamp, "gps")) return false;
  const UpdateResult r = update_gps(state_, z, track_, cfg_);
  last_gps_nis_ = r.nis;
  return record(r, "gps");
}

bool EgoEstimator::apply(double stamp, const SpeedMeasurement& z) {
  if (!admit(stamp, "speed")) return false;
  return record(update_speed(state_, z, cfg_), "speed");
}

bool EgoEstimator::apply(double stamp, const YawRateMeasurement& z) {
  if (!admit(stamp, "yaw rate")) return false;
  return record(update_yaw_rate(state_, z, track_, cfg_), "yaw rate");
}

}  // namespace roadframe
