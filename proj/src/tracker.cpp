#include "roadframe/tracker.hpp"

#include "roadframe/angles.hpp"
#include "roadframe/assignment.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace roadframe {
namespace {

constexpr int kPoints = SigmaPoints<4>::kCount;
using Points4 = Eigen::Matrix<double, 4, kPoints>;
using Weights = Eigen::Matrix<double, kPoints, 1>;

double kappa_at(const Track& track, double s) {
  if (track.closed()) return track.curvature_at(s);
  return track.curvature_at(std::clamp(s, 0.0, track.total_length()));
}

double wrap(const Track& track, double s) { return track.closed() ? track.wrap_s(s) : s; }

Eigen::Vector4d motion(const Eigen::Vector4d& x, double kappa) {
  // Keep the lateral offset away from the curvature centre.
  const double denom = std::max(1.0 - x(1) * kappa, 0.1);
  return {x(3) * std::cos(x(2)) / denom, x(3) * std::sin(x(2)), 0.0, 0.0};
}

Eigen::Vector4d propagate(Eigen::Vector4d x, double dt, const Track& track, double max_step) {
  const int steps = std::max(1, static_cast<int>(std::ceil(dt / max_step - 1e-9)));
  const double h = dt / steps;
  for (int i = 0; i < steps; ++i) {
    const Eigen::Vector4d k1 = motion(x, kappa_at(track, x(0)));
    const Eigen::Vector4d x2 = x + 0.5 * h * k1;
    const Eigen::Vector4d k2 = motion(x2, kappa_at(track, x2(0)));
    const Eigen::Vector4d x3 = x + 0.5 * h * k2;
    const Eigen::Vector4d k3 = motion(x3, kappa_at(track, x3(0)));
    const Eigen::Vector4d x4 = x + h * k3;
    const Eigen::Vector4d k4 = motion(x4, kappa_at(track, x4(0)));
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

Eigen::Vector4d residual(const Eigen::Vector4d& a, const Eigen::Vector4d& b, const Track& track) {
  return {track.s_difference(a(0), b(0)), a(1) - b(1), wrap_angle(a(2) - b(2)), a(3) - b(3)};
}

double mean_s(const Eigen::Ref<const Eigen::RowVectorXd>& s, const Weights& w, const Track& track) {
  double ds = 0.0;
  for (int i = 0; i < kPoints; ++i) ds += w(i) * track.s_difference(s(i), s(0));
  return wrap(track, s(0) + ds);
}

Eigen::Matrix4d symmetric(const Eigen::Matrix4d& p) { return 0.5 * (p + p.transpose()); }

void clamp_speed(ObstacleTrack& t) { t.mean(3) = std::max(0.0, t.mean(3)); }

}  // namespace

ObstacleTrack track_predict(const ObstacleTrack& t, double dt, const Track& track, const TrackerConfig& cfg) {
  if (!(dt > 0.0)) throw std::invalid_argument("track_predict needs dt > 0");
  const SigmaPoints<4> sp = make_sigma_points<4>(t.mean, t.covariance, cfg.ut);
  Points4 pts;
  for (int i = 0; i < kPoints; ++i) pts.col(i) = propagate(sp.points.col(i), dt, track, cfg.max_step);

  const auto m = weighted_moments<4, kPoints>(
      pts, sp.mean_weights, sp.cov_weights,
      [&](const Points4& p, const Weights& w) -> Eigen::Vector4d {
        return {mean_s(p.row(0), w, track), p.row(1).dot(w), circular_mean(p.row(2), w), p.row(3).dot(w)};
      },
      [&](const Eigen::Vector4d& a, const Eigen::Vector4d& b) { return residual(a, b, track); });

  ObstacleTrack out = t;
  out.mean = m.mean;
  out.covariance = symmetric(m.covariance);
  out.covariance.diagonal() += cfg.process_noise * dt;
  clamp_speed(out);
  return out;
}

double position_distance2(const ObstacleTrack& t, const RoadDetection& d, const Track& track,
                          const TrackerConfig& cfg) {
  const Eigen::Vector2d nu(track.s_difference(d.s, t.mean(0)), d.e_y - t.mean(1));
  const Eigen::Matrix2d s =
      t.covariance.topLeftCorner<2, 2>() + Eigen::Matrix2d::Identity() * cfg.position_sigma * cfg.position_sigma;
  return nu.dot(s.ldlt().solve(nu));
}

ObstacleTrack track_update(const ObstacleTrack& t, const RoadDetection& d, const Track& track,
                           const TrackerConfig& cfg) {
  const SigmaPoints<4> sp = make_sigma_points<4>(t.mean, t.covariance, cfg.ut);
  const int m = d.speed ? 3 : 2;

  // Measurement sigma points: (s, e_y[, speed]).
  Eigen::MatrixXd zs(m, kPoints);
  zs.row(0) = sp.points.row(0);
  zs.row(1) = sp.points.row(1);
  if (d.speed) zs.row(2) = sp.points.row(3);

  Eigen::VectorXd zmean(m);
  zmean(0) = mean_s(zs.row(0), sp.mean_weights, track);
  zmean.tail(m - 1) = zs.bottomRows(m - 1) * sp.mean_weights;

  Eigen::MatrixXd dz(m, kPoints);
  Eigen::Matrix<double, 4, kPoints> dx;
  for (int i = 0; i < kPoints; ++i) {
    dz(0, i) = track.s_difference(zs(0, i), zmean(0));
    dz.col(i).tail(m - 1) = zs.col(i).tail(m - 1) - zmean.tail(m - 1);
    dx.col(i) = residual(sp.points.col(i), t.mean, track);
  }

  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(m, m) * cfg.position_sigma * cfg.position_sigma;
  if (d.speed) r(2, 2) = cfg.speed_sigma * cfg.speed_sigma;
  const Eigen::MatrixXd s = dz * sp.cov_weights.asDiagonal() * dz.transpose() + r;
  const Eigen::MatrixXd cross = dx * sp.cov_weights.asDiagonal() * dz.transpose();

  Eigen::VectorXd nu(m);
  nu(0) = track.s_difference(d.s, zmean(0));
  nu(1) = d.e_y - zmean(1);
  if (d.speed) nu(2) = *d.speed - zmean(2);

  const auto ldlt = s.ldlt();
  const Eigen::MatrixXd gain = ldlt.solve(cross.transpose()).transpose();
  const Eigen::Vector4d dmean = gain * nu;

  ObstacleTrack out = t;
  out.mean = t.mean + dmean;
  out.mean(0) = wrap(track, out.mean(0));
  out.mean(2) = wrap_angle(out.mean(2));
  out.covariance = symmetric(t.covariance - gain * s * gain.transpose());
  clamp_speed(out);
  return out;
}

std::vector<int> associate(const std::vector<ObstacleTrack>& tracks, const std::vector<RoadDetection>& detections,
                           const Track& track, const TrackerConfig& cfg) {
  const double gate = chi_square_gate(2, cfg.gate);
  const auto nt = static_cast<Eigen::Index>(tracks.size());
  const auto nd = static_cast<Eigen::Index>(detections.size());
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(nt, nd, std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < nt; ++i) {
    for (Eigen::Index j = 0; j < nd; ++j) {
      const double d2 = position_distance2(tracks[i], detections[j], track, cfg);
      if (d2 <= gate) cost(i, j) = d2;
    }
  }
  return gnn_assign(cost, std::vector<double>(tracks.size(), gate));
}

ObstacleTracker::ObstacleTracker(const Track& track, TrackerConfig cfg) : track_(track), cfg_(std::move(cfg)) {}

std::vector<ObstacleTrack> ObstacleTracker::confirmed() const {
  std::vector<ObstacleTrack> out;
  std::copy_if(tracks_.begin(), tracks_.end(), std::back_inserter(out),
               [&](const ObstacleTrack& t) { return t.age >= cfg_.confirm_age; });
  return out;
}

void ObstacleTracker::predict(double dt) {
  for (auto& t : tracks_) t = track_predict(t, dt, track_, cfg_);
}

AssociationStats ObstacleTracker::associate_and_update(const std::vector<RoadDetection>& detections) {
  const double gate = chi_square_gate(2, cfg_.gate);
  const int nt = static_cast<int>(tracks_.size());
  const int nd = static_cast<int>(detections.size());

  AssociationStats stats;
  stats.assignment = associate(tracks_, detections, track_, cfg_);
  std::vector<bool> used(nd, false);
  for (int i = 0; i < nt; ++i) {
    const int j = stats.assignment[i];
    auto& t = tracks_[i];
    if (j < 0) {
      ++t.misses;
      continue;
    }
    used[j] = true;
    t = track_update(t, detections[j], track_, cfg_);
    ++t.age;
    t.misses = 0;
    t.radius = (t.radius * t.radius_samples + detections[j].radius) / (t.radius_samples + 1);
    ++t.radius_samples;
  }

  // A detection inside some track's gate or footprint is a second look at
  // that object, not a new one.
  for (int j = 0; j < nd; ++j) {
    if (used[j]) continue;
    const auto& d = detections[j];
    const bool gated = std::any_of(tracks_.begin(), tracks_.end(), [&](const ObstacleTrack& t) {
      const double dist = std::hypot(track_.s_difference(d.s, t.mean(0)), d.e_y - t.mean(1));
      return position_distance2(t, d, track_, cfg_) <= gate || dist < t.radius + d.radius;
    });
    if (gated) continue;
    ObstacleTrack t;
    t.id = next_id_++;
    t.mean << wrap(track_, d.s), d.e_y, 0.0, 0.0;
    t.covariance = Eigen::Vector4d(cfg_.initial_position_var, cfg_.initial_position_var, cfg_.initial_heading_var,
                                   cfg_.initial_speed_var)
                       .asDiagonal();
    t.radius = d.radius;
    tracks_.push_back(t);
    ++stats.spawned;
  }

  const auto before = tracks_.size();
  tracks_.erase(std::remove_if(tracks_.begin(), tracks_.end(),
                               [&](const ObstacleTrack& t) { return t.misses > cfg_.max_misses; }),
                tracks_.end());
  stats.deleted = static_cast<int>(before - tracks_.size());
  return stats;
}

AssociationStats ObstacleTracker::step(double dt, const std::vector<RoadDetection>& detections) {
  predict(dt);
  return associate_and_update(detections);
}

}  // namespace roadframe
