#include "roadframe/estimator.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace roadframe {
namespace {

Eigen::Matrix4d random_spd(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Matrix4d a;
  for (int i = 0; i < 16; ++i) a(i) = n(rng);
  return a * a.transpose() + 0.1 * Eigen::Matrix4d::Identity();
}

const Track& straight_road() {
  static const Track road = build_track({TrackSegment::straight(1000.0)}, 3.0);
  return road;
}

GaussianState nominal() {
  GaussianState g;
  g.mean = {100.0, 0.2, 0.03, 3.0, 0.0};
  g.covariance = Eigen::Vector4d(0.04, 0.02, 0.01, 0.05).asDiagonal();
  return g;
}

TEST(SigmaPointsTest, IdentityCovariance) {
  GaussianState g;
  g.mean = {1, 2, 0.3, 4, 0};
  g.covariance.setIdentity();
  const SigmaPoints<4> sp = sigma_points(g, UkfConfig{});
  EXPECT_EQ(sp.points.cols(), 9);
  EXPECT_EQ(Eigen::Vector4d(sp.points.col(0)), g.vector());
  EXPECT_FALSE(sp.repaired);
}

TEST(SigmaPointsTest, ReconstructMeanAndCovariance) {
  std::mt19937 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Matrix4d p = random_spd(rng);
    const Eigen::Vector4d m(1.0, -2.0, 0.5, 3.0);
    const auto sp = make_sigma_points<4>(m, p, UnscentedParams{});
    const auto mom = weighted_moments<4, 9>(sp.points, sp.mean_weights, sp.cov_weights);
    EXPECT_LT((mom.mean - m).norm(), 1e-9);
    EXPECT_LT((mom.covariance - p).norm(), 1e-9);

    Eigen::Matrix4d a;
    for (int i = 0; i < 16; ++i) a(i) = std::normal_distribution<double>(0, 1)(rng);
    const Eigen::Matrix<double, 4, 9> mapped = a * sp.points;
    const auto lin = weighted_moments<4, 9>(mapped, sp.mean_weights, sp.cov_weights);
    EXPECT_LT((lin.covariance - a * p * a.transpose()).norm(), 1e-9 * std::max(1.0, lin.covariance.norm()));
  }
}

TEST(SigmaPointsTest, RepairsIndefiniteCovariance) {
  GaussianState g;
  g.covariance = Eigen::Vector4d(1.0, -1e-3, 1.0, 1.0).asDiagonal();
  const SigmaPoints<4> sp = sigma_points(g, UkfConfig{});
  EXPECT_TRUE(sp.repaired);
  EXPECT_TRUE(sp.points.allFinite());
}

TEST(PredictTest, StandstillWithoutNoiseIsIdentity) {
  UkfConfig cfg;
  cfg.process_noise.setZero();
  GaussianState g = nominal();
  g.mean.v = 0.0;
  g.covariance(3, 3) = 1e-12;
  const PredictResult r = predict(g, {}, 0.1, straight_road(), cfg);
  EXPECT_LT((r.state.vector() - g.vector()).norm(), 1e-12);
  // The v sigma points are tiny so motion they induce stays far below 1e-9.
  EXPECT_LT((r.state.covariance - g.covariance).norm(), 1e-9);
}

TEST(PredictTest, LinearRegimeMatchesLinearKalman) {
  UkfConfig cfg;
  cfg.process_noise << 1e-3, 1e-3, 1e-8, 1e-8;  // keep heading and speed spread small
  GaussianState g;
  g.mean = {100.0, 0.3, 0.02, 3.0, 0.0};
  g.covariance = Eigen::Vector4d(1e-2, 1e-2, 1e-6, 1e-6).asDiagonal();
  Eigen::Vector4d m = g.vector();
  Eigen::Matrix4d p = g.covariance;
  for (int k = 0; k < 5; ++k) {
    g = predict(g, {0.5, 0.0}, 0.1, straight_road(), cfg).state;
    oracle::linear_kf_predict(m, p, 0.0, 0.5, 0.1, cfg.wheelbase, cfg.process_noise);
  }
  EXPECT_LT((g.vector() - m).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((g.covariance - p).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(PredictTest, ProcessNoiseGrowsTrace) {
  const GaussianState g = nominal();
  const PredictResult r = predict(g, {}, 0.1, build_campus_loop(), UkfConfig{});
  EXPECT_GE(r.state.covariance.trace(), g.covariance.trace());
}

TEST(PredictTest, SingularSigmaPointIsProjected) {
  // Large lateral variance on a tight arc puts a sigma point past the centre.
  const Track arc = build_track({TrackSegment::straight(5.0), TrackSegment::arc(3.82, 3.0)}, 2.3);
  GaussianState g;
  g.mean = {8.0, 2.5, 0.0, 2.0, 0.0};
  g.covariance = Eigen::Vector4d(0.01, 4.0, 0.01, 0.01).asDiagonal();
  const PredictResult r = predict(g, {}, 0.1, arc, UkfConfig{});
  EXPECT_TRUE(r.projected);
  EXPECT_TRUE(r.state.covariance.allFinite());
}

TEST(GpsUpdateTest, PerfectMeasurementShrinksCovariance) {
  const Track t = build_campus_loop();
  GaussianState g = nominal();
  g.mean.s = 133.0;  // on an arc
  UkfConfig cfg;
  cfg.antenna_offset = 0.8;
  const UpdateResult probe = update_gps(g, {0.0, 0.0}, t, cfg);
  const UpdateResult r = update_gps(g, {probe.predicted(0), probe.predicted(1)}, t, cfg);
  EXPECT_TRUE(r.accepted);
  EXPECT_LT((r.state.vector() - g.vector()).norm(), 1e-12);
  EXPECT_LT(r.state.covariance.trace(), g.covariance.trace());
}

TEST(GpsUpdateTest, StraightRoadMatchesLinearKalman) {
  GaussianState g = nominal();
  std::mt19937 rng(7);
  g.covariance = random_spd(rng) * 0.01;
  UkfConfig cfg;
  const UpdateResult r = update_gps(g, {100.05, 0.17}, straight_road(), cfg);

  Eigen::Vector4d m = g.vector();
  Eigen::Matrix4d p = g.covariance;
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  oracle::linear_kf_update<2>(m, p, h, Eigen::Vector2d(100.05, 0.17),
                              Eigen::Matrix2d::Identity() * cfg.gps_sigma * cfg.gps_sigma);
  EXPECT_LT((r.state.vector() - m).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((r.state.covariance - p).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(GpsUpdateTest, OutlierIsGated) {
  GaussianState g = nominal();
  g.covariance *= 0.01;
  const UpdateResult r = update_gps(g, {150.0, 0.0}, straight_road(), UkfConfig{});
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.state.vector(), g.vector());
  EXPECT_GT(r.nis, 13.8);
}

TEST(SpeedUpdateTest, ScalarKalmanAlgebra) {
  const GaussianState g = nominal();
  UkfConfig cfg;
  const UpdateResult same = update_speed(g, {g.mean.v}, cfg);
  EXPECT_EQ(same.state.vector(), g.vector());
  EXPECT_LT(same.state.covariance(3, 3), g.covariance(3, 3));

  const UpdateResult r = update_speed(g, {3.1}, cfg);
  const double pv = g.covariance(3, 3), rv = cfg.speed_sigma * cfg.speed_sigma;
  EXPECT_NEAR(r.state.mean.v, 3.0 + pv / (pv + rv) * 0.1, 1e-12);
  EXPECT_NEAR(r.state.covariance(3, 3), pv * rv / (pv + rv), 1e-12);
}

TEST(YawRateUpdateTest, Behaviour) {
  const Track& road = straight_road();
  UkfConfig cfg;
  GaussianState g = nominal();
  g.mean.delta = 0.1;
  const double consistent = g.mean.v * std::tan(0.1) / cfg.wheelbase;
  const UpdateResult r = update_yaw_rate(g, {consistent}, road, cfg);
  EXPECT_TRUE(r.accepted);
  EXPECT_LT(r.state.covariance.trace(), g.covariance.trace());

  g.mean.delta = 0.0;
  g.mean.v = 2.7;
  const UpdateResult z = update_yaw_rate(g, {0.0}, road, cfg);
  EXPECT_NEAR(z.predicted(0), 0.0, 1e-15);
}

TEST(YawRateUpdateTest, MatchesDirectUnscentedEvaluation) {
  UkfConfig cfg;
  GaussianState g = nominal();
  std::mt19937 rng(9);
  g.covariance = random_spd(rng) * 0.02;
  g.mean.delta = 0.35;
  const UpdateResult r = update_yaw_rate(g, {0.62}, straight_road(), cfg);

  // Direct UT: sigma points from an independent Cholesky and weights.
  const int n = 4;
  const double alpha = cfg.ut.alpha, beta = cfg.ut.beta, lambda = alpha * alpha * n - n;
  const Eigen::Matrix4d l = Eigen::LLT<Eigen::Matrix4d>((n + lambda) * g.covariance).matrixL();
  const Eigen::Vector4d m = g.vector();
  std::vector<Eigen::Vector4d> pts{m};
  for (int i = 0; i < n; ++i) pts.push_back(m + l.col(i));
  for (int i = 0; i < n; ++i) pts.push_back(m - l.col(i));
  auto wm = [&](int i) { return i == 0 ? lambda / (n + lambda) : 0.5 / (n + lambda); };
  auto wc = [&](int i) { return i == 0 ? wm(0) + 1 - alpha * alpha + beta : wm(i); };
  const double k = std::tan(0.35) / cfg.wheelbase;
  double zbar = 0;
  for (int i = 0; i < 9; ++i) zbar += wm(i) * k * pts[i](3);
  double szz = cfg.yaw_rate_sigma * cfg.yaw_rate_sigma;
  Eigen::Vector4d pxz = Eigen::Vector4d::Zero();
  for (int i = 0; i < 9; ++i) {
    const double dz = k * pts[i](3) - zbar;
    szz += wc(i) * dz * dz;
    pxz += wc(i) * (pts[i] - m) * dz;
  }
  const Eigen::Vector4d gain = pxz / szz;
  const Eigen::Vector4d mean = m + gain * (0.62 - zbar);
  const Eigen::Matrix4d cov = g.covariance - gain * szz * gain.transpose();
  EXPECT_LT((r.state.vector() - mean).norm(), 1e-9);
  EXPECT_LT((r.state.covariance - cov).norm(), 1e-9);
}

TEST(NeesTest, KnownValues) {
  const Track& road = straight_road();
  GaussianState g = nominal();
  EXPECT_NEAR(nees(g, g.mean, road), 0.0, 1e-15);
  EgoState off = g.mean;
  off.e_y += std::sqrt(g.covariance(1, 1));
  EXPECT_NEAR(nees(g, off, road), 1.0, 1e-12);
}

TEST(NeesTest, MonteCarloConsistency) {
  const double mean_nees = oracle::monte_carlo_nees(200, 2024);
  EXPECT_GE(mean_nees, 0.8 * 4);
  EXPECT_LE(mean_nees, 1.25 * 4);
}

TEST(EgoEstimatorTest, DropsOutOfOrderMeasurements) {
  const Track t = build_campus_loop();
  EgoEstimator est(nominal(), 0.0, UkfConfig{}, t);
  EXPECT_TRUE(est.apply(0.2, SpeedMeasurement{3.0}));
  EXPECT_NEAR(est.time(), 0.2, 1e-12);
  EXPECT_FALSE(est.apply(0.1, SpeedMeasurement{3.0}));
  EXPECT_EQ(est.dropped_out_of_order(), 1);
  ASSERT_EQ(est.events().size(), 1u);
}

TEST(EgoEstimatorTest, UpdatesNeverGrowTrace) {
  const Track t = build_campus_loop();
  EgoEstimator est(nominal(), 0.0, UkfConfig{}, t);
  std::mt19937 rng(4);
  std::normal_distribution<double> n(0.0, 0.05);
  for (int k = 1; k <= 50; ++k) {
    const double stamp = 0.1 * k;
    est.predict_to(stamp);
    const double before = est.state().covariance.trace();
    const CartesianPose p = t.frenet_to_cartesian({100.0 + 3.0 * stamp, 0.2, 0.03});
    est.apply(stamp, GpsMeasurement{p.x + n(rng), p.y + n(rng)});
    est.apply(stamp, SpeedMeasurement{3.0 + n(rng)});
    EXPECT_LE(est.state().covariance.trace(), before + 1e-15);
    const Eigen::Matrix4d c = est.state().covariance;
    EXPECT_LT((c - c.transpose()).norm(), 1e-10);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(c).eigenvalues().minCoeff(), 0.0);
  }
}

}  // namespace
}  // namespace roadframe
