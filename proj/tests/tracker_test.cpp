#include "roadframe/tracker.hpp"

#include "roadframe/assignment.hpp"
#include "roadframe/chi_square.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

namespace roadframe {
namespace {

const Track& straight_road() {
  static const Track road = build_track({TrackSegment::straight(1000.0)}, 3.0);
  return road;
}

ObstacleTrack make_track(double s, double e_y, double heading, double speed, double var = 0.01) {
  ObstacleTrack t;
  t.mean << s, e_y, heading, speed;
  t.covariance = Eigen::Matrix4d::Identity() * var;
  t.radius = 0.7;
  return t;
}

TEST(AssignmentTest, SquareMatchesPermutationOracle) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + trial % 5;
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < c.size(); ++i) c(i) = u(rng);
    const auto got = solve_assignment(c);
    const auto best = oracle::brute_force_assignment(c);
    double cg = 0, cb = 0;
    for (int i = 0; i < n; ++i) {
      cg += c(i, got[i]);
      cb += c(i, best[i]);
    }
    ASSERT_NEAR(cg, cb, 1e-9) << "trial " << trial;
  }
}

TEST(AssignmentTest, RectangularUsesDistinctColumns) {
  Eigen::MatrixXd c(2, 4);
  c << 5, 1, 1, 9, 5, 1, 2, 9;
  const auto got = solve_assignment(c);
  EXPECT_NE(got[0], got[1]);
  EXPECT_DOUBLE_EQ(c(0, got[0]) + c(1, got[1]), 2.0);
}

TEST(AssignmentTest, GnnLeavesExpensiveRowsUnassigned) {
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd c(3, 2);
  c << 1.0, inf, 8.0, inf, inf, inf;
  const auto got = gnn_assign(c, {5.0, 5.0, 5.0});
  EXPECT_EQ(got[0], 0);
  EXPECT_EQ(got[1], -1);
  EXPECT_EQ(got[2], -1);
}

TEST(TrackPredictTest, StationaryStaysPut) {
  const ObstacleTrack t = make_track(50.0, 0.4, 0.0, 0.0);
  const ObstacleTrack p = track_predict(t, 0.1, straight_road(), TrackerConfig{});
  EXPECT_NEAR(p.s(), 50.0, 1e-9);
  EXPECT_NEAR(p.e_y(), 0.4, 1e-9);
  EXPECT_GT(p.covariance.trace(), t.covariance.trace());
}

TEST(TrackPredictTest, AdvancesAlongLane) {
  const ObstacleTrack t = make_track(50.0, 0.0, 0.0, 2.0, 1e-8);
  const ObstacleTrack p = track_predict(t, 0.1, straight_road(), TrackerConfig{});
  EXPECT_NEAR(p.s(), 50.2, 1e-6);
  EXPECT_NEAR(p.speed(), 2.0, 1e-9);
}

TEST(TrackPredictTest, CurvedLaneMatchesFineEuler) {
  const Track loop = build_campus_loop();
  const ObstacleTrack t = make_track(129.0, 0.3, 0.1, 2.0, 1e-12);
  const double dt = 5.0;
  const ObstacleTrack p = track_predict(t, dt, loop, TrackerConfig{});

  // Explicit Euler at 1e-4 s.
  double s = 129.0, e_y = 0.3;
  const double h = 1e-4, heading = 0.1, v = 2.0;
  for (int i = 0; i < static_cast<int>(dt / h + 0.5); ++i) {
    const double kappa = loop.curvature_at(s);
    const double s_dot = v * std::cos(heading) / (1.0 - e_y * kappa);
    e_y += h * v * std::sin(heading);
    s += h * s_dot;
  }
  EXPECT_GT(s, 137.0);  // went through the whole corner
  EXPECT_NEAR(p.s(), s, 2e-3);
  EXPECT_NEAR(p.e_y(), e_y, 1e-6);
}

TEST(TrackPredictTest, WrapsOnClosedTrack) {
  const Track loop = build_campus_loop();
  const ObstacleTrack p = track_predict(make_track(363.9, 0.0, 0.0, 2.0, 1e-8), 0.1, loop, TrackerConfig{});
  EXPECT_NEAR(p.s(), 0.1, 1e-6);
}

TEST(TrackerTest, MatchedDetectionUpdates) {
  ObstacleTracker tracker(straight_road());
  tracker.associate_and_update({{50.0, 0.5, 0.7, std::nullopt}});
  ASSERT_EQ(tracker.tracks().size(), 1u);
  const auto cov_before = tracker.tracks()[0].covariance;
  const auto stats = tracker.step(0.1, {{50.02, 0.48, 0.7, std::nullopt}});
  ASSERT_EQ(tracker.tracks().size(), 1u);
  EXPECT_EQ(stats.assignment[0], 0);
  EXPECT_EQ(tracker.tracks()[0].age, 2);
  EXPECT_LT(tracker.tracks()[0].covariance(0, 0), cov_before(0, 0));
}

TEST(TrackerTest, FarDetectionSpawnsTentativeTrack) {
  ObstacleTracker tracker(straight_road());
  tracker.associate_and_update({{50.0, 0.5, 0.7, std::nullopt}});
  const auto stats = tracker.step(0.1, {{50.0, 0.5, 0.7, std::nullopt}, {80.0, -1.0, 0.7, std::nullopt}});
  EXPECT_EQ(stats.spawned, 1);
  ASSERT_EQ(tracker.tracks().size(), 2u);
  EXPECT_EQ(tracker.tracks()[1].age, 1);
  EXPECT_TRUE(tracker.confirmed().empty());
}

TEST(TrackerTest, ConfirmationAndDeletion) {
  TrackerConfig cfg;
  ObstacleTracker tracker(straight_road(), cfg);
  for (int k = 0; k < 3; ++k) tracker.step(0.1, {{50.0, 0.5, 0.7, std::nullopt}});
  EXPECT_EQ(tracker.confirmed().size(), 1u);
  for (int k = 0; k < cfg.max_misses; ++k) tracker.step(0.1, {});
  EXPECT_EQ(tracker.tracks().size(), 1u);
  tracker.step(0.1, {});
  EXPECT_TRUE(tracker.tracks().empty());
}

TEST(TrackerTest, AmbiguousThreeByThreeMatchesPermutationOracle) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3), var(0.01, 0.05);
  const TrackerConfig cfg;
  const double gate = chi_square_gate(2, cfg.gate);
  int fully_gated = 0;
  for (int trial = 0; trial < 300; ++trial) {
    // Three tracks close together so most detections gate with several.
    std::vector<ObstacleTrack> tracks;
    for (int k = 0; k < 3; ++k) {
      ObstacleTrack t = make_track(100.0 + 0.3 * k + jitter(rng), 0.2 * k + jitter(rng), 0.0, 0.0);
      t.covariance.topLeftCorner<2, 2>() = Eigen::Vector2d(var(rng), var(rng)).asDiagonal();
      tracks.push_back(t);
    }
    std::vector<RoadDetection> dets;
    for (int k = 0; k < 3; ++k) dets.push_back({100.3 + jitter(rng), 0.2 + jitter(rng), 0.7, std::nullopt});

    Eigen::MatrixXd cost(3, 3);
    bool all_gated = true;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        cost(i, j) = position_distance2(tracks[i], dets[j], straight_road(), cfg);
        all_gated = all_gated && cost(i, j) <= gate;
      }
    const auto got = associate(tracks, dets, straight_road(), cfg);
    if (!all_gated) continue;
    const auto best = oracle::brute_force_assignment(cost);
    ASSERT_EQ(got, best) << "trial " << trial;
    ++fully_gated;
  }
  EXPECT_GT(fully_gated, 50);
}

struct ConvergenceResult {
  double speed_error;
  double position_error;
  int confirmed;
};

ConvergenceResult run_constant_velocity(std::uint64_t seed, bool twin_detections) {
  const TrackerConfig cfg;
  ObstacleTracker tracker(straight_road(), cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> pos(0.0, cfg.position_sigma), spd(0.0, cfg.speed_sigma);
  const double v = 2.0, dt = 0.1;
  double s = 40.0;
  const double e_y = 0.8;
  for (int k = 0; k < 20; ++k) {
    if (k > 0) s += v * dt;
    std::vector<RoadDetection> dets{{s + pos(rng), e_y + pos(rng), 0.7, v + spd(rng)}};
    if (twin_detections) dets.push_back({s + 0.2 + pos(rng), e_y + pos(rng), 0.7, std::nullopt});
    if (k == 0) {
      tracker.associate_and_update(dets);
    } else {
      tracker.step(dt, dets);
    }
  }
  const auto c = tracker.confirmed();
  if (c.empty()) return {1e9, 1e9, 0};
  return {std::abs(c[0].speed() - v), std::hypot(c[0].s() - s, c[0].e_y() - e_y), static_cast<int>(c.size())};
}

TEST(TrackerTest, ConvergesOnConstantVelocityObstacle) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = run_constant_velocity(seed, false);
    EXPECT_EQ(r.confirmed, 1) << "seed " << seed;
    EXPECT_LT(r.speed_error, 0.2) << "seed " << seed;
    EXPECT_LT(r.position_error, 0.15) << "seed " << seed;
  }
}

TEST(TrackerTest, TwinDetectionsDoNotDuplicate) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    EXPECT_EQ(run_constant_velocity(seed, true).confirmed, 1) << "seed " << seed;
  }
}

TEST(TrackerTest, DeterministicReplay) {
  const auto a = run_constant_velocity(7, true), b = run_constant_velocity(7, true);
  EXPECT_EQ(a.speed_error, b.speed_error);
  EXPECT_EQ(a.position_error, b.position_error);
}

}  // namespace
}  // namespace roadframe
