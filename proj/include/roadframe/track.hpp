#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace roadframe {

class TrackError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a lateral offset reaches the centre of curvature.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FrenetPose {
  double s = 0.0;
  double e_y = 0.0;
  double e_psi = 0.0;
};

struct CartesianPose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;

  Eigen::Vector2d position() const { return {x, y}; }
};

/// Two equally close centerline projections that the tie policy refused to
/// resolve.
class AmbiguousProjection : public std::runtime_error {
 public:
  AmbiguousProjection(FrenetPose first, FrenetPose second);
  FrenetPose first;
  FrenetPose second;
};

struct TrackSegment {
  enum class Kind { straight, arc };

  Kind kind = Kind::straight;
  double length = 0.0;  // straight only
  double radius = 0.0;  // arc only
  double sweep = 0.0;   // arc only, signed; positive turns left

  static TrackSegment straight(double length) { return {Kind::straight, length, 0.0, 0.0}; }
  static TrackSegment arc(double radius, double sweep) { return {Kind::arc, 0.0, radius, sweep}; }

  double arc_length() const;
  double curvature() const;
};

enum class TieBreak {
  smallest_s,  // equidistant candidates resolve to the smaller arc length
  strict,      // equidistant candidates at different s throw AmbiguousProjection
};

/// Closed or open centerline made of straights and circular arcs, starting at
/// the origin with heading 0. Immutable once built.
class Track {
 public:
  Track(std::vector<TrackSegment> segments, double lane_half_width);

  const std::vector<TrackSegment>& segments() const { return segments_; }
  double lane_half_width() const { return lane_half_width_; }
  double total_length() const { return total_length_; }
  bool closed() const { return closed_; }

  /// Distance and heading mismatch between the end pose and the start pose.
  double closure_residual() const { return closure_position_; }
  double closure_heading_residual() const { return closure_heading_; }

  /// Index of the segment containing arc length s (s already wrapped).
  std::size_t segment_index(double s) const;
  /// Arc length at which segment i starts.
  double segment_start(std::size_t i) const { return starts_[i]; }

  /// Maps s into [0, total_length) on closed tracks; throws on open tracks
  /// when s is outside [0, total_length].
  double wrap_s(double s) const;
  /// Shortest signed arc-length difference a - b (wrapped on closed tracks).
  double s_difference(double a, double b) const;

  CartesianPose centerline_at(double s) const;
  double curvature_at(double s) const;

  CartesianPose frenet_to_cartesian(const FrenetPose& f) const;
  FrenetPose cartesian_to_frenet(const CartesianPose& p, TieBreak tie = TieBreak::smallest_s) const;

 private:
  std::vector<TrackSegment> segments_;
  std::vector<double> starts_;
  std::vector<CartesianPose> start_poses_;
  double lane_half_width_;
  double total_length_ = 0.0;
  bool closed_ = false;
  double closure_position_ = 0.0;
  double closure_heading_ = 0.0;
};

Track build_track(std::vector<TrackSegment> segments, double lane_half_width);

/// Urban test loop: 130 m and 40 m straights joined by four left quarter
/// circles of 6 m arc length, 364 m in total, 2.3 m lateral half-width.
Track build_campus_loop();

/// Parses the line-oriented `track v1` text format.
Track parse_track(std::istream& in);
Track load_track(const std::string& path);
void write_track(std::ostream& out, const Track& track);

}  // namespace roadframe
