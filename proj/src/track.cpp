#include "roadframe/track.hpp"

#include "roadframe/angles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace roadframe {
namespace {

constexpr double kClosureTolerance = 1e-6;
constexpr double kTieTolerance = 1e-9;

Eigen::Vector2d tangent(double heading) { return {std::cos(heading), std::sin(heading)}; }
Eigen::Vector2d normal(double heading) { return {-std::sin(heading), std::cos(heading)}; }

// Pose at local arc length u along a segment starting at `start`.
CartesianPose advance(const CartesianPose& start, const TrackSegment& seg, double u) {
  if (seg.kind == TrackSegment::Kind::straight) {
    return {start.x + u * std::cos(start.psi), start.y + u * std::sin(start.psi), start.psi};
  }
  const double sign = seg.sweep > 0 ? 1.0 : -1.0;
  const Eigen::Vector2d center = start.position() + sign * seg.radius * normal(start.psi);
  const double heading = start.psi + seg.curvature() * u;
  const Eigen::Vector2d p = center + sign * seg.radius * Eigen::Vector2d(std::sin(heading), -std::cos(heading));
  return {p.x(), p.y(), heading};
}

std::string format_pose(const FrenetPose& f) {
  std::ostringstream os;
  os << "(s=" << f.s << ", e_y=" << f.e_y << ")";
  return os.str();
}

}  // namespace

AmbiguousProjection::AmbiguousProjection(FrenetPose a, FrenetPose b)
    : std::runtime_error("ambiguous centerline projection between " + format_pose(a) + " and " + format_pose(b)),
      first(a),
      second(b) {}

double TrackSegment::arc_length() const {
  return kind == Kind::straight ? length : radius * std::abs(sweep);
}

double TrackSegment::curvature() const {
  if (kind == Kind::straight) return 0.0;
  return (sweep > 0 ? 1.0 : -1.0) / radius;
}

Track::Track(std::vector<TrackSegment> segments, double lane_half_width)
    : segments_(std::move(segments)), lane_half_width_(lane_half_width) {
  if (segments_.empty()) throw TrackError("track needs at least one segment");
  if (!(lane_half_width_ > 0.0) || !std::isfinite(lane_half_width_)) {
    throw TrackError("lane half-width must be positive");
  }
  CartesianPose pose;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& seg = segments_[i];
    if (seg.kind == TrackSegment::Kind::straight) {
      if (!(seg.length > 0.0) || !std::isfinite(seg.length)) {
        throw TrackError("segment " + std::to_string(i) + ": straight length must be positive");
      }
    } else {
      if (!(seg.radius > 0.0) || !std::isfinite(seg.radius)) {
        throw TrackError("segment " + std::to_string(i) + ": arc radius must be positive");
      }
      if (seg.sweep == 0.0 || !std::isfinite(seg.sweep) || std::abs(seg.sweep) >= 2 * kPi) {
        throw TrackError("segment " + std::to_string(i) + ": arc sweep must be non-zero and below a full turn");
      }
    }
    starts_.push_back(total_length_);
    start_poses_.push_back(pose);
    pose = advance(pose, seg, seg.arc_length());
    total_length_ += seg.arc_length();
  }
  closure_position_ = std::hypot(pose.x, pose.y);
  closure_heading_ = std::abs(wrap_angle(pose.psi));
  closed_ = closure_position_ < kClosureTolerance && closure_heading_ < kClosureTolerance;
}

std::size_t Track::segment_index(double s) const {
  auto it = std::upper_bound(starts_.begin(), starts_.end(), s);
  if (it == starts_.begin()) return 0;
  return static_cast<std::size_t>(std::distance(starts_.begin(), it) - 1);
}

double Track::wrap_s(double s) const {
  if (closed_) {
    double w = std::fmod(s, total_length_);
    if (w < 0.0) w += total_length_;
    if (w >= total_length_) w = 0.0;
    return w;
  }
  if (s < 0.0 || s > total_length_) {
    throw TrackError("arc length " + std::to_string(s) + " outside open track [0, " + std::to_string(total_length_) + "]");
  }
  return s;
}

double Track::s_difference(double a, double b) const {
  double d = a - b;
  if (closed_) {
    d = std::remainder(d, total_length_);
  }
  return d;
}

CartesianPose Track::centerline_at(double s) const {
  s = wrap_s(s);
  const std::size_t i = segment_index(s);
  CartesianPose p = advance(start_poses_[i], segments_[i], s - starts_[i]);
  p.psi = wrap_angle(p.psi);
  return p;
}

double Track::curvature_at(double s) const { return segments_[segment_index(wrap_s(s))].curvature(); }

CartesianPose Track::frenet_to_cartesian(const FrenetPose& f) const {
  const double kappa = curvature_at(f.s);
  if (std::abs(f.e_y * kappa) >= 1.0) {
    throw SingularityError("lateral offset " + std::to_string(f.e_y) + " reaches the curvature centre at s=" +
                           std::to_string(f.s));
  }
  const CartesianPose c = centerline_at(f.s);
  const Eigen::Vector2d p = c.position() + f.e_y * normal(c.psi);
  return {p.x(), p.y(), wrap_angle(c.psi + f.e_psi)};
}

FrenetPose Track::cartesian_to_frenet(const CartesianPose& p, TieBreak tie) const {
  struct Candidate {
    double distance;
    double s;
    CartesianPose foot;
  };
  const Eigen::Vector2d q = p.position();
  std::vector<Candidate> candidates;
  candidates.reserve(segments_.size());

  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& seg = segments_[i];
    const auto& start = start_poses_[i];
    double u = 0.0;
    if (seg.kind == TrackSegment::Kind::straight) {
      u = std::clamp((q - start.position()).dot(tangent(start.psi)), 0.0, seg.length);
    } else {
      const double sign = seg.sweep > 0 ? 1.0 : -1.0;
      const Eigen::Vector2d center = start.position() + sign * seg.radius * normal(start.psi);
      const Eigen::Vector2d radial = q - center;
      if (radial.norm() == 0.0) continue;  // every arc point is equidistant; neighbours decide
      const double heading = std::atan2(radial.y(), radial.x()) + sign * kPi / 2;
      const double mid = start.psi + seg.sweep / 2;
      const double turned = seg.sweep / 2 + wrap_angle(heading - mid);
      const double lo = std::min(0.0, seg.sweep);
      const double hi = std::max(0.0, seg.sweep);
      u = std::clamp(turned, lo, hi) * sign * seg.radius;
    }
    const CartesianPose foot = advance(start, seg, u);
    candidates.push_back({(q - foot.position()).norm(), starts_[i] + u, foot});
  }
  if (candidates.empty()) throw SingularityError("point coincides with every arc centre");

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.distance < b.distance; });

  auto to_frenet = [&](const Candidate& c) {
    FrenetPose f;
    f.s = closed_ ? wrap_s(c.s) : std::clamp(c.s, 0.0, total_length_);
    f.e_y = (q - c.foot.position()).dot(normal(c.foot.psi));
    f.e_psi = wrap_angle(p.psi - c.foot.psi);
    return f;
  };

  Candidate best = candidates.front();
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const Candidate& other = candidates[k];
    if (other.distance - candidates.front().distance > kTieTolerance) break;
    const double gap = std::abs(s_difference(other.s, best.s));
    if (gap <= kTieTolerance) continue;  // same foot point seen from adjacent segments
    if (tie == TieBreak::strict) throw AmbiguousProjection(to_frenet(best), to_frenet(other));
    const double s_other = closed_ ? wrap_s(other.s) : other.s;
    const double s_best = closed_ ? wrap_s(best.s) : best.s;
    if (s_other < s_best) best = other;
  }
  return to_frenet(best);
}

Track build_track(std::vector<TrackSegment> segments, double lane_half_width) {
  return Track(std::move(segments), lane_half_width);
}

Track build_campus_loop() {
  const double radius = 24.0 / (2 * kPi);
  const double quarter = kPi / 2;
  return Track({TrackSegment::straight(130.0), TrackSegment::arc(radius, quarter), TrackSegment::straight(40.0),
                TrackSegment::arc(radius, quarter), TrackSegment::straight(130.0), TrackSegment::arc(radius, quarter),
                TrackSegment::straight(40.0), TrackSegment::arc(radius, quarter)},
               2.3);
}

Track parse_track(std::istream& in) {
  std::string line;
  int line_no = 0;
  bool header = false;
  double half_width = std::numeric_limits<double>::quiet_NaN();
  std::vector<TrackSegment> segments;

  auto fail = [&](const std::string& what) { throw TrackError("line " + std::to_string(line_no) + ": " + what); };

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

    if (!header) {
      std::string version;
      tokens >> version;
      if (keyword != "track" || version != "v1") fail("expected header 'track v1'");
      header = true;
    } else if (keyword == "halfwidth") {
      half_width = number();
    } else if (keyword == "straight") {
      segments.push_back(TrackSegment::straight(number()));
    } else if (keyword == "arc") {
      const double radius = number();
      const double sweep = number();
      segments.push_back(TrackSegment::arc(radius, sweep));
    } else {
      fail("unknown keyword '" + keyword + "'");
    }
    std::string extra;
    if (tokens >> extra) fail("trailing token '" + extra + "'");
  }
  if (!header) throw TrackError("missing 'track v1' header");
  if (std::isnan(half_width)) throw TrackError("missing 'halfwidth' line");
  return Track(std::move(segments), half_width);
}

Track load_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TrackError("cannot open track file " + path);
  try {
    return parse_track(in);
  } catch (const TrackError& e) {
    throw TrackError(path + ": " + e.what());
  }
}

void write_track(std::ostream& out, const Track& track) {
  out << "track v1\n" << std::setprecision(17) << "halfwidth " << track.lane_half_width() << "\n";
  for (const auto& seg : track.segments()) {
    if (seg.kind == TrackSegment::Kind::straight) {
      out << "straight " << seg.length << "\n";
    } else {
      out << "arc " << seg.radius << " " << seg.sweep << "\n";
    }
  }
}

}  // namespace roadframe
