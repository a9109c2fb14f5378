#include "roadframe/perception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace roadframe {

OccupancyGrid::OccupancyGrid(double cell_size, double extent) : cell_size_(cell_size), extent_(extent) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("grid cell size must be positive");
  if (!(extent > 0.0)) throw std::invalid_argument("grid extent must be positive");
  side_ = static_cast<int>(std::ceil(extent / cell_size - 1e-9));
  counts_.assign(static_cast<std::size_t>(side_) * side_, 0);
}

std::optional<std::pair<int, int>> OccupancyGrid::cell_of(double x, double y) const {
  const double half = 0.5 * side_ * cell_size_;
  // Division can land one cell off at exact boundaries; settle against the
  // same lower edges cell_center uses.
  auto index = [&](double v) {
    double i = std::floor((v + half) / cell_size_);
    if (v >= (i + 1) * cell_size_ - half) i += 1;
    if (v < i * cell_size_ - half) i -= 1;
    return i;
  };
  const double fx = index(x), fy = index(y);
  if (fx < 0 || fy < 0 || fx >= side_ || fy >= side_) return std::nullopt;
  return std::make_pair(static_cast<int>(fx), static_cast<int>(fy));
}

Eigen::Vector2d OccupancyGrid::cell_center(int ix, int iy) const {
  const double half = 0.5 * side_ * cell_size_;
  return {(ix + 0.5) * cell_size_ - half, (iy + 0.5) * cell_size_ - half};
}

int OccupancyGrid::occupied_cells() const {
  return static_cast<int>(std::count_if(counts_.begin(), counts_.end(), [](int c) { return c > 0; }));
}

PointCloud remove_ground(const PointCloud& pc, double z_min, double z_max) {
  if (!(z_min < z_max)) throw std::invalid_argument("remove_ground needs z_min < z_max");
  PointCloud out;
  out.timestamp = pc.timestamp;
  std::copy_if(pc.points.begin(), pc.points.end(), std::back_inserter(out.points),
               [&](const Eigen::Vector3d& p) { return p.z() > z_min && p.z() <= z_max; });
  return out;
}

OccupancyGrid project_to_grid(const PointCloud& pc, double cell_size, double extent) {
  OccupancyGrid grid(cell_size, extent);
  for (const auto& p : pc.points) {
    if (auto cell = grid.cell_of(p.x(), p.y())) grid.add(cell->first, cell->second);
  }
  return grid;
}

std::vector<Detection> cluster_grid(const OccupancyGrid& grid, int min_cluster_size) {
  const int n = grid.side();
  std::vector<int> label(static_cast<std::size_t>(n) * n, -1);
  std::vector<Detection> out;
  std::vector<std::pair<int, int>> stack, members;

  for (int y0 = 0; y0 < n; ++y0) {
    for (int x0 = 0; x0 < n; ++x0) {
      if (grid.count(x0, y0) == 0 || label[y0 * n + x0] >= 0) continue;
      members.clear();
      stack.assign(1, {x0, y0});
      label[y0 * n + x0] = 1;
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        members.emplace_back(cx, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= n || ny >= n) continue;
            if (grid.count(nx, ny) == 0 || label[ny * n + nx] >= 0) continue;
            label[ny * n + nx] = 1;
            stack.emplace_back(nx, ny);
          }
        }
      }

      Detection d;
      Eigen::Vector2d weighted = Eigen::Vector2d::Zero();
      for (const auto& [mx, my] : members) {
        const int c = grid.count(mx, my);
        d.point_count += c;
        weighted += c * grid.cell_center(mx, my);
      }
      if (d.point_count < min_cluster_size) continue;
      d.centroid = weighted / d.point_count;
      // Distance to the nearest point of each cell, not to its centre, so
      // the estimate does not grow by half a cell diagonal.
      const double half_cell = 0.5 * grid.cell_size();
      for (const auto& [mx, my] : members) {
        const Eigen::Vector2d gap =
            ((grid.cell_center(mx, my) - d.centroid).cwiseAbs().array() - half_cell).cwiseMax(0.0).matrix();
        d.radius = std::max(d.radius, gap.norm());
      }
      out.push_back(d);
    }
  }
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.centroid.x() != b.centroid.x()) return a.centroid.x() < b.centroid.x();
    return a.centroid.y() < b.centroid.y();
  });
  return out;
}

std::vector<FusedDetection> fuse_radar(const std::vector<Detection>& detections,
                                       const std::vector<RadarReturn>& radar, double gate_radius) {
  if (!(gate_radius > 0.0)) throw std::invalid_argument("radar gate radius must be positive");
  constexpr double kRadarWeight = 0.5;

  struct Pair {
    double distance;
    std::size_t det;
    std::size_t ret;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    for (std::size_t j = 0; j < radar.size(); ++j) {
      const double d = (detections[i].centroid - radar[j].position).norm();
      if (d <= gate_radius) pairs.push_back({d, i, j});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.distance < b.distance; });

  std::vector<FusedDetection> out;
  out.reserve(detections.size());
  for (const auto& d : detections) out.push_back({d, std::nullopt});
  std::vector<bool> det_used(detections.size(), false), ret_used(radar.size(), false);
  for (const auto& p : pairs) {
    if (det_used[p.det] || ret_used[p.ret]) continue;
    det_used[p.det] = ret_used[p.ret] = true;
    auto& f = out[p.det];
    f.detection.centroid = (1.0 - kRadarWeight) * f.detection.centroid + kRadarWeight * radar[p.ret].position;
    f.speed = radar[p.ret].range_rate;
  }
  return out;
}

PointCloud synth_lidar_scan(const std::vector<CircleObstacle>& obstacles, const CartesianPose& ego,
                            const LidarConfig& cfg, std::mt19937_64& rng, double timestamp) {
  std::normal_distribution<double> noise(0.0, cfg.range_sigma);
  PointCloud pc;
  pc.timestamp = timestamp;
  const int rays = static_cast<int>(std::llround(2.0 * 3.141592653589793 / cfg.angular_resolution));
  const Eigen::Vector2d origin = ego.position();

  for (int k = 0; k < rays; ++k) {
    const double bearing = k * cfg.angular_resolution;
    const double world = ego.psi + bearing;
    const Eigen::Vector2d dir(std::cos(world), std::sin(world));

    double hit = std::numeric_limits<double>::infinity();
    for (const auto& ob : obstacles) {
      // |origin + t dir - c|^2 = r^2
      const Eigen::Vector2d oc = origin - ob.center;
      const double b = oc.dot(dir);
      const double c = oc.squaredNorm() - ob.radius * ob.radius;
      const double disc = b * b - c;
      if (disc < 0.0) continue;
      const double t = -b - std::sqrt(disc);
      if (t > 0.0 && t < hit) hit = t;
    }

    const double cb = std::cos(bearing), sb = std::sin(bearing);
    if (hit <= cfg.max_range) {
      for (double z : cfg.beam_heights) {
        if (z > cfg.obstacle_height) continue;
        const double r = hit + noise(rng);
        pc.points.emplace_back(r * cb, r * sb, z);
      }
    }
    for (double ring : cfg.ground_ring_ranges) {
      if (ring >= hit || ring > cfg.max_range) continue;
      const double r = ring + noise(rng);
      pc.points.emplace_back(r * cb, r * sb, 0.0);
    }
  }
  return pc;
}

std::vector<RadarReturn> synth_radar(const std::vector<CircleObstacle>& obstacles, const CartesianPose& ego,
                                     double ego_speed, const RadarConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> pos_noise(0.0, cfg.position_sigma);
  std::normal_distribution<double> rate_noise(0.0, cfg.range_rate_sigma);
  const double c = std::cos(ego.psi), s = std::sin(ego.psi);
  const Eigen::Vector2d ego_velocity = ego_speed * Eigen::Vector2d(c, s);

  std::vector<RadarReturn> out;
  for (const auto& ob : obstacles) {
    const Eigen::Vector2d rel_world = ob.center - ego.position();
    const Eigen::Vector2d rel(c * rel_world.x() + s * rel_world.y(), -s * rel_world.x() + c * rel_world.y());
    const double range = rel.norm();
    if (range > cfg.max_range || range == 0.0) continue;
    if (std::abs(std::atan2(rel.y(), rel.x())) > 0.5 * cfg.field_of_view) continue;
    const double rate = rel_world.dot(ob.velocity - ego_velocity) / range;
    out.push_back({rel + Eigen::Vector2d(pos_noise(rng), pos_noise(rng)), rate + rate_noise(rng)});
  }
  return out;
}

}  // namespace roadframe
