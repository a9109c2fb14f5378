#pragma once

#include "roadframe/track.hpp"

#include <Eigen/Core>

#include <optional>
#include <random>
#include <vector>

namespace roadframe {

/// Points in the vehicle frame (x forward, y left, z up).
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  double timestamp = 0.0;
};

/// Square vehicle-centred grid covering [-extent/2, extent/2) on both axes.
/// Cells are half-open [low, high).
class OccupancyGrid {
 public:
  OccupancyGrid(double cell_size, double extent);

  double cell_size() const { return cell_size_; }
  double extent() const { return extent_; }
  int side() const { return side_; }

  int count(int ix, int iy) const { return counts_[index(ix, iy)]; }
  void add(int ix, int iy, int n = 1) { counts_[index(ix, iy)] += n; }
  /// Cell containing (x, y), or nullopt outside the extent.
  std::optional<std::pair<int, int>> cell_of(double x, double y) const;
  Eigen::Vector2d cell_center(int ix, int iy) const;
  int occupied_cells() const;

 private:
  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * side_ + ix; }

  double cell_size_;
  double extent_;
  int side_;
  std::vector<int> counts_;
};

struct Detection {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  double radius = 0.0;  // largest distance from the centroid to a member cell
  int point_count = 0;
};

struct RadarReturn {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double range_rate = 0.0;
};

struct FusedDetection {
  Detection detection;
  std::optional<double> speed;
};

/// Keeps points with z in (z_min, z_max], preserving order.
PointCloud remove_ground(const PointCloud& pc, double z_min, double z_max);

OccupancyGrid project_to_grid(const PointCloud& pc, double cell_size, double extent);

/// 8-connected components of occupied cells with at least `min_cluster_size`
/// points, ordered by (centroid.x, centroid.y).
std::vector<Detection> cluster_grid(const OccupancyGrid& grid, int min_cluster_size);

/// Greedy nearest association of radar returns to detections inside
/// `gate_radius`; matched centroids are averaged with the radar position.
std::vector<FusedDetection> fuse_radar(const std::vector<Detection>& detections,
                                       const std::vector<RadarReturn>& radar, double gate_radius);

struct CircleObstacle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();  // world frame
  double radius = 0.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
};

struct LidarConfig {
  double angular_resolution = 0.2 * 3.141592653589793 / 180.0;
  double max_range = 30.0;
  double range_sigma = 0.02;
  double obstacle_height = 1.5;
  std::vector<double> beam_heights{0.8};             // z of returns off obstacles
  std::vector<double> ground_ring_ranges{3.0, 6.0};  // z = 0 returns when unoccluded
};

/// Ray-casts a 360 degree scan from the ego pose against circular obstacles.
PointCloud synth_lidar_scan(const std::vector<CircleObstacle>& obstacles, const CartesianPose& ego,
                            const LidarConfig& cfg, std::mt19937_64& rng, double timestamp = 0.0);

struct RadarConfig {
  double field_of_view = 1.2;  // full opening angle, radians, centred forward
  double max_range = 60.0;
  double position_sigma = 0.1;
  double range_rate_sigma = 0.05;
};

/// One return per obstacle centre inside the radar field of view. Range rate
/// is relative to the moving ego vehicle.
std::vector<RadarReturn> synth_radar(const std::vector<CircleObstacle>& obstacles, const CartesianPose& ego,
                                     double ego_speed, const RadarConfig& cfg, std::mt19937_64& rng);

}  // namespace roadframe
