#pragma once

#include "roadframe/sim.hpp"
#include "roadframe/track.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace roadframe {

struct Metrics {
  double lateral_rms_straight = 0.0;   // m, straights outside the obstacle window
  double corner_max_abs_ey = 0.0;      // m, arcs
  double avoidance_peak_abs_ey = 0.0;  // m, inside the obstacle window (nan when no obstacle was met)
  double min_clearance = 0.0;          // m, truth distance to the nearest active obstacle edge
  double return_distance = 0.0;        // m past the obstacle after which |e_y| stays below the return band
  double speed_rms_straight = 0.0;     // m/s about cruise, also excluding the standing-start straight
  double solve_time_max = 0.0;         // s
  double solve_time_p99 = 0.0;         // s
  double compute_time_p99 = 0.0;       // s, estimator + planner
  double frequency_mean = 0.0;         // Hz
  double frequency_std = 0.0;          // Hz
  double nees_mean = 0.0;
  double max_abs_ey = 0.0;             // m, whole run
  int bound_violations = 0;
  int cycles = 0;
  bool aborted = false;
};

struct MetricsOptions {
  double obstacle_window = 20.0;  // +- m around an active obstacle
  double return_band = 0.2;       // m
  double return_horizon = 40.0;   // m past the obstacle inspected for the return
};

/// Timing fields are nan when the log carries no wall-clock data.
Metrics compute_metrics(const SimLog& log, const MetricsOptions& opts = {});

/// Nearest-rank percentile, p in (0, 100].
double percentile(std::vector<double> values, double p);

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Column lists of the v1 schemas.
const std::vector<std::string>& log_columns();
const std::vector<std::string>& tick_columns();
const std::vector<std::string>& timing_columns();

/// All numbers at 9 significant digits. Each file starts with a
/// "# <kind> v1" line and a header row.
void write_log_csv(std::ostream& out, const SimLog& log);
void write_tick_csv(std::ostream& out, const SimLog& log);
void write_timing_csv(std::ostream& out, const SimLog& log);
void write_metrics_csv(std::ostream& out, const Metrics& m);

/// Inverse of write_log_csv (cycles only).
SimLog read_log_csv(std::istream& in);
/// Fills the wall-clock fields of matching cycles.
void read_timing_csv(std::istream& in, SimLog& log);

/// Path-based wrappers that raise CsvError naming the path.
void write_log_csv(const std::string& path, const SimLog& log);
void write_tick_csv(const std::string& path, const SimLog& log);
void write_timing_csv(const std::string& path, const SimLog& log);
void write_metrics_csv(const std::string& path, const Metrics& m);
SimLog read_log_csv(const std::string& path);
void read_timing_csv(const std::string& path, SimLog& log);

}  // namespace roadframe
