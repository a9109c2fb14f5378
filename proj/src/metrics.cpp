#include "roadframe/metrics.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace roadframe {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double rms(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc / v.size());
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::max_iter:
      return "max_iter";
    case SolveStatus::infeasible_fallback:
      return "infeasible_fallback";
  }
  return "?";
}

SolveStatus parse_status(const std::string& s) {
  if (s == "converged") return SolveStatus::converged;
  if (s == "max_iter") return SolveStatus::max_iter;
  if (s == "infeasible_fallback") return SolveStatus::infeasible_fallback;
  throw CsvError("unknown solve status '" + s + "'");
}

std::string join(const std::vector<std::string>& cols) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += cols[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s) {
  if (s.empty()) throw CsvError("empty numeric field");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw CsvError("bad number '" + s + "'");
  return v;
}

int to_int(const std::string& s) {
  const double v = to_double(s);
  if (v != std::floor(v)) throw CsvError("bad integer '" + s + "'");
  return static_cast<int>(v);
}

// Reads the "# <kind> v1" line, optional "# key value" lines and the header row.
std::map<std::string, std::string> read_preamble(std::istream& in, const std::string& kind,
                                                 const std::vector<std::string>& cols) {
  std::string line;
  if (!std::getline(in, line) || line != "# " + kind + " v1") throw CsvError("expected '# " + kind + " v1' header");
  std::map<std::string, std::string> meta;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      std::istringstream kv(line.substr(2));
      std::string k, v;
      kv >> k >> v;
      meta[k] = v;
      continue;
    }
    if (line != join(cols)) throw CsvError("column header does not match the " + kind + " v1 schema");
    return meta;
  }
  throw CsvError("missing column header");
}

template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot open " + path + " for writing");
  fn(out);
  out.flush();
  if (!out) throw CsvError("write failed: " + path);
}

template <typename Fn>
void with_input(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path);
  try {
    fn(in);
  } catch (const CsvError& e) {
    throw CsvError(path + ": " + e.what());
  }
}

}  // namespace

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return kNaN;
  if (!(p > 0.0 && p <= 100.0)) throw std::invalid_argument("percentile must be in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * values.size()));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

Metrics compute_metrics(const SimLog& log, const MetricsOptions& opts) {
  Metrics m;
  m.cycles = static_cast<int>(log.cycles.size());
  m.aborted = log.aborted;

  std::vector<double> lateral, speed, solve, compute, nees;
  double corner = 0.0, peak = kNaN, clearance = kNaN;
  bool any_timing = false;
  // Per obstacle passage: (obstacle_ds, |e_y|) samples just past the obstacle.
  std::map<int, std::vector<std::pair<double, double>>> passes;

  for (const auto& c : log.cycles) {
    const double ey = std::abs(c.truth.e_y);
    m.max_abs_ey = std::max(m.max_abs_ey, ey);
    if (ey > log.lane_half_width) ++m.bound_violations;
    const bool near_obstacle = !std::isnan(c.obstacle_ds) && std::abs(c.obstacle_ds) <= opts.obstacle_window;
    if (c.straight && !near_obstacle) {
      lateral.push_back(c.truth.e_y);
      if (!c.start_straight) speed.push_back(c.truth.v - log.v_cruise);
    }
    if (!c.straight) corner = std::max(corner, ey);
    if (near_obstacle) peak = std::isnan(peak) ? ey : std::max(peak, ey);
    if (!std::isnan(c.clearance)) clearance = std::isnan(clearance) ? c.clearance : std::min(clearance, c.clearance);
    if (!std::isnan(c.obstacle_ds) && c.obstacle_ds >= 0.0 && c.obstacle_ds <= opts.return_horizon) {
      passes[c.lap].emplace_back(c.obstacle_ds, ey);
    }
    nees.push_back(c.nees);
    if (c.cycle_time > 0.0) any_timing = true;
    solve.push_back(c.planner_time);
    compute.push_back(c.planner_time + c.estimator_time);
  }

  m.lateral_rms_straight = rms(lateral);
  m.speed_rms_straight = rms(speed);
  m.corner_max_abs_ey = corner;
  m.avoidance_peak_abs_ey = peak;
  m.min_clearance = clearance;

  m.return_distance = passes.empty() ? kNaN : 0.0;
  for (auto& [lap, samples] : passes) {
    std::sort(samples.begin(), samples.end());
    double back = 0.0;
    for (const auto& [ds, ey] : samples) {
      if (ey >= opts.return_band) back = std::numeric_limits<double>::infinity();
      else if (std::isinf(back)) back = ds;
    }
    m.return_distance = std::max(m.return_distance, back);
  }

  if (any_timing) {
    m.solve_time_max = *std::max_element(solve.begin(), solve.end());
    m.solve_time_p99 = percentile(solve, 99.0);
    m.compute_time_p99 = percentile(compute, 99.0);
  } else {
    m.solve_time_max = m.solve_time_p99 = m.compute_time_p99 = kNaN;
  }

  std::vector<double> freq;
  for (std::size_t i = 1; i < log.cycles.size(); ++i) {
    const double dt = log.cycles[i].time - log.cycles[i - 1].time;
    if (dt > 0.0) freq.push_back(1.0 / dt);
  }
  if (freq.empty()) {
    m.frequency_mean = m.frequency_std = kNaN;
  } else {
    double mean = 0.0;
    for (double f : freq) mean += f;
    mean /= freq.size();
    double var = 0.0;
    for (double f : freq) var += (f - mean) * (f - mean);
    m.frequency_mean = mean;
    m.frequency_std = std::sqrt(var / freq.size());
  }
  if (nees.empty()) {
    m.nees_mean = kNaN;
  } else {
    double acc = 0.0;
    for (double v : nees) acc += v;
    m.nees_mean = acc / nees.size();
  }
  return m;
}

const std::vector<std::string>& log_columns() {
  static const std::vector<std::string> cols{
      "time",    "lap",       "segment",   "straight",   "start_straight", "obstacle_ds", "clearance",
      "s",       "e_y",       "e_psi",     "v",          "delta",          "est_s",       "est_e_y",
      "est_e_psi", "est_v",   "est_delta", "cov_trace",  "nees",           "delta_r",     "v_r",
      "status",  "sqp_iter",  "qp_iter",   "relaxed",    "frame",          "tracks"};
  return cols;
}

const std::vector<std::string>& tick_columns() {
  static const std::vector<std::string> cols{"time",     "s",     "e_y",             "e_psi",    "v",
                                             "delta",    "delta_ref", "v_ref",       "steering_torque",
                                             "traction", "brake", "watchdog"};
  return cols;
}

const std::vector<std::string>& timing_columns() {
  static const std::vector<std::string> cols{"time", "estimator_time", "perception_time", "planner_time",
                                             "cycle_time"};
  return cols;
}

void write_log_csv(std::ostream& out, const SimLog& log) {
  out << "# log v1\n# lane_half_width " << num(log.lane_half_width) << "\n# v_cruise " << num(log.v_cruise)
      << "\n# aborted " << int(log.aborted) << "\n"
      << join(log_columns()) << "\n";
  for (const auto& c : log.cycles) {
    std::string tracks;
    for (std::size_t i = 0; i < c.tracks.size(); ++i) {
      const auto& t = c.tracks[i];
      if (i) tracks += ';';
      tracks += std::to_string(t.id) + ':' + num(t.s) + ':' + num(t.e_y) + ':' + num(t.radius) + ':' + num(t.speed);
    }
    const EgoState& x = c.truth;
    const EgoState& e = c.estimate;
    out << num(c.time) << ',' << c.lap << ',' << c.segment << ',' << int(c.straight) << ',' << int(c.start_straight)
        << ',' << num(c.obstacle_ds) << ',' << num(c.clearance) << ',' << num(x.s) << ',' << num(x.e_y) << ','
        << num(x.e_psi) << ',' << num(x.v) << ',' << num(x.delta) << ',' << num(e.s) << ',' << num(e.e_y) << ','
        << num(e.e_psi) << ',' << num(e.v) << ',' << num(e.delta) << ',' << num(c.covariance_trace) << ','
        << num(c.nees) << ',' << num(c.delta_r) << ',' << num(c.v_r) << ',' << status_name(c.status) << ','
        << c.sqp_iterations << ',' << c.qp_iterations << ',' << int(c.relaxed) << ',' << c.frame_hex << ','
        << tracks << '\n';
  }
}

void write_tick_csv(std::ostream& out, const SimLog& log) {
  out << "# ticks v1\n" << join(tick_columns()) << "\n";
  for (const auto& t : log.ticks) {
    const EgoState& x = t.truth;
    out << num(t.time) << ',' << num(x.s) << ',' << num(x.e_y) << ',' << num(x.e_psi) << ',' << num(x.v) << ','
        << num(x.delta) << ',' << num(t.delta_ref) << ',' << num(t.v_ref) << ',' << num(t.actuator.steering_torque)
        << ',' << num(t.actuator.traction) << ',' << num(t.actuator.brake) << ',' << int(t.watchdog) << '\n';
  }
}

void write_timing_csv(std::ostream& out, const SimLog& log) {
  out << "# timing v1\n" << join(timing_columns()) << "\n";
  for (const auto& c : log.cycles) {
    out << num(c.time) << ',' << num(c.estimator_time) << ',' << num(c.perception_time) << ','
        << num(c.planner_time) << ',' << num(c.cycle_time) << '\n';
  }
}

void write_metrics_csv(std::ostream& out, const Metrics& m) {
  out << "# metrics v1\nmetric,value\n";
  auto row = [&](const char* name, double v) { out << name << ',' << num(v) << '\n'; };
  row("lateral_rms_straight", m.lateral_rms_straight);
  row("corner_max_abs_ey", m.corner_max_abs_ey);
  row("avoidance_peak_abs_ey", m.avoidance_peak_abs_ey);
  row("min_clearance", m.min_clearance);
  row("return_distance", m.return_distance);
  row("speed_rms_straight", m.speed_rms_straight);
  row("solve_time_max", m.solve_time_max);
  row("solve_time_p99", m.solve_time_p99);
  row("compute_time_p99", m.compute_time_p99);
  row("frequency_mean", m.frequency_mean);
  row("frequency_std", m.frequency_std);
  row("nees_mean", m.nees_mean);
  row("max_abs_ey", m.max_abs_ey);
  row("bound_violations", m.bound_violations);
  row("cycles", m.cycles);
  row("aborted", m.aborted ? 1 : 0);
}

SimLog read_log_csv(std::istream& in) {
  SimLog log;
  const auto meta = read_preamble(in, "log", log_columns());
  if (auto it = meta.find("lane_half_width"); it != meta.end()) log.lane_half_width = to_double(it->second);
  if (auto it = meta.find("v_cruise"); it != meta.end()) log.v_cruise = to_double(it->second);
  if (auto it = meta.find("aborted"); it != meta.end()) log.aborted = to_int(it->second) != 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != log_columns().size()) {
      throw CsvError("row " + std::to_string(line_no) + ": expected " + std::to_string(log_columns().size()) +
                     " columns, got " + std::to_string(f.size()));
    }
    CycleRecord c;
    try {
      std::size_t i = 0;
      c.time = to_double(f[i++]);
      c.lap = to_int(f[i++]);
      c.segment = to_int(f[i++]);
      c.straight = to_int(f[i++]) != 0;
      c.start_straight = to_int(f[i++]) != 0;
      c.obstacle_ds = to_double(f[i++]);
      c.clearance = to_double(f[i++]);
      for (EgoState* x : {&c.truth, &c.estimate}) {
        x->s = to_double(f[i++]);
        x->e_y = to_double(f[i++]);
        x->e_psi = to_double(f[i++]);
        x->v = to_double(f[i++]);
        x->delta = to_double(f[i++]);
      }
      c.covariance_trace = to_double(f[i++]);
      c.nees = to_double(f[i++]);
      c.delta_r = to_double(f[i++]);
      c.v_r = to_double(f[i++]);
      c.status = parse_status(f[i++]);
      c.sqp_iterations = to_int(f[i++]);
      c.qp_iterations = to_int(f[i++]);
      c.relaxed = to_int(f[i++]) != 0;
      c.frame_hex = f[i++];
      if (!f[i].empty()) {
        for (const auto& item : split(f[i], ';')) {
          const auto p = split(item, ':');
          if (p.size() != 5) throw CsvError("bad track entry '" + item + "'");
          c.tracks.push_back({to_int(p[0]), to_double(p[1]), to_double(p[2]), to_double(p[3]), to_double(p[4])});
        }
      }
    } catch (const CsvError& e) {
      throw CsvError("row " + std::to_string(line_no) + ": " + e.what());
    }
    log.cycles.push_back(std::move(c));
  }
  return log;
}

void read_timing_csv(std::istream& in, SimLog& log) {
  read_preamble(in, "timing", timing_columns());
  std::string line;
  std::size_t k = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != timing_columns().size()) throw CsvError("timing row with wrong column count");
    if (k >= log.cycles.size() || num(log.cycles[k].time) != f[0]) {
      throw CsvError("timing rows do not line up with the log");
    }
    CycleRecord& c = log.cycles[k++];
    c.estimator_time = to_double(f[1]);
    c.perception_time = to_double(f[2]);
    c.planner_time = to_double(f[3]);
    c.cycle_time = to_double(f[4]);
  }
}

void write_log_csv(const std::string& path, const SimLog& log) {
  with_output(path, [&](std::ostream& o) { write_log_csv(o, log); });
}
void write_tick_csv(const std::string& path, const SimLog& log) {
  with_output(path, [&](std::ostream& o) { write_tick_csv(o, log); });
}
void write_timing_csv(const std::string& path, const SimLog& log) {
  with_output(path, [&](std::ostream& o) { write_timing_csv(o, log); });
}
void write_metrics_csv(const std::string& path, const Metrics& m) {
  with_output(path, [&](std::ostream& o) { write_metrics_csv(o, m); });
}
SimLog read_log_csv(const std::string& path) {
  SimLog log;
  with_input(path, [&](std::istream& i) { log = read_log_csv(i); });
  return log;
}
void read_timing_csv(const std::string& path, SimLog& log) {
  with_input(path, [&](std::istream& i) { read_timing_csv(i, log); });
}

}  // namespace roadframe
