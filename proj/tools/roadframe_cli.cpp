// roadframe: run scenarios, recompute metrics, check track files, benchmark.

#include "roadframe/metrics.hpp"
#include "roadframe/scenario.hpp"
#include "roadframe/sim.hpp"
#include "roadframe/track.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace roadframe;

enum Exit { kOk = 0, kUsage = 1, kScenario = 2, kAbort = 3 };

void print_metrics(const Metrics& m) {
  std::printf("lateral RMS (straights)   %.4f m\n", m.lateral_rms_straight);
  std::printf("corner max |e_y|          %.4f m\n", m.corner_max_abs_ey);
  std::printf("avoidance peak |e_y|      %.4f m\n", m.avoidance_peak_abs_ey);
  std::printf("min obstacle clearance    %.4f m\n", m.min_clearance);
  std::printf("return distance           %.2f m\n", m.return_distance);
  std::printf("speed RMS (straights)     %.4f m/s\n", m.speed_rms_straight);
  std::printf("solve time max / p99      %.4f / %.4f s\n", m.solve_time_max, m.solve_time_p99);
  std::printf("est+plan p99              %.4f s\n", m.compute_time_p99);
  std::printf("frequency mean / std      %.3f / %.3f Hz\n", m.frequency_mean, m.frequency_std);
  std::printf("NEES mean                 %.3f\n", m.nees_mean);
  std::printf("bound violations          %d\n", m.bound_violations);
  std::printf("cycles                    %d%s\n", m.cycles, m.aborted ? " (aborted)" : "");
}

int cmd_run(const std::string& scenario, std::optional<std::uint64_t> seed, const std::string& out_dir,
            bool concurrent, double speedup) {
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(scenario);
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kScenario;
  }
  if (seed) cfg.seed = *seed;

  RunOptions opts;
  opts.concurrent = concurrent;
  opts.speedup = speedup;
  const SimLog log = run_scenario(cfg, opts);
  const Metrics m = compute_metrics(log);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_log_csv((dir / "log.csv").string(), log);
  write_tick_csv((dir / "ticks.csv").string(), log);
  write_timing_csv((dir / "timing.csv").string(), log);
  write_metrics_csv((dir / "metrics.csv").string(), m);
  {
    std::ofstream ev(dir / "events.log");
    for (const auto& e : log.events) ev << e << "\n";
    if (log.aborted) ev << "abort " << log.abort_reason << "\n";
  }
  print_metrics(m);
  if (log.aborted) {
    std::cerr << log.abort_reason << "\n";
    return kAbort;
  }
  return kOk;
}

int cmd_metrics(const std::string& path) {
  SimLog log;
  try {
    log = read_log_csv(path);
    const auto timing = std::filesystem::path(path).parent_path() / "timing.csv";
    if (std::filesystem::exists(timing)) read_timing_csv(timing.string(), log);
  } catch (const CsvError& e) {
    std::cerr << e.what() << "\n";
    return kScenario;
  }
  const Metrics m = compute_metrics(log);
  write_metrics_csv(std::cout, m);
  return kOk;
}

int cmd_track_check(const std::string& path) {
  try {
    const Track t = load_track(path);
    std::printf("segments          %zu\n", t.segments().size());
    std::printf("length            %.6f m\n", t.total_length());
    std::printf("lane half-width   %.3f m\n", t.lane_half_width());
    std::printf("closure residual  %.3e m, %.3e rad\n", t.closure_residual(), t.closure_heading_residual());
    if (!t.closed()) {
      std::printf("not closed\n");
      return kScenario;
    }
    std::printf("closed\n");
    return kOk;
  } catch (const TrackError& e) {
    std::cerr << "track error: " << e.what() << "\n";
    return kScenario;
  }
}

int cmd_bench(int laps, std::uint64_t seed) {
  ScenarioConfig cfg = nominal_scenario();
  cfg.laps = laps;
  cfg.seed = seed;
  cfg.finalize();
  const SimLog log = run_scenario(cfg);
  std::vector<double> solve, compute;
  for (const auto& c : log.cycles) {
    solve.push_back(c.planner_time);
    compute.push_back(c.planner_time + c.estimator_time);
  }
  std::printf("cycles %zu (N = %d)\n", log.cycles.size(), cfg.planner.horizon_steps);
  std::printf("%-16s %10s %10s %10s %10s %10s\n", "", "p50", "p90", "p99", "max", "mean");
  for (const auto& [name, v] : {std::pair{"planner", &solve}, std::pair{"estimator+plan", &compute}}) {
    double mean = 0.0;
    for (double x : *v) mean += x;
    mean /= std::max<std::size_t>(v->size(), 1);
    std::printf("%-16s %10.5f %10.5f %10.5f %10.5f %10.5f\n", name, percentile(*v, 50), percentile(*v, 90),
                percentile(*v, 99), percentile(*v, 100), mean);
  }
  const double p99 = percentile(compute, 99);
  std::printf("p99 budget 0.1 s: %s\n", p99 < 0.1 ? "within" : "exceeded");
  return log.aborted ? kAbort : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Road-frame estimation, tracking and NMPC closed-loop simulator"};
  app.require_subcommand(1);

  std::string scenario, out_dir = ".", log_path, track_path;
  std::optional<std::uint64_t> seed;
  bool concurrent = false;
  double speedup = 1.0;
  int bench_laps = 1;
  std::uint64_t bench_seed = 1;

  auto* run = app.add_subcommand("run", "Run a scenario file");
  run->add_option("scenario", scenario, "Scenario file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--concurrent", concurrent, "Planner and actuation on separate threads, wall-clock paced");
  run->add_option("--speedup", speedup, "Simulated seconds per wall second in concurrent mode")
      ->check(CLI::PositiveNumber);

  auto* metrics = app.add_subcommand("metrics", "Recompute metrics from a log.csv");
  metrics->add_option("log", log_path, "log.csv")->required();

  auto* check = app.add_subcommand("track-check", "Validate a track file");
  check->add_option("track", track_path, "Track file")->required();

  auto* bench = app.add_subcommand("bench", "Planner solve-time distribution on the nominal scenario");
  bench->add_option("--laps", bench_laps, "Laps to run")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*run) return cmd_run(scenario, seed, out_dir, concurrent, speedup);
    if (*metrics) return cmd_metrics(log_path);
    if (*check) return cmd_track_check(track_path);
    if (*bench) return cmd_bench(bench_laps, bench_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kScenario;
  }
  return kUsage;
}
