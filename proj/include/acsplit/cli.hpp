#pragma once

#include <chrono>
#include <filesystem>
#include <ostream>
#include <string>

#include "config.hpp"
#include "report.hpp"

namespace acsplit {

// Resolved command line; config-file values lose to flags that were given.
struct CliOptions {
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  bool have_seed = false;
  std::uint64_t seed = 0;
  bool have_threads = false;
  int threads = 0;
};

namespace cli_detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

inline std::string join(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

inline void cmd_simulate(const ConfigMap& map, const std::string& out_dir,
                         std::ostream& out) {
  const auto start = Clock::now();
  const SimulateConfig cfg = parse_simulate_config(map);
  Basis basis(cfg.n_modes);
  SchemeSpec spec(cfg.scheme, cfg.drift, basis, cfg.dt, cfg.T,
                  cfg.initial.build(basis), cfg.with_noise);
  const PathResult result =
      simulate_terminal(spec, SeedPlan{cfg.seed}, cfg.sample);
  if (result.diverged)
    throw validation_error("sample path diverged; field not written");
  write_text_file(join(out_dir, "field.csv"),
                  field_csv(basis, result.terminal));
  write_text_file(join(out_dir, "manifest.json"),
                  run_manifest("simulate", simulate_config_json(cfg), cfg.seed,
                               seconds_since(start))
                          .dump(2) +
                      "\n");
  out << "simulate: |X(T)|_H = " << fmt17(h_norm(result.terminal))
      << ", field.csv written\n";
}

inline void cmd_error_study(const ConfigMap& map, const std::string& out_dir,
                            std::ostream& out, bool weak) {
  const auto start = Clock::now();
  const StudyConfig cfg = parse_study_config(map, weak ? 100000 : 10000);
  const ErrorTable table = weak ? weak_error(cfg) : strong_error(cfg);
  write_text_file(join(out_dir, "error_table.csv"), error_table_csv(table));
  nlohmann::json manifest =
      run_manifest(weak ? "weak" : "strong", study_config_json(cfg), cfg.seed,
                   seconds_since(start));
  write_text_file(join(out_dir, "manifest.json"), manifest.dump(2) + "\n");
  // table and manifest stay on disk even when the fit refuses
  const RateFit fit = fit_rate(table);
  write_text_file(join(out_dir, "rate_report.json"),
                  rate_report_json(table, fit).dump(2) + "\n");
  out << table.statistic << ": slope " << fmt17(fit.slope) << " from "
      << fit.used.size() << "/" << table.rows.size()
      << " significant rows, residual " << fmt17(fit.residual) << "\n";
}

inline void cmd_probe(const ConfigMap& map, const std::string& out_dir,
                      std::ostream& out) {
  const auto start = Clock::now();
  const ProbeConfig cfg = parse_probe_config(map);
  const ProbeReport report = probe_report(cfg);
  write_text_file(join(out_dir, "first_scan.csv"),
                  scan_csv(report.first, false));
  write_text_file(join(out_dir, "second_scan.csv"),
                  scan_csv(report.second, true));
  write_text_file(join(out_dir, "malliavin.csv"),
                  malliavin_csv(report.malliavin));
  nlohmann::json manifest = run_manifest("probe", probe_config_json(cfg),
                                         cfg.seed, seconds_since(start));
  manifest["results"] = {
      {"energy_max_ratio", report.energy_max_ratio},
      {"energy_ok", report.energy_ok},
      {"first_trend_ok", report.first_trend_ok},
      {"second_trend_ok", report.second_trend_ok},
      {"malliavin_max_ratio", report.malliavin.max_ratio},
      {"malliavin_bound", report.malliavin.bound},
      {"malliavin_zeros_ok", report.malliavin.zeros_ok},
      {"malliavin_ok", report.malliavin_ok},
  };
  write_text_file(join(out_dir, "manifest.json"), manifest.dump(2) + "\n");
  out << "probe: energy ratio " << fmt17(report.energy_max_ratio)
      << ", malliavin max " << fmt17(report.malliavin.max_ratio) << " (bound "
      << fmt17(report.malliavin.bound) << "), trend "
      << (report.first_trend_ok ? "ok" : "GROWING") << "/"
      << (report.second_trend_ok ? "ok" : "GROWING") << "\n";
  if (!report.energy_ok)
    throw validation_error("first-variation energy bound violated, ratio " +
                           fmt17(report.energy_max_ratio));
  if (!report.malliavin_ok)
    throw validation_error("noise-derivative bound violated, max ratio " +
                           fmt17(report.malliavin.max_ratio));
}

}  // namespace cli_detail

// Exit codes: 0 success, 2 config error, 3 too few significant rows for a
// rate fit, 4 validation failure (diverged-sample rate or a hard bound).
inline int run_command(const CliOptions& opts, std::ostream& out,
                       std::ostream& err) {
  try {
    ConfigMap map;
    if (!opts.config_path.empty()) map = ConfigMap::from_file(opts.config_path);
    if (opts.have_seed)
      map.override_value("seed", std::to_string(opts.seed));
    if (opts.have_threads)
      map.override_value("threads", std::to_string(opts.threads));
    std::filesystem::create_directories(opts.out_dir);
    if (opts.command == "simulate")
      cli_detail::cmd_simulate(map, opts.out_dir, out);
    else if (opts.command == "weak")
      cli_detail::cmd_error_study(map, opts.out_dir, out, true);
    else if (opts.command == "strong")
      cli_detail::cmd_error_study(map, opts.out_dir, out, false);
    else if (opts.command == "probe")
      cli_detail::cmd_probe(map, opts.out_dir, out);
    else
      throw config_error("unknown command: " + opts.command);
    return 0;
  } catch (const config_error& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const insufficient_data_error& e) {
    err << "insufficient data: " << e.what() << "\n";
    return 3;
  } catch (const validation_error& e) {
    err << "validation failure: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace acsplit
