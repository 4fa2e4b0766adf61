#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "config.hpp"
#include "harness.hpp"
#include "kolmogorov.hpp"
#include "version.hpp"

namespace acsplit {

// 17 significant digits round-trip doubles exactly, so reruns can be
// compared byte for byte.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string error_table_csv(const ErrorTable& table) {
  std::string out = "dt,estimate,std_error,n_samples,n_flagged\n";
  for (const ErrorRow& r : table.rows) {
    out += fmt17(r.dt) + "," + fmt17(r.estimate) + "," + fmt17(r.std_error) +
           "," + std::to_string(r.n_samples) + "," +
           std::to_string(r.n_flagged) + "\n";
  }
  return out;
}

inline std::string field_csv(const Basis& basis, const SpectralField& x) {
  check_size(basis, x, "field_csv");
  const std::vector<double> values = to_physical(basis, x);
  std::string out = "mode,coefficient,xi,value\n";
  for (int i = 0; i < basis.n(); ++i) {
    out += std::to_string(i + 1) + "," + fmt17(x[std::size_t(i)]) + "," +
           fmt17(basis.grid()[std::size_t(i)]) + "," +
           fmt17(values[std::size_t(i)]) + "\n";
  }
  return out;
}

inline std::string scan_csv(const ScanTable& table, bool with_pairs) {
  std::string out = with_pairs ? "t,n,m,raw,std_error,scanned\n"
                               : "t,n,raw,std_error,scanned\n";
  for (const ScanRow& r : table.rows) {
    out += fmt17(r.t) + "," + std::to_string(r.n);
    if (with_pairs) out += "," + std::to_string(r.m);
    out += "," + fmt17(r.raw) + "," + fmt17(r.std_error) + "," +
           fmt17(r.scanned) + "\n";
  }
  return out;
}

inline std::string malliavin_csv(const MalliavinReport& report) {
  std::string out = "s,probe,max_ratio\n";
  for (const MalliavinRow& r : report.rows)
    out += fmt17(r.s) + "," + std::to_string(r.probe) + "," +
           fmt17(r.max_ratio) + "\n";
  return out;
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline const char* scheme_name(SchemeKind kind) {
  return kind == SchemeKind::exponential ? "exponential" : "semi_implicit";
}

inline const char* drift_name(DriftKind kind) {
  return kind == DriftKind::allen_cahn ? "allen_cahn" : "none";
}

inline const char* phi_name(TestFunction::Kind kind) {
  switch (kind) {
    case TestFunction::Kind::cosine:
      return "cosine";
    case TestFunction::Kind::gaussian:
      return "gaussian";
    case TestFunction::Kind::linear:
    default:
      return "linear";
  }
}

namespace detail {

inline void echo_initial(nlohmann::json& j, const InitialCondition& initial) {
  switch (initial.kind) {
    case InitialCondition::Kind::zero:
      j["initial"] = "zero";
      break;
    case InitialCondition::Kind::sine:
      j["initial"] = "sine";
      j["initial_amplitude"] = initial.amplitude;
      j["initial_wavenumber"] = initial.wavenumber;
      break;
    case InitialCondition::Kind::values:
      j["initial"] = "values";
      j["initial_values"] = initial.grid_values;
      break;
  }
}

}  // namespace detail

inline nlohmann::json study_config_json(const StudyConfig& cfg) {
  nlohmann::json j;
  j["scheme"] = scheme_name(cfg.scheme);
  j["drift"] = drift_name(cfg.drift);
  j["n_modes"] = cfg.n_modes;
  j["T"] = cfg.T;
  j["dt_ladder"] = cfg.dt_ladder;
  j["dt_ref"] = cfg.dt_ref;
  j["n_samples"] = cfg.n_samples;
  detail::echo_initial(j, cfg.initial);
  j["phi"] = phi_name(cfg.phi.kind);
  j["phi_mode"] = cfg.phi.mode;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["noise"] = cfg.with_noise;
  return j;
}

inline nlohmann::json simulate_config_json(const SimulateConfig& cfg) {
  nlohmann::json j;
  j["scheme"] = scheme_name(cfg.scheme);
  j["drift"] = drift_name(cfg.drift);
  j["n_modes"] = cfg.n_modes;
  j["T"] = cfg.T;
  j["dt"] = cfg.dt;
  detail::echo_initial(j, cfg.initial);
  j["seed"] = cfg.seed;
  j["sample"] = cfg.sample;
  j["noise"] = cfg.with_noise;
  j["threads"] = cfg.threads;
  return j;
}

inline nlohmann::json probe_config_json(const ProbeConfig& cfg) {
  nlohmann::json j;
  j["drift"] = drift_name(cfg.drift);
  j["n_modes"] = cfg.n_modes;
  j["probe_dt"] = cfg.dt;
  j["t_grid"] = cfg.t_grid;
  j["n_first"] = cfg.n_first;
  j["n_second"] = cfg.n_second;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["gamma"] = cfg.gamma;
  j["n_samples"] = cfg.n_samples;
  detail::echo_initial(j, cfg.initial);
  j["phi"] = phi_name(cfg.phi.kind);
  j["phi_mode"] = cfg.phi.mode;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["malliavin_T"] = cfg.malliavin_T;
  j["malliavin_dt"] = cfg.malliavin_dt;
  j["malliavin_probes"] = cfg.malliavin_probes;
  j["s_grid"] = cfg.s_grid;
  return j;
}

inline nlohmann::json rate_report_json(const ErrorTable& table,
                                       const RateFit& fit) {
  nlohmann::json j;
  j["statistic"] = table.statistic;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["residual"] = fit.residual;
  j["rows_used"] = fit.used;
  j["n_rows"] = table.rows.size();
  return j;
}

// Everything needed to reproduce the run, plus wall time (the only
// non-deterministic field).
inline nlohmann::json run_manifest(const std::string& command,
                                   nlohmann::json config,
                                   std::uint64_t seed,
                                   double wall_seconds) {
  nlohmann::json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["master_seed"] = seed;
  j["wall_time_seconds"] = wall_seconds;
  j["config"] = std::move(config);
  return j;
}

}  // namespace acsplit
