#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "ladder.hpp"
#include "setup.hpp"
#include "test_functions.hpp"

namespace acsplit {

// A run keeping more than this fraction of diverged samples is rejected.
inline constexpr double kMaxFlagFraction = 1e-3;

inline constexpr std::uint64_t kDefaultSeed = 1;

// Resolved parameters of one convergence study.  Defaults give the standard
// weak-error configuration; strong runs usually lower n_samples.
struct StudyConfig {
  SchemeKind scheme = SchemeKind::exponential;
  DriftKind drift = DriftKind::allen_cahn;
  int n_modes = 128;
  double T = 1.0;
  std::vector<double> dt_ladder = {0.0625,   0.03125,   0.015625,
                                   0.0078125, 0.00390625, 0.001953125};
  double dt_ref = 0.000244140625;  // 2^-12
  std::uint64_t n_samples = 100000;
  InitialCondition initial = InitialCondition::sine(0.2, 1);
  PhiSpec phi{};
  std::uint64_t seed = kDefaultSeed;
  int threads = 1;
  bool with_noise = true;
};

struct ErrorRow {
  double dt = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t n_samples = 0;
  std::uint64_t n_flagged = 0;
};

// Rows sorted by dt descending; one row per ladder level.
struct ErrorTable {
  std::string statistic;  // "weak", "strong" or "moment4"
  StudyConfig config;
  std::vector<ErrorRow> rows;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;      // max |log2 point - fit|
  std::vector<int> used;      // indices of rows that passed the filter
};

// Least squares of log2 |estimate| against log2 dt.  Rows with
// |estimate| <= 3 std_error carry no significant signal and are excluded;
// fewer than three surviving rows make the fit meaningless.
inline RateFit fit_rate(const ErrorTable& table) {
  RateFit fit;
  for (int i = 0; i < int(table.rows.size()); ++i) {
    const ErrorRow& r = table.rows[std::size_t(i)];
    if (std::isfinite(r.estimate) && std::abs(r.estimate) > 3.0 * r.std_error)
      fit.used.push_back(i);
  }
  if (fit.used.size() < 3)
    throw insufficient_data_error(
        "rate fit needs at least 3 rows with |estimate| > 3 std_error, got " +
        std::to_string(fit.used.size()) + " of " +
        std::to_string(table.rows.size()));
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int i : fit.used) {
    const ErrorRow& r = table.rows[std::size_t(i)];
    const double x = std::log2(r.dt);
    const double y = std::log2(std::abs(r.estimate));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = double(fit.used.size());
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  for (int i : fit.used) {
    const ErrorRow& r = table.rows[std::size_t(i)];
    const double y = std::log2(std::abs(r.estimate));
    const double pred = fit.slope * std::log2(r.dt) + fit.intercept;
    fit.residual = std::max(fit.residual, std::abs(y - pred));
  }
  return fit;
}

namespace detail {

inline void validate_flag_fraction(const MeanTable& stats) {
  const double total = double(stats.n + stats.n_flagged);
  if (double(stats.n_flagged) > kMaxFlagFraction * total)
    throw validation_error("diverged-sample fraction " +
                           std::to_string(double(stats.n_flagged) / total) +
                           " exceeds " + std::to_string(kMaxFlagFraction));
}

inline ErrorTable make_table(const char* statistic, const StudyConfig& cfg,
                             const LadderSpec& spec, const MeanTable& stats,
                             bool take_sqrt) {
  validate_flag_fraction(stats);
  ErrorTable table;
  table.statistic = statistic;
  table.config = cfg;
  table.rows.resize(spec.levels.size());
  for (std::size_t l = 0; l < spec.levels.size(); ++l) {
    ErrorRow& row = table.rows[l];
    row.dt = spec.levels[l].dt;
    row.n_samples = stats.n;
    row.n_flagged = stats.n_flagged;
    if (take_sqrt) {
      // estimate = sqrt(mean of squared norms); delta-method standard error,
      // exact-coupling rows (mean 0) get error 0 rather than 0/0
      const double mean = std::max(0.0, stats.mean[l]);
      row.estimate = std::sqrt(mean);
      row.std_error =
          mean > 0.0 ? stats.std_error[l] / (2.0 * row.estimate) : 0.0;
    } else {
      row.estimate = stats.mean[l];
      row.std_error = stats.std_error[l];
    }
  }
  return table;
}

}  // namespace detail

// E[phi(X_T^dt) - phi(X_T^ref)] per ladder level, common noise on both sides.
inline ErrorTable weak_error(const StudyConfig& cfg) {
  Basis basis(cfg.n_modes);
  const TestFunction phi = cfg.phi.build(basis);
  LadderSpec spec(cfg.scheme, cfg.drift, basis, cfg.T, cfg.dt_ladder,
                  cfg.dt_ref, true, cfg.initial.build(basis), cfg.with_noise);
  const int n_levels = int(spec.levels.size());
  const MeanTable stats = run_ladder(
      spec, SeedPlan{cfg.seed}, cfg.n_samples, cfg.threads,
      std::size_t(n_levels), false, [&](const SampleView& v, double* row) {
        const double base = phi.value(v.ref, v.n);
        for (int l = 0; l < n_levels; ++l)
          row[l] = phi.value(v.levels[l], v.n) - base;
      });
  return detail::make_table("weak", cfg, spec, stats, false);
}

// sqrt(E |X_T^dt - X_T^ref|_H^2) per ladder level under the same coupling.
inline ErrorTable strong_error(const StudyConfig& cfg) {
  Basis basis(cfg.n_modes);
  LadderSpec spec(cfg.scheme, cfg.drift, basis, cfg.T, cfg.dt_ladder,
                  cfg.dt_ref, true, cfg.initial.build(basis), cfg.with_noise);
  const int n_levels = int(spec.levels.size());
  const MeanTable stats = run_ladder(
      spec, SeedPlan{cfg.seed}, cfg.n_samples, cfg.threads,
      std::size_t(n_levels), false, [&](const SampleView& v, double* row) {
        for (int l = 0; l < n_levels; ++l) {
          double s = 0.0;
          for (int i = 0; i < v.n; ++i) {
            const double d = v.levels[l][i] - v.ref[i];
            s += d * d;
          }
          row[l] = s;
        }
      });
  return detail::make_table("strong", cfg, spec, stats, true);
}

// E[sup-norm(X_T^dt)^4] per ladder level; levels share fine noise but no
// reference path is run, the finest ladder step sets the fine clock.
inline ErrorTable moment_fourth(const StudyConfig& cfg) {
  Basis basis(cfg.n_modes);
  std::vector<double> ladder = cfg.dt_ladder;
  std::sort(ladder.begin(), ladder.end());
  const double dt_fine = ladder.front();
  LadderSpec spec(cfg.scheme, cfg.drift, basis, cfg.T, cfg.dt_ladder, dt_fine,
                  false, cfg.initial.build(basis), cfg.with_noise);
  const int n_levels = int(spec.levels.size());
  const MeanTable stats = run_ladder(
      spec, SeedPlan{cfg.seed}, cfg.n_samples, cfg.threads,
      std::size_t(n_levels), true, [&](const SampleView& v, double* row) {
        for (int l = 0; l < n_levels; ++l) {
          const double s = v.level_sup[l];
          row[l] = s * s * s * s;
        }
      });
  return detail::make_table("moment4", cfg, spec, stats, false);
}

// Plain Monte Carlo mean of phi(X_T) for one step size, no coupling; the
// unbiasedness check compares coupled estimates against differences of these.
struct MeanEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n = 0;
  std::uint64_t n_flagged = 0;
};

inline MeanEstimate phi_mean(const StudyConfig& cfg, double dt) {
  Basis basis(cfg.n_modes);
  const TestFunction phi = cfg.phi.build(basis);
  LadderSpec spec(cfg.scheme, cfg.drift, basis, cfg.T, {dt}, dt, false,
                  cfg.initial.build(basis), cfg.with_noise);
  const MeanTable stats = run_ladder(
      spec, SeedPlan{cfg.seed}, cfg.n_samples, cfg.threads, 1, false,
      [&](const SampleView& v, double* row) {
        row[0] = phi.value(v.levels[0], v.n);
      });
  detail::validate_flag_fraction(stats);
  return {stats.mean[0], stats.std_error[0], stats.n, stats.n_flagged};
}

// Largest per-row |estimate difference| in units of the combined standard
// error; tables must share the dt ladder.
inline double max_delta_in_combined_se(const ErrorTable& a,
                                       const ErrorTable& b) {
  detail::check(a.rows.size() == b.rows.size(),
                "max_delta_in_combined_se: row count mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    detail::check(a.rows[i].dt == b.rows[i].dt,
                  "max_delta_in_combined_se: dt mismatch");
    const double se = std::hypot(a.rows[i].std_error, b.rows[i].std_error);
    const double delta = std::abs(a.rows[i].estimate - b.rows[i].estimate);
    worst = std::max(worst, se > 0.0 ? delta / se
                                     : (delta == 0.0 ? 0.0 : HUGE_VAL));
  }
  return worst;
}

inline double median_se_ratio(const ErrorTable& a, const ErrorTable& b) {
  detail::check(a.rows.size() == b.rows.size() && !a.rows.empty(),
                "median_se_ratio: row count mismatch");
  std::vector<double> ratios;
  ratios.reserve(a.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    ratios.push_back(b.rows[i].std_error / a.rows[i].std_error);
  std::sort(ratios.begin(), ratios.end());
  return ratios[ratios.size() / 2];
}

enum class RefinementParam { n_modes, dt_ref, n_samples };

// Reruns the weak study along a ladder of one parameter and reports, per
// consecutive pair, how far the estimates moved in combined-standard-error
// units (and how the errors themselves scaled, for the sample-count law).
struct RefinementReport {
  RefinementParam param = RefinementParam::n_modes;
  std::vector<double> values;
  std::vector<ErrorTable> tables;
  std::vector<double> max_delta_se;
  std::vector<double> se_ratio;
};

inline RefinementReport refinement_study(StudyConfig base,
                                         RefinementParam param,
                                         const std::vector<double>& values) {
  detail::check(values.size() >= 3, "refinement_study: need >= 3 values");
  RefinementReport report;
  report.param = param;
  report.values = values;
  for (double v : values) {
    StudyConfig cfg = base;
    switch (param) {
      case RefinementParam::n_modes:
        cfg.n_modes = int(v);
        break;
      case RefinementParam::dt_ref:
        cfg.dt_ref = v;
        break;
      case RefinementParam::n_samples:
        cfg.n_samples = std::uint64_t(v);
        break;
    }
    report.tables.push_back(weak_error(cfg));
  }
  for (std::size_t i = 0; i + 1 < report.tables.size(); ++i) {
    report.max_delta_se.push_back(
        max_delta_in_combined_se(report.tables[i], report.tables[i + 1]));
    report.se_ratio.push_back(
        median_se_ratio(report.tables[i], report.tables[i + 1]));
  }
  return report;
}

}  // namespace acsplit
