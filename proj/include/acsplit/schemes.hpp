#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "basis.hpp"
#include "noise.hpp"
#include "nonlinearity.hpp"

namespace acsplit {

enum class SchemeKind { exponential, semi_implicit };

// none replaces the flow by the identity (psi = 0), which turns both schemes
// into exactly solvable linear recursions used as law oracles in tests.
enum class DriftKind { allen_cahn, none };

inline constexpr double kMaxStep = 1.0;  // the schemes assume dt <= 1
inline constexpr double kDivergenceBound = 1e6;

// T must be an integer multiple of dt; tolerance covers non-dyadic steps.
inline std::uint32_t step_count(double T, double dt) {
  detail::check(dt > 0.0, "step_count: dt must be > 0");
  detail::check(T > 0.0, "step_count: T must be > 0");
  const double ratio = T / dt;
  const auto n = std::uint32_t(std::llround(ratio));
  detail::check(n >= 1 && std::abs(ratio - double(n)) <= 1e-9 * std::max(ratio, 1.0),
                "step_count: T must be an integer multiple of dt");
  return n;
}

// Per-(basis, dt) factors shared by both schemes.
struct StepTables {
  double dt;
  NonlinearityAt flow;             // cached e^{-2 dt} for the flow substep
  std::vector<double> semigroup;   // e^{-lambda dt}
  std::vector<double> resolvent;   // 1/(1 + lambda dt)

  StepTables(const Basis& basis, double step) : dt(step), flow(step) {
    const int n = basis.n();
    semigroup.resize(n);
    resolvent.resize(n);
    for (int i = 0; i < n; ++i) {
      semigroup[i] = std::exp(-basis.lambda(i) * dt);
      resolvent[i] = 1.0 / (1.0 + basis.lambda(i) * dt);
    }
  }
};

namespace kernels {

// Pointwise flow on a block of physical-grid rows.  The divergence flag of a
// row latches once any incoming value leaves [-1e6, 1e6]; the comparison is
// written so NaN also trips it.
inline void flow_rows(const NonlinearityAt& f, double* values, int rows, int n,
                      unsigned char* diverged) {
  for (int r = 0; r < rows; ++r) {
    double* row = values + std::size_t(r) * n;
    unsigned char bad = 0;
    for (int i = 0; i < n; ++i)
      if (!(std::abs(row[i]) <= kDivergenceBound)) bad = 1;
    if (bad) diverged[r] = 1;
    for (int i = 0; i < n; ++i) row[i] = f.phi(row[i]);
  }
}

}  // namespace kernels

struct SchemeSpec {
  SchemeKind kind;
  DriftKind drift;
  const Basis* basis;
  double dt;
  double T;
  std::uint32_t n_steps;
  SpectralField x0;
  bool with_noise;
  StepTables tables;

  SchemeSpec(SchemeKind scheme_kind, DriftKind drift_kind, const Basis& b,
             double step, double horizon, SpectralField initial,
             bool noise = true)
      : kind(scheme_kind),
        drift(drift_kind),
        basis(&b),
        dt(step),
        T(horizon),
        n_steps(step_count(horizon, step)),
        x0(std::move(initial)),
        with_noise(noise),
        tables(b, step) {
    detail::check(step <= kMaxStep, "SchemeSpec: dt must be <= 1");
    check_size(b, x0, "SchemeSpec");
  }
};

// One step of the exponential splitting scheme:
//   X' = e^{dt A} phi_dt(X) + (exact OU convolution increment).
// The flow acts pointwise on the collocation grid; noise_conv is the
// spectral increment with per-mode variance (1 - e^{-2 lambda dt})/(2 lambda).
inline SpectralField step_exponential(const SchemeSpec& spec,
                                      const SpectralField& x,
                                      const SpectralField& noise_conv,
                                      bool* diverged = nullptr) {
  const Basis& basis = *spec.basis;
  check_size(basis, x, "step_exponential");
  check_size(basis, noise_conv, "step_exponential");
  const int n = basis.n();
  SpectralField drift(static_cast<std::size_t>(n));
  if (spec.drift == DriftKind::allen_cahn) {
    std::vector<double> grid(n);
    basis.rows_to_physical(x.data(), grid.data(), 1);
    unsigned char flag = 0;
    kernels::flow_rows(spec.tables.flow, grid.data(), 1, n, &flag);
    if (diverged != nullptr && flag) *diverged = true;
    basis.rows_to_spectral(grid.data(), drift.data(), 1);
  } else {
    drift = x;
  }
  SpectralField out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out[i] = spec.tables.semigroup[std::size_t(i)] * drift[std::size_t(i)] +
             noise_conv[std::size_t(i)];
  return out;
}

// One step of the semi-implicit splitting scheme:
//   X' = (I - dt A)^{-1} (phi_dt(X) + dW),
// with dW the plain white increment of the step, N(0, dt) per mode.
inline SpectralField step_semi_implicit(const SchemeSpec& spec,
                                        const SpectralField& x,
                                        const SpectralField& white_increment,
                                        bool* diverged = nullptr) {
  const Basis& basis = *spec.basis;
  check_size(basis, x, "step_semi_implicit");
  check_size(basis, white_increment, "step_semi_implicit");
  const int n = basis.n();
  SpectralField drift(static_cast<std::size_t>(n));
  if (spec.drift == DriftKind::allen_cahn) {
    std::vector<double> grid(n);
    basis.rows_to_physical(x.data(), grid.data(), 1);
    unsigned char flag = 0;
    kernels::flow_rows(spec.tables.flow, grid.data(), 1, n, &flag);
    if (diverged != nullptr && flag) *diverged = true;
    basis.rows_to_spectral(grid.data(), drift.data(), 1);
  } else {
    drift = x;
  }
  SpectralField out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out[i] = spec.tables.resolvent[std::size_t(i)] *
             (drift[std::size_t(i)] + white_increment[std::size_t(i)]);
  return out;
}

struct PathResult {
  SpectralField terminal;
  bool diverged = false;
};

namespace detail {

template <typename Visit>
inline PathResult run_single_path(const SchemeSpec& spec, const SeedPlan& plan,
                                  std::uint32_t sample, Visit&& visit) {
  const Basis& basis = *spec.basis;
  const int n = basis.n();
  const bool white = spec.kind == SchemeKind::semi_implicit;
  FineNoiseSampler sampler(plan, basis, spec.dt, white);
  SpectralField x = spec.x0;
  SpectralField dz(static_cast<std::size_t>(n)), dw(white ? static_cast<std::size_t>(n) : 0);
  SpectralField zero(static_cast<std::size_t>(n));
  bool diverged = false;
  visit(0u, x);
  for (std::uint32_t k = 0; k < spec.n_steps; ++k) {
    const SpectralField* noise = &zero;
    if (spec.with_noise) {
      sampler.sample(sample, k, dz.data(), white ? dw.data() : nullptr);
      noise = white ? &dw : &dz;
    }
    x = white ? step_semi_implicit(spec, x, *noise, &diverged)
              : step_exponential(spec, x, *noise, &diverged);
    visit(k + 1, x);
  }
  return {std::move(x), diverged};
}

}  // namespace detail

// Terminal state of one sample path.  Deterministic in (spec, plan, sample);
// a diverged path is flagged, not thrown, so Monte Carlo drivers can count
// and exclude it.
inline PathResult simulate_terminal(const SchemeSpec& spec,
                                    const SeedPlan& plan,
                                    std::uint32_t sample) {
  return detail::run_single_path(spec, plan, sample,
                                 [](std::uint32_t, const SpectralField&) {});
}

// Full state sequence X_0, ..., X_{n_steps}; the Malliavin checks replay it.
inline std::vector<SpectralField> simulate_path_states(const SchemeSpec& spec,
                                                       const SeedPlan& plan,
                                                       std::uint32_t sample,
                                                       bool* diverged = nullptr) {
  std::vector<SpectralField> states;
  states.reserve(spec.n_steps + 1);
  PathResult r = detail::run_single_path(
      spec, plan, sample,
      [&states](std::uint32_t, const SpectralField& x) { states.push_back(x); });
  if (diverged != nullptr) *diverged = r.diverged;
  return states;
}

// The weak/strong studies measure against the exponential scheme on the fine
// grid; standalone it is an ordinary exponential path at dt_fine.
inline PathResult simulate_reference(const Basis& basis, DriftKind drift,
                                     double dt_fine, double T,
                                     const SpectralField& x0,
                                     const SeedPlan& plan,
                                     std::uint32_t sample,
                                     bool with_noise = true) {
  SchemeSpec spec(SchemeKind::exponential, drift, basis, dt_fine, T, x0,
                  with_noise);
  return simulate_terminal(spec, plan, sample);
}

}  // namespace acsplit
