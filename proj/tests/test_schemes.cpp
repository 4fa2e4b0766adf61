// Scheme steps checked against handwritten recursions and exactly solvable
// linear laws: with the flow disabled both schemes are Gaussian AR(1)
// recursions whose mean and variance have closed forms, so the Monte Carlo
// moments certify the noise wiring end to end.  With the flow enabled the
// update must match a manual transform-flow-transform loop bit for bit.
#include <acsplit/schemes.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

using namespace acsplit;

namespace {

SpectralField decaying_start(int n) {
  SpectralField x0(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    x0[std::size_t(i)] = 0.3 / (i + 1) * (i % 2 == 0 ? 1.0 : -1.0);
  return x0;
}

struct Moments {
  double mean;
  double var;
};

Moments sample_moments(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  const double mean = s / double(v.size());
  double q = 0.0;
  for (double x : v) q += (x - mean) * (x - mean);
  return {mean, q / double(v.size() - 1)};
}

}  // namespace

TEST_CASE("zero field without noise is invariant") {
  const int n = 21;
  Basis basis(n);
  const SpectralField zero(static_cast<std::size_t>(n));
  const SeedPlan plan{7};
  for (SchemeKind kind : {SchemeKind::exponential, SchemeKind::semi_implicit}) {
    SchemeSpec spec(kind, DriftKind::allen_cahn, basis, 0.125, 1.0, zero, false);
    const PathResult r = simulate_terminal(spec, plan, 0);
    REQUIRE_FALSE(r.diverged);
    for (int i = 0; i < n; ++i) REQUIRE(r.terminal[std::size_t(i)] == 0.0);
  }
}

TEST_CASE("path driver matches a handwritten step loop bit for bit") {
  const int n = 24;
  Basis basis(n);
  const SpectralField x0 = decaying_start(n);
  const SeedPlan plan{42};
  for (SchemeKind kind : {SchemeKind::exponential, SchemeKind::semi_implicit}) {
    for (DriftKind drift : {DriftKind::allen_cahn, DriftKind::none}) {
      SchemeSpec spec(kind, drift, basis, 0.0625, 0.5, x0, true);
      for (std::uint32_t sample : {0u, 1u, 5u}) {
        const bool white = kind == SchemeKind::semi_implicit;
        FineNoiseSampler sampler(plan, basis, spec.dt, white);
        SpectralField x = x0;
        SpectralField dz(static_cast<std::size_t>(n));
        SpectralField dw(white ? static_cast<std::size_t>(n) : 0);
        for (std::uint32_t k = 0; k < spec.n_steps; ++k) {
          sampler.sample(sample, k, dz.data(), white ? dw.data() : nullptr);
          x = white ? step_semi_implicit(spec, x, dw)
                    : step_exponential(spec, x, dz);
        }
        const PathResult r = simulate_terminal(spec, plan, sample);
        REQUIRE_FALSE(r.diverged);
        for (int i = 0; i < n; ++i)
          REQUIRE(r.terminal[std::size_t(i)] == x[std::size_t(i)]);
      }
    }
  }
}

TEST_CASE("terminal state matches the recorded path") {
  const int n = 16;
  Basis basis(n);
  const SeedPlan plan{3};
  SchemeSpec spec(SchemeKind::exponential, DriftKind::allen_cahn, basis, 0.125,
                  1.0, decaying_start(n), true);
  bool diverged = true;
  const std::vector<SpectralField> states =
      simulate_path_states(spec, plan, 2, &diverged);
  REQUIRE(states.size() == std::size_t(spec.n_steps) + 1);
  REQUIRE_FALSE(diverged);
  const PathResult r = simulate_terminal(spec, plan, 2);
  for (int i = 0; i < n; ++i) {
    REQUIRE(states.front()[std::size_t(i)] == spec.x0[std::size_t(i)]);
    REQUIRE(states.back()[std::size_t(i)] == r.terminal[std::size_t(i)]);
  }
}

TEST_CASE("drift-free exponential paths follow the exact OU law") {
  // With psi = 0 the update is X' = e^{-lambda dt} X + eta with eta of
  // variance (1 - e^{-2 lambda dt})/(2 lambda), so after T = n dt each mode
  // is Gaussian with mean e^{-lambda T} x0 and variance
  // (1 - e^{-2 lambda T})/(2 lambda) regardless of dt.
  const int n = 15;
  const int m_samples = 20000;
  const double dt = 0.0625, T = 0.5;
  Basis basis(n);
  const SpectralField x0 = decaying_start(n);
  const SeedPlan plan{2026};
  SchemeSpec spec(SchemeKind::exponential, DriftKind::none, basis, dt, T, x0,
                  true);
  std::vector<std::vector<double>> modes(4);
  for (auto& column : modes) column.reserve(m_samples);
  for (int s = 0; s < m_samples; ++s) {
    const PathResult r = simulate_terminal(spec, plan, std::uint32_t(s));
    REQUIRE_FALSE(r.diverged);
    for (int j = 0; j < 4; ++j)
      modes[std::size_t(j)].push_back(r.terminal[std::size_t(j == 3 ? 7 : j)]);
  }
  for (int j = 0; j < 4; ++j) {
    const int mode = j == 3 ? 7 : j;
    const double lambda = basis.lambda(mode);
    const double want_mean = std::exp(-lambda * T) * x0[std::size_t(mode)];
    const double want_var = -std::expm1(-2.0 * lambda * T) / (2.0 * lambda);
    const Moments got = sample_moments(modes[std::size_t(j)]);
    const double se_mean = std::sqrt(want_var / m_samples);
    const double se_var = want_var * std::sqrt(2.0 / (m_samples - 1));
    REQUIRE_THAT(got.mean, Catch::Matchers::WithinAbs(want_mean, 5 * se_mean));
    REQUIRE_THAT(got.var, Catch::Matchers::WithinAbs(want_var, 5 * se_var));
  }
  // Modes are driven by independent noise slots, so terminal values across
  // modes must be uncorrelated.
  double cov = 0.0;
  const Moments m0 = sample_moments(modes[0]);
  const Moments m1 = sample_moments(modes[1]);
  for (int s = 0; s < m_samples; ++s)
    cov += (modes[0][std::size_t(s)] - m0.mean) *
           (modes[1][std::size_t(s)] - m1.mean);
  cov /= double(m_samples - 1);
  REQUIRE_THAT(cov, Catch::Matchers::WithinAbs(
                        0.0, 5 * std::sqrt(m0.var * m1.var / m_samples)));
}

TEST_CASE("drift-free semi-implicit paths follow the resolvent AR(1) law") {
  // X' = R (X + xi) with R = 1/(1 + lambda dt) and xi of variance dt, so
  // after n steps the mode is Gaussian with mean R^n x0 and variance
  // dt R^2 (1 - R^{2n}) / (1 - R^2).
  const int n = 15;
  const int m_samples = 20000;
  const double dt = 0.0625, T = 0.5;
  const int n_steps = 8;
  Basis basis(n);
  const SpectralField x0 = decaying_start(n);
  const SeedPlan plan{99};
  SchemeSpec spec(SchemeKind::semi_implicit, DriftKind::none, basis, dt, T, x0,
                  true);
  REQUIRE(spec.n_steps == std::uint32_t(n_steps));
  std::vector<std::vector<double>> modes(3);
  for (int s = 0; s < m_samples; ++s) {
    const PathResult r = simulate_terminal(spec, plan, std::uint32_t(s));
    REQUIRE_FALSE(r.diverged);
    for (int j = 0; j < 3; ++j)
      modes[std::size_t(j)].push_back(r.terminal[std::size_t(2 * j)]);
  }
  for (int j = 0; j < 3; ++j) {
    const int mode = 2 * j;
    const double R = 1.0 / (1.0 + basis.lambda(mode) * dt);
    const double want_mean = std::pow(R, n_steps) * x0[std::size_t(mode)];
    const double want_var = dt * R * R *
                            (1.0 - std::pow(R, 2 * n_steps)) / (1.0 - R * R);
    const Moments got = sample_moments(modes[std::size_t(j)]);
    const double se_mean = std::sqrt(want_var / m_samples);
    const double se_var = want_var * std::sqrt(2.0 / (m_samples - 1));
    REQUIRE_THAT(got.mean, Catch::Matchers::WithinAbs(want_mean, 5 * se_mean));
    REQUIRE_THAT(got.var, Catch::Matchers::WithinAbs(want_var, 5 * se_var));
  }
}

TEST_CASE("exponential step equals the integrator form with regularized drift") {
  // phi_dt = id + dt psi_dt pointwise, so the splitting step must agree with
  // X' = e^{dt A}(X + dt Psi_dt(X)) + noise up to transform round-off.
  const int n = 40;
  const double dt = 0.03125;
  Basis basis(n);
  const SpectralField x = decaying_start(n);
  const SeedPlan plan{5};
  SchemeSpec spec(SchemeKind::exponential, DriftKind::allen_cahn, basis, dt,
                  dt, x, true);
  const SpectralField noise = ou_convolution_increment(plan, basis, dt, 0, 0);
  const SpectralField split = step_exponential(spec, x, noise);

  std::vector<double> grid = to_physical(basis, x);
  for (double& v : grid) v = spec.tables.flow.psi(v);
  const SpectralField psi_modes = to_spectral(basis, grid);
  for (int i = 0; i < n; ++i) {
    const double integrator =
        spec.tables.semigroup[std::size_t(i)] *
            (x[std::size_t(i)] + dt * psi_modes[std::size_t(i)]) +
        noise[std::size_t(i)];
    REQUIRE_THAT(split[std::size_t(i)],
                 Catch::Matchers::WithinAbs(integrator, 1e-12));
  }
}

TEST_CASE("deterministic dynamics are absorbed into the unit ball") {
  // The flow maps [-z, z] into [-max(1, z), max(1, z)] pointwise and both
  // linear substeps satisfy the discrete maximum principle at this dt, so
  // the grid sup norm can never exceed max(1, previous sup).
  const int n = 63;
  Basis basis(n);
  SpectralField x0(static_cast<std::size_t>(n));
  x0[0] = 1.5;
  x0[2] = -0.4;
  const SeedPlan plan{1};
  for (SchemeKind kind : {SchemeKind::exponential, SchemeKind::semi_implicit}) {
    SchemeSpec spec(kind, DriftKind::allen_cahn, basis, 0.0625, 2.0, x0, false);
    const std::vector<SpectralField> states =
        simulate_path_states(spec, plan, 0);
    // Both modes peak at xi = 1/2, so the grid sup is 1.9 sqrt(2).
    double prev = sup_norm(basis, states[0]);
    REQUIRE_THAT(prev, Catch::Matchers::WithinRel(1.9 * std::sqrt(2.0), 1e-9));
    for (std::size_t k = 1; k < states.size(); ++k) {
      const double cur = sup_norm(basis, states[k]);
      REQUIRE(cur <= std::max(1.0, prev) + 1e-12);
      prev = cur;
    }
    // lambda_1 = pi^2 > 1 makes zero globally attracting without noise.
    REQUIRE(prev < 1e-5);
  }
}

TEST_CASE("divergence is flagged and latched, never thrown") {
  const int n = 12;
  Basis basis(n);
  const SeedPlan plan{11};
  SpectralField huge(static_cast<std::size_t>(n));
  huge[0] = 1e7;
  for (SchemeKind kind : {SchemeKind::exponential, SchemeKind::semi_implicit}) {
    SchemeSpec spec(kind, DriftKind::allen_cahn, basis, 0.125, 1.0, huge, false);
    const PathResult r = simulate_terminal(spec, plan, 0);
    REQUIRE(r.diverged);
    // The flow saturates, so the state itself recovers; only the flag stays.
    for (int i = 0; i < n; ++i)
      REQUIRE(std::isfinite(r.terminal[std::size_t(i)]));
    REQUIRE(sup_norm(basis, r.terminal) < 1.0);
  }
  SchemeSpec tame(SchemeKind::exponential, DriftKind::allen_cahn, basis, 0.125,
                  1.0, decaying_start(n), true);
  REQUIRE_FALSE(simulate_terminal(tame, plan, 0).diverged);
}

TEST_CASE("flow kernel trips its flag on NaN and out-of-range rows") {
  NonlinearityAt flow(0.125);
  double rows[6] = {0.1, -0.5, 0.2, 0.3, std::nan(""), 0.1};
  unsigned char flags[3] = {0, 0, 0};
  rows[2] = 2e6;
  kernels::flow_rows(flow, rows, 3, 2, flags);
  REQUIRE(flags[0] == 0);
  REQUIRE(flags[1] == 1);
  REQUIRE(flags[2] == 1);
}

TEST_CASE("step tables hold the exact per-mode factors") {
  const int n = 8;
  Basis basis(n);
  StepTables tables(basis, 1.0);
  for (int i = 0; i < n; ++i) {
    REQUIRE(tables.semigroup[std::size_t(i)] ==
            std::exp(-basis.lambda(i) * 1.0));
    REQUIRE(tables.resolvent[std::size_t(i)] ==
            1.0 / (1.0 + basis.lambda(i) * 1.0));
  }
  // Mode-1 factors at dt = 1 against 25-digit reference values.
  REQUIRE_THAT(tables.resolvent[0],
               Catch::Matchers::WithinRel(0.09199966835037523, 1e-14));
  REQUIRE_THAT(tables.semigroup[0],
               Catch::Matchers::WithinRel(5.172318620381231e-5, 1e-13));
}

TEST_CASE("step arithmetic validates its inputs") {
  REQUIRE(step_count(1.0, 1.0 / 512) == 512);
  REQUIRE(step_count(0.7, 0.1) == 7);
  REQUIRE(step_count(1.0, 1.0) == 1);
  REQUIRE_THROWS_AS(step_count(1.0, 0.3), std::invalid_argument);
  REQUIRE_THROWS_AS(step_count(0.5, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(step_count(1.0, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(step_count(-1.0, 0.1), std::invalid_argument);

  const int n = 6;
  Basis basis(n);
  const SpectralField x0(static_cast<std::size_t>(n));
  REQUIRE_THROWS_AS(SchemeSpec(SchemeKind::exponential, DriftKind::allen_cahn,
                               basis, 2.0, 4.0, x0),
                    std::invalid_argument);
  const SpectralField wrong(std::size_t(n + 1));
  REQUIRE_THROWS_AS(SchemeSpec(SchemeKind::exponential, DriftKind::allen_cahn,
                               basis, 0.5, 1.0, wrong),
                    std::invalid_argument);
}
