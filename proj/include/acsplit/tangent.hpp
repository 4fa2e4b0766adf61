#pragma once

#include <cmath>
#include <vector>

#include "basis.hpp"
#include "nonlinearity.hpp"

namespace acsplit {

// First variation eta and second variation zeta along a simulated path,
// discretized with the same splitting and time grid as the path itself:
// a substep multiplies pointwise by exp(dt_sub psi'_{dt_path}(X)) on the
// grid (the exact flow of the frozen reaction factor), then applies the
// semigroup.  The reaction multiplier is bounded by exp(dt_sub e^{dt_path}),
// so one substep grows |eta|_H by at most exp((e^{dt_path} - lambda_1) dt_sub).

// Pointwise factors of one substep, given the carrying state on the grid.
namespace tangent_kernels {

// mult[i] = exp(dt_sub psi'(x[i])), the reaction factor of the substep
inline void reaction_multiplier(const NonlinearityAt& flow, double dt_sub,
                                const double* x_grid, double* mult, int n) {
  for (int i = 0; i < n; ++i)
    mult[i] = std::exp(dt_sub * flow.psi_prime(x_grid[i]));
}

// src[i] = dt_sub psi''(x[i]), weight of the eta_h eta_k source in zeta
inline void second_variation_source(const NonlinearityAt& flow, double dt_sub,
                                    const double* x_grid, double* src, int n) {
  for (int i = 0; i < n; ++i) src[i] = dt_sub * flow.psi_second(x_grid[i]);
}

}  // namespace tangent_kernels

// One substep of d eta/dt = A eta + psi'_{dt_path}(X) eta along the frozen
// state x.  dt_path selects the regularized drift; dt_sub is the step.
inline SpectralField evolve_tangent(const Basis& basis, double dt_path,
                                    const SpectralField& x,
                                    const SpectralField& eta, double dt_sub) {
  check_size(basis, x, "evolve_tangent");
  check_size(basis, eta, "evolve_tangent");
  const int n = basis.n();
  const NonlinearityAt flow(dt_path);
  std::vector<double> xg = to_physical(basis, x);
  std::vector<double> eg = to_physical(basis, eta);
  std::vector<double> mult(n);
  tangent_kernels::reaction_multiplier(flow, dt_sub, xg.data(), mult.data(), n);
  for (int i = 0; i < n; ++i) eg[i] *= mult[i];
  return apply_semigroup(basis, to_spectral(basis, eg), dt_sub);
}

// One substep of d zeta/dt = A zeta + psi'(X) zeta + psi''(X) eta_h eta_k,
// sourced with the variations at the start of the substep.  Symmetric in
// (eta_h, eta_k) exactly.
inline SpectralField evolve_second_variation(const Basis& basis,
                                             double dt_path,
                                             const SpectralField& x,
                                             const SpectralField& eta_h,
                                             const SpectralField& eta_k,
                                             const SpectralField& zeta,
                                             double dt_sub) {
  check_size(basis, x, "evolve_second_variation");
  check_size(basis, eta_h, "evolve_second_variation");
  check_size(basis, eta_k, "evolve_second_variation");
  check_size(basis, zeta, "evolve_second_variation");
  const int n = basis.n();
  const NonlinearityAt flow(dt_path);
  std::vector<double> xg = to_physical(basis, x);
  std::vector<double> hg = to_physical(basis, eta_h);
  std::vector<double> kg = to_physical(basis, eta_k);
  std::vector<double> zg = to_physical(basis, zeta);
  std::vector<double> mult(n), src(n);
  tangent_kernels::reaction_multiplier(flow, dt_sub, xg.data(), mult.data(), n);
  tangent_kernels::second_variation_source(flow, dt_sub, xg.data(), src.data(),
                                           n);
  // hg kg is grouped so swapping the directions is bitwise invariant
  for (int i = 0; i < n; ++i)
    zg[i] = mult[i] * zg[i] + src[i] * (hg[i] * kg[i]);
  return apply_semigroup(basis, to_spectral(basis, zg), dt_sub);
}

// Growth factor of the pathwise energy bound over one substep:
// |eta'|_H <= exp((e^{dt_path} - lambda_1) dt_sub) |eta|_H.
inline double tangent_growth_factor(const Basis& basis, double dt_path,
                                    double dt_sub) {
  return std::exp((std::exp(dt_path) - basis.lambda(0)) * dt_sub);
}

}  // namespace acsplit
