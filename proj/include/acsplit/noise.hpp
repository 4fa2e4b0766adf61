#pragma once

#include <cstdint>
#include <vector>

#include "basis.hpp"
#include "philox.hpp"

namespace acsplit {

// Stream layout.  The 64-bit master seed is the Philox key; the counter words
// are (sample, step, pair, slot).  Pair p covers modes 2p and 2p+1, which each
// take one output of the Box-Muller pair.  Slots keep draw purposes disjoint:
//   primary    per-step gaussians G1 (drive the OU convolution increments)
//   secondary  per-step gaussians G2 (complete the white increments)
//   auxiliary  everything else (random probe directions)
// A white increment and the OU convolution increment of the same step and
// mode are correlated; (G1, G2) carry that joint law, so every consumer of
// the same (seed, sample, step) sees one consistent noise realization.
struct SeedPlan {
  std::uint64_t master_seed = 0;
  std::uint32_t key0() const { return std::uint32_t(master_seed); }
  std::uint32_t key1() const { return std::uint32_t(master_seed >> 32); }
};

enum class StreamSlot : std::uint32_t {
  primary = 0,
  secondary = 1,
  auxiliary = 2,
};

inline void fill_gaussians(const SeedPlan& plan, std::uint32_t sample,
                           std::uint32_t step, StreamSlot slot, double* out,
                           int n) {
  for (int p = 0; 2 * p < n; ++p) {
    const auto w = Philox4x32::block(
        {sample, step, std::uint32_t(p), std::uint32_t(slot)}, plan.key0(),
        plan.key1());
    double g0, g1;
    gaussian_pair_from_block(w, g0, g1);
    out[2 * p] = g0;
    if (2 * p + 1 < n) out[2 * p + 1] = g1;
  }
}

// Per-mode factors for one step of size dt.
//   conv_std    sqrt((1 - e^{-2 lambda dt}) / (2 lambda)), the exact standard
//               deviation of the stochastic convolution over one step
//   white_on_g1, white_on_g2
//               Cholesky factors expressing the white increment against the
//               same G1 that drives the convolution: cov(white, conv) =
//               (1 - e^{-lambda dt}) / lambda
//   decay       e^{-lambda dt}, the semigroup weight used when composing
//               fine-step convolutions into a coarse one
struct NoiseTables {
  double dt = 0.0;
  std::vector<double> conv_std;
  std::vector<double> white_on_g1;
  std::vector<double> white_on_g2;
  std::vector<double> decay;

  NoiseTables() = default;
  NoiseTables(const Basis& basis, double step) : dt(step) {
    detail::check(step > 0.0, "NoiseTables: dt must be > 0");
    const int n = basis.n();
    conv_std.resize(n);
    white_on_g1.resize(n);
    white_on_g2.resize(n);
    decay.resize(n);
    for (int i = 0; i < n; ++i) {
      const double lambda = basis.lambda(i);
      const double var = -std::expm1(-2.0 * lambda * dt) / (2.0 * lambda);
      const double cov = -std::expm1(-lambda * dt) / lambda;
      conv_std[i] = std::sqrt(var);
      white_on_g1[i] = cov / conv_std[i];
      // Cauchy-Schwarz gives dt * var >= cov^2; clamp guards rounding.
      white_on_g2[i] = std::sqrt(std::max(0.0, dt - cov * cov / var));
      decay[i] = std::exp(-lambda * dt);
    }
  }
};

// Draws the noise of single fine steps.  Owns scratch, so one instance per
// worker thread; copies are independent.
class FineNoiseSampler {
 public:
  FineNoiseSampler(const SeedPlan& plan, const Basis& basis, double dt,
                   bool need_white)
      : plan_(plan),
        tables_(basis, dt),
        need_white_(need_white),
        n_(basis.n()),
        g2_(need_white ? basis.n() : 0) {}

  const NoiseTables& tables() const { return tables_; }
  bool need_white() const { return need_white_; }

  // dz receives the convolution increment; dw (may be null when the sampler
  // was built without white noise) receives the white increment.
  void sample(std::uint32_t sample, std::uint32_t step, double* dz,
              double* dw) {
    fill_gaussians(plan_, sample, step, StreamSlot::primary, dz, n_);
    if (need_white_ && dw != nullptr) {
      fill_gaussians(plan_, sample, step, StreamSlot::secondary, g2_.data(),
                     n_);
      for (int i = 0; i < n_; ++i)
        dw[i] = tables_.white_on_g1[i] * dz[i] + tables_.white_on_g2[i] * g2_[i];
    }
    for (int i = 0; i < n_; ++i) dz[i] *= tables_.conv_std[i];
  }

 private:
  SeedPlan plan_;
  NoiseTables tables_;
  bool need_white_;
  int n_;
  std::vector<double> g2_;
};

inline SpectralField white_increment(const SeedPlan& plan, const Basis& basis,
                                     double dt, std::uint32_t sample,
                                     std::uint32_t step) {
  FineNoiseSampler sampler(plan, basis, dt, true);
  SpectralField dz(std::size_t(basis.n()));
  SpectralField dw(std::size_t(basis.n()));
  sampler.sample(sample, step, dz.data(), dw.data());
  return dw;
}

inline SpectralField ou_convolution_increment(const SeedPlan& plan,
                                              const Basis& basis, double dt,
                                              std::uint32_t sample,
                                              std::uint32_t step) {
  FineNoiseSampler sampler(plan, basis, dt, false);
  SpectralField dz(std::size_t(basis.n()));
  sampler.sample(sample, step, dz.data(), nullptr);
  return dz;
}

// Exact aggregation of fine-step noise to a coarser grid with step
// m * dt_fine.  White increments add bit-exactly in fine-step order; the
// convolution composes with the semigroup weight of the remaining fine
// interval: acc <- acc * e^{-lambda dt_fine} + dz_j, so the fine increment
// ending at t_{j+1} enters the coarse step ending at t_end with weight
// e^{-lambda (t_end - t_{j+1})}.
struct CoarseIncrements {
  std::vector<SpectralField> conv;
  std::vector<SpectralField> white;
};

inline CoarseIncrements couple_to_coarse(const SeedPlan& plan,
                                         const Basis& basis, double dt_fine,
                                         std::uint32_t n_fine_steps, int m,
                                         std::uint32_t sample,
                                         bool need_white = true) {
  detail::check(m >= 1, "couple_to_coarse: m must be >= 1");
  detail::check(n_fine_steps % std::uint32_t(m) == 0,
                "couple_to_coarse: m must divide the fine step count");
  const int n = basis.n();
  FineNoiseSampler sampler(plan, basis, dt_fine, need_white);
  CoarseIncrements out;
  std::vector<double> dz(n), dw(need_white ? n : 0);
  std::vector<double> acc_z(n, 0.0), acc_w(n, 0.0);
  for (std::uint32_t j = 0; j < n_fine_steps; ++j) {
    sampler.sample(sample, j, dz.data(), need_white ? dw.data() : nullptr);
    for (int i = 0; i < n; ++i)
      acc_z[i] = acc_z[i] * sampler.tables().decay[i] + dz[i];
    if (need_white)
      for (int i = 0; i < n; ++i) acc_w[i] += dw[i];
    if ((j + 1) % std::uint32_t(m) == 0) {
      out.conv.emplace_back(acc_z);
      if (need_white) out.white.emplace_back(acc_w);
      std::fill(acc_z.begin(), acc_z.end(), 0.0);
      std::fill(acc_w.begin(), acc_w.end(), 0.0);
    }
  }
  return out;
}

}  // namespace acsplit
