#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <functional>
#include <utility>
#include <vector>

#include "basis.hpp"
#include "parallel.hpp"
#include "schemes.hpp"

namespace acsplit {

// One rung of a refinement ladder: the coarse step dt is m fine steps.
struct LadderLevel {
  int m;
  double dt;
  std::uint32_t n_steps;
  StepTables tables;

  LadderLevel(const Basis& basis, double T, double step, int ratio)
      : m(ratio), dt(step), n_steps(step_count(T, step)), tables(basis, step) {}
};

// A coupled refinement study: every level consumes the same fine-step noise,
// aggregated exactly to its own step size, and an optional reference path
// (exponential scheme at dt_fine) runs on the fine grid itself.  One pass
// over the fine clock advances everything, so per-sample differences between
// any level and the reference are measured under the exact coupling.
struct LadderSpec {
  SchemeKind kind;   // scheme of the coarse levels
  DriftKind drift;
  const Basis* basis;
  double T;
  double dt_fine;
  std::uint32_t n_fine_steps;
  bool with_reference;
  bool with_noise;
  StepTables fine_tables;
  std::vector<LadderLevel> levels;
  SpectralField x0;

  LadderSpec(SchemeKind scheme_kind, DriftKind drift_kind, const Basis& b,
             double horizon, std::vector<double> dts, double fine_step,
             bool reference, SpectralField initial, bool noise = true)
      : kind(scheme_kind),
        drift(drift_kind),
        basis(&b),
        T(horizon),
        dt_fine(fine_step),
        n_fine_steps(step_count(horizon, fine_step)),
        with_reference(reference),
        with_noise(noise),
        fine_tables(b, fine_step),
        x0(std::move(initial)) {
    detail::check(!dts.empty(), "LadderSpec: empty dt ladder");
    std::sort(dts.begin(), dts.end(), std::greater<double>());
    levels.reserve(dts.size());
    for (std::size_t l = 0; l < dts.size(); ++l) {
      const double dt = dts[l];
      detail::check(dt <= kMaxStep, "LadderSpec: dt must be <= 1");
      detail::check(l == 0 || dt < dts[l - 1] * (1.0 - 1e-12),
                    "LadderSpec: duplicate dt in ladder");
      const double ratio = dt / fine_step;
      const int m = int(std::llround(ratio));
      detail::check(m >= 1 && std::abs(ratio - double(m)) <= 1e-9 * ratio,
                    "LadderSpec: dt must be an integer multiple of dt_fine");
      levels.emplace_back(b, horizon, dt, m);
    }
    check_size(b, x0, "LadderSpec");
  }
};

// Read-only view of one finished sample handed to the statistic callback.
// Pointers are valid only during the callback.
struct SampleView {
  std::uint64_t sample = 0;
  int n = 0;
  int n_levels = 0;
  const double* ref = nullptr;            // null when the spec has no reference
  const double* const* levels = nullptr;  // terminal spectral coefficients
  const double* level_sup = nullptr;      // terminal grid sup per level, on request
};

namespace detail {

// Advances one batch of samples through all levels at once.  States are kept
// sample-major (one row per sample) so the grid round trips of the flow
// substep run as single dgemm passes over the whole batch.
class LadderBatch {
 public:
  static constexpr int kBatch = 64;

  LadderBatch(const LadderSpec& spec, const SeedPlan& plan)
      : spec_(spec),
        basis_(*spec.basis),
        n_(spec.basis->n()),
        n_levels_(int(spec.levels.size())),
        need_white_(spec.with_noise && spec.kind == SchemeKind::semi_implicit),
        sampler_(plan, basis_, spec.dt_fine, need_white_) {
    const std::size_t cells = std::size_t(kBatch) * n_;
    if (spec_.with_reference) ref_.resize(cells);
    states_.resize(std::size_t(n_levels_) * cells);
    acc_.assign(std::size_t(n_levels_) * cells, 0.0);
    dz_.assign(cells, 0.0);
    if (need_white_) dw_.resize(cells);
    phys_.resize(cells);
    spec2_.resize(cells);
    sup_.resize(std::size_t(kBatch) * n_levels_);
    level_ptrs_.resize(n_levels_);
  }

  // row_fn(view, diverged) is called once per sample in index order.
  template <typename RowFn>
  void run(std::uint64_t first, std::uint64_t count, bool need_sup,
           RowFn&& row_fn) {
    for (std::uint64_t start = 0; start < count; start += kBatch) {
      const int rows = int(std::min<std::uint64_t>(kBatch, count - start));
      run_batch(first + start, rows, need_sup, row_fn);
    }
  }

 private:
  template <typename RowFn>
  void run_batch(std::uint64_t sample0, int rows, bool need_sup,
                 RowFn&& row_fn) {
    const std::size_t cells = std::size_t(kBatch) * n_;
    for (int r = 0; r < rows; ++r) {
      double* row = states_.data() + std::size_t(r) * n_;
      std::memcpy(row, spec_.x0.data(), sizeof(double) * n_);
    }
    for (int l = 1; l < n_levels_; ++l)
      std::memcpy(states_.data() + l * cells, states_.data(),
                  sizeof(double) * std::size_t(rows) * n_);
    if (spec_.with_reference)
      std::memcpy(ref_.data(), states_.data(),
                  sizeof(double) * std::size_t(rows) * n_);
    std::fill(acc_.begin(), acc_.end(), 0.0);
    diverged_.assign(kBatch, 0);

    for (std::uint32_t j = 0; j < spec_.n_fine_steps; ++j) {
      if (spec_.with_noise)
        for (int r = 0; r < rows; ++r)
          sampler_.sample(std::uint32_t(sample0 + r), j,
                          dz_.data() + std::size_t(r) * n_,
                          need_white_ ? dw_.data() + std::size_t(r) * n_
                                      : nullptr);
      if (spec_.with_reference)
        step_rows(spec_.fine_tables, SchemeKind::exponential, ref_.data(),
                  spec_.with_noise ? dz_.data() : nullptr, rows);
      for (int l = 0; l < n_levels_; ++l) {
        double* acc = acc_.data() + l * cells;
        if (spec_.with_noise) fold(acc, rows);
        if ((j + 1) % std::uint32_t(spec_.levels[l].m) == 0) {
          step_rows(spec_.levels[l].tables, spec_.kind,
                    states_.data() + l * cells, acc, rows);
          std::fill(acc, acc + std::size_t(rows) * n_, 0.0);
        }
      }
    }

    if (need_sup)
      for (int l = 0; l < n_levels_; ++l) {
        basis_.rows_to_physical(states_.data() + l * cells, phys_.data(), rows);
        for (int r = 0; r < rows; ++r) {
          const double* row = phys_.data() + std::size_t(r) * n_;
          double m = 0.0;
          for (int i = 0; i < n_; ++i) m = std::max(m, std::abs(row[i]));
          sup_[std::size_t(r) * n_levels_ + l] = m;
        }
      }

    for (int r = 0; r < rows; ++r) {
      SampleView view;
      view.sample = sample0 + r;
      view.n = n_;
      view.n_levels = n_levels_;
      view.ref = spec_.with_reference ? ref_.data() + std::size_t(r) * n_
                                      : nullptr;
      for (int l = 0; l < n_levels_; ++l)
        level_ptrs_[l] = states_.data() + l * cells + std::size_t(r) * n_;
      view.levels = level_ptrs_.data();
      view.level_sup = need_sup ? sup_.data() + std::size_t(r) * n_levels_
                                : nullptr;
      row_fn(view, diverged_[r] != 0);
    }
  }

  // acc <- acc * e^{-lambda dt_fine} + dz for the OU convolution, or
  // acc <- acc + dw for white increments; matches couple_to_coarse exactly.
  void fold(double* acc, int rows) {
    if (need_white_) {
      for (int r = 0; r < rows; ++r) {
        double* a = acc + std::size_t(r) * n_;
        const double* w = dw_.data() + std::size_t(r) * n_;
        for (int i = 0; i < n_; ++i) a[i] += w[i];
      }
    } else {
      const double* decay = sampler_.tables().decay.data();
      for (int r = 0; r < rows; ++r) {
        double* a = acc + std::size_t(r) * n_;
        const double* z = dz_.data() + std::size_t(r) * n_;
        for (int i = 0; i < n_; ++i) a[i] = a[i] * decay[i] + z[i];
      }
    }
  }

  // One scheme step on a block of rows; inc may be null (no noise).
  void step_rows(const StepTables& tables, SchemeKind kind, double* x,
                 const double* inc, int rows) {
    const double* drift = x;
    if (spec_.drift == DriftKind::allen_cahn) {
      basis_.rows_to_physical(x, phys_.data(), rows);
      kernels::flow_rows(tables.flow, phys_.data(), rows, n_, diverged_.data());
      basis_.rows_to_spectral(phys_.data(), spec2_.data(), rows);
      drift = spec2_.data();
    }
    if (kind == SchemeKind::exponential) {
      const double* s = tables.semigroup.data();
      for (int r = 0; r < rows; ++r) {
        double* out = x + std::size_t(r) * n_;
        const double* d = drift + std::size_t(r) * n_;
        const double* z = inc == nullptr ? nullptr : inc + std::size_t(r) * n_;
        for (int i = 0; i < n_; ++i)
          out[i] = s[i] * d[i] + (z == nullptr ? 0.0 : z[i]);
      }
    } else {
      const double* rv = tables.resolvent.data();
      for (int r = 0; r < rows; ++r) {
        double* out = x + std::size_t(r) * n_;
        const double* d = drift + std::size_t(r) * n_;
        const double* z = inc == nullptr ? nullptr : inc + std::size_t(r) * n_;
        for (int i = 0; i < n_; ++i)
          out[i] = rv[i] * (d[i] + (z == nullptr ? 0.0 : z[i]));
      }
    }
  }

  const LadderSpec& spec_;
  const Basis& basis_;
  int n_;
  int n_levels_;
  bool need_white_;
  FineNoiseSampler sampler_;
  std::vector<double> ref_, states_, acc_, dz_, dw_, phys_, spec2_, sup_;
  std::vector<const double*> level_ptrs_;
  std::vector<unsigned char> diverged_;
};

}  // namespace detail

// Monte Carlo over a coupled ladder.  stat_fn(view, row) writes stat_width
// statistics for one sample; diverged samples are excluded and counted.
// Results are byte-identical for any thread count.
template <typename StatFn>
MeanTable run_ladder(const LadderSpec& spec, const SeedPlan& plan,
                     std::uint64_t n_samples, int threads,
                     std::size_t stat_width, bool need_sup, StatFn&& stat_fn) {
  auto fill_block = [&](std::uint64_t first, std::uint64_t count,
                        BlockStats& stats) {
    detail::LadderBatch batch(spec, plan);
    std::vector<double> row(stat_width);
    batch.run(first, count, need_sup,
              [&](const SampleView& view, bool diverged) {
                if (diverged) {
                  ++stats.n_flagged;
                  return;
                }
                stat_fn(view, row.data());
                stats.add_row(row.data());
              });
  };
  return reduce_pairwise(
      run_sample_blocks(n_samples, threads, stat_width, fill_block));
}

}  // namespace acsplit
