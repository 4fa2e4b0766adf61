#pragma once

#include <cmath>
#include <stdexcept>

namespace acsplit {

// Flow map of z' = z - z^3 and the regularized drift psi_t = (phi_t - id)/t.
//
// phi_t(z) = z / sqrt(z^2 + (1 - z^2) e^{-2t}).  The denominator is written
// with the factor (1 - z^2) so that 0 and +-1 are fixed points exactly, not
// just up to rounding.  All functions require t >= 0.
//
// Small-time evaluation: (phi_t(z) - z)/t cancels catastrophically when
// t |psi| << |z|, so below the switch the series in t is used instead, built
// from the flow derivatives F1 = f, F2 = f'f, F3 = f''f^2 + f'^2 f,
// F4 = -6 f^3 + 4 f''f'f^2 + f'^3 f with f = z - z^3.  The series needs
// t z^2 small, which is exactly the regime where the closed form cancels;
// at the cap the series truncation and the closed-form cancellation are both
// below 1e-11 relative, so either branch is accurate there.

namespace small_time {

inline constexpr double kSwitch = 1e-4;   // series used below this t
inline constexpr double kZCap = 1e-3;     // and only while t z^2 < this

inline bool use_series(double t, double z) {
  return t < kSwitch && t * z * z < kZCap;
}

inline double psi_series(double t, double z) {
  const double f = z - z * z * z;
  const double fp = 1.0 - 3.0 * z * z;
  const double fpp = -6.0 * z;
  const double f2 = fp * f;
  const double f3 = fpp * f * f + fp * fp * f;
  const double f4 = -6.0 * f * f * f + 4.0 * fpp * fp * f * f + fp * fp * fp * f;
  return f + t * (f2 / 2.0 + t * (f3 / 6.0 + t * f4 / 24.0));
}

inline double psi_prime_series(double t, double z) {
  const double f = z - z * z * z;
  const double fp = 1.0 - 3.0 * z * z;
  const double fpp = -6.0 * z;
  const double d2 = fpp * f + fp * fp;
  const double d3 = -6.0 * f * f + 4.0 * fpp * fp * f + fp * fp * fp;
  const double d4 = -42.0 * fp * f * f + 4.0 * fpp * fpp * f * f +
                    11.0 * fpp * fp * fp * f + fp * fp * fp * fp;
  return fp + t * (d2 / 2.0 + t * (d3 / 6.0 + t * d4 / 24.0));
}

}  // namespace small_time

// Cached exponentials for repeated evaluation at one t (grid sweeps in the
// schemes and the tangent updates).
struct NonlinearityAt {
  double t;
  double c;      // e^{-2t}
  double s;      // 1 - e^{-2t}, via expm1 so small t keeps full precision
  double sigma;  // (1 - e^{-2t})/t, limit 2 at t = 0

  explicit NonlinearityAt(double time)
      : t(time),
        c(std::exp(-2.0 * time)),
        s(-std::expm1(-2.0 * time)),
        sigma(time > 0.0 ? s / time : 2.0) {
    if (!(time >= 0.0))
      throw std::invalid_argument("nonlinearity: t must be >= 0");
  }

  double phi(double z) const {
    if (t == 0.0) return z;
    if (std::abs(z) > 1e8) {
      // z^2 would dominate the denominator; divide it out first.
      const double w = 1.0 / (z * z);
      return std::copysign(1.0 / std::sqrt(1.0 + (w - 1.0) * c), z);
    }
    const double d = z * z + (1.0 - z * z) * c;
    return z / std::sqrt(d);
  }

  double phi_prime(double z) const {
    if (t == 0.0) return 1.0;
    if (std::abs(z) > 1e8) {
      const double a = std::abs(z);
      const double base = s + c / (z * z);
      return c / (a * a * a * base * std::sqrt(base));
    }
    const double d = z * z + (1.0 - z * z) * c;
    return c / (d * std::sqrt(d));
  }

  double psi(double z) const {
    if (t == 0.0) return z - z * z * z;
    if (small_time::use_series(t, z)) return small_time::psi_series(t, z);
    return (phi(z) - z) / t;
  }

  double psi_prime(double z) const {
    if (t == 0.0) return 1.0 - 3.0 * z * z;
    if (small_time::use_series(t, z)) return small_time::psi_prime_series(t, z);
    return (phi_prime(z) - 1.0) / t;
  }

  // psi''_t(z) = phi''_t(z)/t = -3 c z (1-c)/t D^{-5/2}; (1-c)/t is sigma, so
  // the t -> 0 limit -6z needs no separate series.
  double psi_second(double z) const {
    if (t == 0.0) return -6.0 * z;
    if (std::abs(z) > 1e8) {
      const double a = std::abs(z);
      const double base = s + c / (z * z);
      const double b2 = base * base;
      return -3.0 * c * sigma * std::copysign(1.0, z) /
             (a * a * a * a * b2 * std::sqrt(base));
    }
    const double d = z * z + (1.0 - z * z) * c;
    const double d2 = d * d;
    return -3.0 * c * z * sigma / (d2 * std::sqrt(d));
  }
};

inline double phi(double t, double z) { return NonlinearityAt(t).phi(z); }
inline double phi_prime(double t, double z) {
  return NonlinearityAt(t).phi_prime(z);
}
inline double psi(double t, double z) { return NonlinearityAt(t).psi(z); }
inline double psi_prime(double t, double z) {
  return NonlinearityAt(t).psi_prime(z);
}
inline double psi_second(double t, double z) {
  return NonlinearityAt(t).psi_second(z);
}

}  // namespace acsplit
