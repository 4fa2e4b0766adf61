#pragma once

#include <cmath>
#include <stdexcept>

#include "basis.hpp"

namespace acsplit {

// Cylindrical test functionals phi: H -> R with directional derivatives,
// evaluated on spectral coefficients.
//   cosine    phi(x) = cos(<x, v>), |phi|_{1,inf} bound |v|_H
//   gaussian  phi(x) = exp(-|x|_H^2)
//   linear    phi(x) = <x, v>, unbounded but with constant derivative;
//             closed-form oracle cases use it
struct TestFunction {
  enum class Kind { cosine, gaussian, linear };
  Kind kind = Kind::cosine;
  SpectralField v;

  static TestFunction cosine(SpectralField dir) {
    return {Kind::cosine, std::move(dir)};
  }
  static TestFunction gaussian() { return {Kind::gaussian, SpectralField{}}; }
  static TestFunction linear(SpectralField dir) {
    return {Kind::linear, std::move(dir)};
  }

  static double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  }

  void check_direction(int n) const {
    if (kind != Kind::gaussian && int(v.size()) != n)
      throw std::invalid_argument("TestFunction: direction size mismatch");
  }

  double value(const double* x, int n) const {
    switch (kind) {
      case Kind::cosine:
        return std::cos(dot(x, v.data(), n));
      case Kind::gaussian:
        return std::exp(-dot(x, x, n));
      case Kind::linear:
      default:
        return dot(x, v.data(), n);
    }
  }

  // D phi(x).h
  double d1(const double* x, const double* h, int n) const {
    switch (kind) {
      case Kind::cosine:
        return -std::sin(dot(x, v.data(), n)) * dot(v.data(), h, n);
      case Kind::gaussian:
        return -2.0 * dot(x, h, n) * std::exp(-dot(x, x, n));
      case Kind::linear:
      default:
        return dot(v.data(), h, n);
    }
  }

  // D^2 phi(x).(h, k); the h and k factors are grouped so swapping the
  // directions is bitwise invariant
  double d2(const double* x, const double* h, const double* k, int n) const {
    switch (kind) {
      case Kind::cosine:
        return -std::cos(dot(x, v.data(), n)) *
               (dot(v.data(), h, n) * dot(v.data(), k, n));
      case Kind::gaussian: {
        const double e = std::exp(-dot(x, x, n));
        return (-2.0 * dot(h, k, n) + 4.0 * (dot(x, h, n) * dot(x, k, n))) * e;
      }
      case Kind::linear:
      default:
        return 0.0;
    }
  }

  // Upper bound for sup |D phi|, reported alongside weak-error tables.
  double d1_bound() const {
    switch (kind) {
      case Kind::cosine:
      case Kind::linear:
        return h_norm(v);
      case Kind::gaussian:
      default:
        // sup of 2 r exp(-r^2) over r >= 0
        return std::sqrt(2.0) * std::exp(-0.5);
    }
  }
};

}  // namespace acsplit
