#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "basis.hpp"
#include "errors.hpp"
#include "test_functions.hpp"

namespace acsplit {

// Basis-independent description of the initial condition. Materialised into
// spectral coefficients once the mode count is known.
struct InitialCondition {
  enum class Kind { zero, sine, values };
  Kind kind = Kind::sine;
  double amplitude = 0.2;
  int wavenumber = 1;
  std::vector<double> grid_values;  // physical values on the interior grid

  static InitialCondition zero() { return {Kind::zero, 0.0, 0, {}}; }
  static InitialCondition sine(double amplitude, int wavenumber) {
    return {Kind::sine, amplitude, wavenumber, {}};
  }
  static InitialCondition values(std::vector<double> grid) {
    return {Kind::values, 0.0, 0, std::move(grid)};
  }

  SpectralField build(const Basis& basis) const {
    SpectralField x0(std::size_t(basis.n()));
    switch (kind) {
      case Kind::zero:
        break;
      case Kind::sine:
        if (wavenumber < 1 || wavenumber > basis.n())
          throw config_error("initial wavenumber out of range 1.." +
                             std::to_string(basis.n()));
        // amplitude * sin(w pi xi) = (amplitude / sqrt(2)) e_w
        x0[std::size_t(wavenumber - 1)] = amplitude / std::sqrt(2.0);
        break;
      case Kind::values:
        if (int(grid_values.size()) != basis.n())
          throw config_error("initial values need exactly " +
                             std::to_string(basis.n()) + " grid points");
        x0 = to_spectral(basis, grid_values);
        break;
    }
    return x0;
  }
};

// Basis-independent description of the weak-error test functional.
struct PhiSpec {
  TestFunction::Kind kind = TestFunction::Kind::cosine;
  int mode = 1;  // direction e_mode for cosine / linear

  TestFunction build(const Basis& basis) const {
    if (kind == TestFunction::Kind::gaussian) return TestFunction::gaussian();
    if (mode < 1 || mode > basis.n())
      throw config_error("phi mode out of range 1.." +
                         std::to_string(basis.n()));
    SpectralField dir(std::size_t(basis.n()));
    dir[std::size_t(mode - 1)] = 1.0;
    return kind == TestFunction::Kind::cosine
               ? TestFunction::cosine(std::move(dir))
               : TestFunction::linear(std::move(dir));
  }
};

}  // namespace acsplit
