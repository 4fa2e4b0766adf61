#pragma once

#include <cblas.h>

#include <cmath>
#include <cstddef>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

// Present in OpenBLAS only; the reference BLAS leaves the symbol null and the
// call is skipped.  BLAS must stay single threaded: the Monte Carlo driver
// owns all parallelism, and thread-count-independent reductions rely on BLAS
// results not depending on a runtime thread pool.
extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace acsplit {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

namespace detail {

inline void pin_blas_single_thread() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    if (openblas_set_num_threads != nullptr) openblas_set_num_threads(1);
  });
}

// out = alpha * in * m, all row-major, in: rows x n, m: n x n symmetric.
inline void matmul_rows(const double* in, const double* m, double* out,
                        int rows, int n, double alpha) {
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, rows, n, n, alpha, in,
              n, m, n, 0.0, out, n);
}

inline void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace detail

// Coefficients (x_1, ..., x_N) of x = sum_n x_n e_n in the Dirichlet sine
// basis e_n(xi) = sqrt(2) sin(n pi xi) on (0,1).
struct SpectralField {
  std::vector<double> coeffs;

  SpectralField() = default;
  explicit SpectralField(std::size_t n) : coeffs(n, 0.0) {}
  explicit SpectralField(std::vector<double> c) : coeffs(std::move(c)) {}

  std::size_t size() const { return coeffs.size(); }
  double& operator[](std::size_t i) { return coeffs[i]; }
  double operator[](std::size_t i) const { return coeffs[i]; }
  double* data() { return coeffs.data(); }
  const double* data() const { return coeffs.data(); }
};

// Galerkin sine basis with N modes and the matching collocation grid
// xi_j = j/(N+1), j = 1..N.  The transform matrix S_{jn} = sqrt(2) sin(n pi
// xi_j) is symmetric and satisfies S S = (N+1) I, so to_spectral is the exact
// left inverse of to_physical with quadrature weight 1/(N+1).
class Basis {
 public:
  explicit Basis(int n_modes) : n_(n_modes) {
    detail::check(n_modes >= 1, "Basis: n_modes must be >= 1");
    detail::pin_blas_single_thread();
    lambda_.resize(n_);
    grid_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      const double mode = double(i + 1);
      lambda_[i] = mode * mode * kPi * kPi;
      grid_[i] = double(i + 1) / double(n_ + 1);
    }
    dst_.resize(std::size_t(n_) * n_);
    const double root2 = std::sqrt(2.0);
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < n_; ++i)
        dst_[std::size_t(j) * n_ + i] =
            root2 * std::sin(double(j + 1) * double(i + 1) * kPi / double(n_ + 1));
  }

  int n() const { return n_; }
  double lambda(int i) const { return lambda_[std::size_t(i)]; }
  const std::vector<double>& eigenvalues() const { return lambda_; }
  const std::vector<double>& grid() const { return grid_; }

  // Batched transforms, one sample per row; rows x n, row-major.
  void rows_to_physical(const double* coeffs, double* values, int rows) const {
    detail::matmul_rows(coeffs, dst_.data(), values, rows, n_, 1.0);
  }
  void rows_to_spectral(const double* values, double* coeffs, int rows) const {
    detail::matmul_rows(values, dst_.data(), coeffs, rows, n_,
                        1.0 / double(n_ + 1));
  }

  const double* dst_matrix() const { return dst_.data(); }

 private:
  int n_;
  std::vector<double> lambda_;
  std::vector<double> grid_;
  std::vector<double> dst_;
};

inline void check_size(const Basis& basis, const SpectralField& x,
                       const char* what) {
  if (int(x.size()) != basis.n())
    throw std::invalid_argument(std::string(what) +
                                ": field size does not match basis");
}

inline std::vector<double> to_physical(const Basis& basis,
                                       const SpectralField& x) {
  check_size(basis, x, "to_physical");
  std::vector<double> values(x.size());
  basis.rows_to_physical(x.data(), values.data(), 1);
  return values;
}

inline SpectralField to_spectral(const Basis& basis,
                                 const std::vector<double>& values) {
  if (int(values.size()) != basis.n())
    throw std::invalid_argument("to_spectral: grid size does not match basis");
  SpectralField x(values.size());
  basis.rows_to_spectral(values.data(), x.data(), 1);
  return x;
}

inline SpectralField apply_semigroup(const Basis& basis, const SpectralField& x,
                                     double t) {
  check_size(basis, x, "apply_semigroup");
  detail::check(t >= 0.0, "apply_semigroup: t must be >= 0");
  SpectralField y(x.size());
  for (int i = 0; i < basis.n(); ++i)
    y[i] = x[std::size_t(i)] * std::exp(-basis.lambda(i) * t);
  return y;
}

inline SpectralField apply_resolvent(const Basis& basis, const SpectralField& x,
                                     double dt) {
  check_size(basis, x, "apply_resolvent");
  detail::check(dt > 0.0, "apply_resolvent: dt must be > 0");
  SpectralField y(x.size());
  for (int i = 0; i < basis.n(); ++i)
    y[i] = x[std::size_t(i)] / (1.0 + basis.lambda(i) * dt);
  return y;
}

inline double h_norm(const SpectralField& x) {
  double s = 0.0;
  for (double c : x.coeffs) s += c * c;
  return std::sqrt(s);
}

// |(-A)^alpha x|_H = (sum_n lambda_n^(2 alpha) x_n^2)^(1/2); alpha may be
// negative.  NaN coefficients propagate.
inline double fractional_norm(const Basis& basis, const SpectralField& x,
                              double alpha) {
  check_size(basis, x, "fractional_norm");
  double s = 0.0;
  for (int i = 0; i < basis.n(); ++i) {
    const double w = std::pow(basis.lambda(i), 2.0 * alpha);
    s += w * x[std::size_t(i)] * x[std::size_t(i)];
  }
  return std::sqrt(s);
}

// Quadrature-weighted discrete L2 norm of grid values; equals the H norm of
// the spectral coefficients by the discrete Parseval identity.
inline double discrete_l2_norm(const std::vector<double>& values, int n) {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s / double(n + 1));
}

inline double sup_norm(const Basis& basis, const SpectralField& x) {
  const std::vector<double> values = to_physical(basis, x);
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

// Dense grid-space realization of a diagonal spectral multiplier:
// Q = S diag(f) S / (N+1), symmetric.  Applying Q to grid values equals
// to_physical(diag(f) to_spectral(values)) and costs one dgemm row pass, which
// lets tangent vectors evolve without per-step round trips.
class GridOperator {
 public:
  GridOperator() = default;
  GridOperator(const Basis& basis, const std::vector<double>& factors)
      : n_(basis.n()), q_(std::size_t(basis.n()) * basis.n()) {
    detail::check(int(factors.size()) == basis.n(),
                  "GridOperator: factor count does not match basis");
    const int n = n_;
    std::vector<double> scaled(std::size_t(n) * n);
    const double* s = basis.dst_matrix();
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        scaled[std::size_t(j) * n + i] = s[std::size_t(j) * n + i] * factors[std::size_t(i)];
    detail::matmul_rows(scaled.data(), s, q_.data(), n, n, 1.0 / double(n + 1));
  }

  int n() const { return n_; }

  // rows x n row-major, out = in * Q (Q symmetric).
  void apply_rows(const double* in, double* out, int rows) const {
    detail::matmul_rows(in, q_.data(), out, rows, n_, 1.0);
  }

 private:
  int n_ = 0;
  std::vector<double> q_;
};

}  // namespace acsplit
