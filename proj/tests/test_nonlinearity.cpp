// Flow map and regularized drift checked against direct integration: phi_t
// must match a long-double RK4 solve of z' = z - z^3 and phi_t' the attached
// variational equation, so the closed forms cannot certify themselves.  The
// derivative and Lipschitz bounds are swept over dense (z, dt) grids with no
// slack because the inequalities hold with strict margin away from z = 0.
#include <acsplit/nonlinearity.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace acsplit;

namespace {

long double drift_ld(long double z) { return z - z * z * z; }
long double drift_prime_ld(long double z) { return 1.0L - 3.0L * z * z; }

// Classic RK4 on z' = z - z^3 with eta' = (1 - 3 z^2) eta riding along, so
// one solve yields both the flow value and its derivative in z0.
struct FlowSolution {
  long double z;
  long double eta;
};

FlowSolution flow_rk4(long double t, long double z0, int steps) {
  const long double h = t / steps;
  long double z = z0;
  long double eta = 1.0L;
  for (int k = 0; k < steps; ++k) {
    const long double k1 = drift_ld(z);
    const long double e1 = drift_prime_ld(z) * eta;
    const long double k2 = drift_ld(z + 0.5L * h * k1);
    const long double e2 = drift_prime_ld(z + 0.5L * h * k1) * (eta + 0.5L * h * e1);
    const long double k3 = drift_ld(z + 0.5L * h * k2);
    const long double e3 = drift_prime_ld(z + 0.5L * h * k2) * (eta + 0.5L * h * e2);
    const long double k4 = drift_ld(z + h * k3);
    const long double e4 = drift_prime_ld(z + h * k3) * (eta + h * e3);
    z += h / 6.0L * (k1 + 2.0L * k2 + 2.0L * k3 + k4);
    eta += h / 6.0L * (e1 + 2.0L * e2 + 2.0L * e3 + e4);
  }
  return {z, eta};
}

// Closed form evaluated entirely in long double; the extra 11 bits keep the
// (phi - z)/t cancellation harmless over the ranges used below, which makes
// this a valid reference for the double-precision series branch.
long double phi_closed_ld(long double t, long double z) {
  const long double c = std::exp(-2.0L * t);
  const long double d = z * z + (1.0L - z * z) * c;
  return z / std::sqrt(d);
}

long double psi_closed_ld(long double t, long double z) {
  return (phi_closed_ld(t, z) - z) / t;
}

long double psi_prime_closed_ld(long double t, long double z) {
  const long double c = std::exp(-2.0L * t);
  const long double d = z * z + (1.0L - z * z) * c;
  return (c / (d * std::sqrt(d)) - 1.0L) / t;
}

}  // namespace

TEST_CASE("flow map matches long-double RK4 integration") {
  const double times[] = {0.05, 0.3, 1.0, 2.5};
  const double starts[] = {0.0,  0.1, -0.1, 0.5,  -0.5, 0.9, -0.9,
                           0.99, 1.0, -1.0, 1.01, 1.5,  -2.0, 3.0, -3.0};
  for (double t : times) {
    NonlinearityAt g(t);
    const int steps = 20000 * std::max(1, (int)std::ceil(t));
    for (double z0 : starts) {
      const FlowSolution ref = flow_rk4(t, z0, steps);
      REQUIRE_THAT(g.phi(z0),
                   Catch::Matchers::WithinAbs((double)ref.z, 1e-11) ||
                       Catch::Matchers::WithinRel((double)ref.z, 1e-11));
    }
  }
}

TEST_CASE("flow derivative matches the variational equation") {
  const double times[] = {0.05, 0.3, 1.0, 2.5};
  const double starts[] = {0.0, 0.1, -0.4, 0.8, 1.0, 1.3, -1.7, 2.5, -3.0};
  for (double t : times) {
    NonlinearityAt g(t);
    const int steps = 20000 * std::max(1, (int)std::ceil(t));
    for (double z0 : starts) {
      const FlowSolution ref = flow_rk4(t, z0, steps);
      REQUIRE_THAT(g.phi_prime(z0),
                   Catch::Matchers::WithinAbs((double)ref.eta, 1e-10) ||
                       Catch::Matchers::WithinRel((double)ref.eta, 1e-10));
    }
  }
}

TEST_CASE("fixed points of the flow are exact") {
  for (double t : {0.0, 1e-6, 1e-3, 0.1, 1.0, 10.0}) {
    NonlinearityAt g(t);
    REQUIRE(g.phi(0.0) == 0.0);
    REQUIRE(g.phi(1.0) == 1.0);
    REQUIRE(g.phi(-1.0) == -1.0);
    REQUIRE(g.psi(0.0) == 0.0);
    REQUIRE(g.psi(1.0) == 0.0);
    REQUIRE(g.psi(-1.0) == 0.0);
  }
}

TEST_CASE("flow and drift are odd functions") {
  // Both branches of psi flip sign exactly: every intermediate quantity is
  // even in z or carries a bare sign, so no rounding asymmetry can appear.
  for (double t : {1e-6, 1e-5, 1e-3, 0.2, 1.0}) {
    NonlinearityAt g(t);
    for (double z : {1e-3, 0.3, 0.99, 1.7, 5.0, 2e8}) {
      REQUIRE(g.phi(-z) == -g.phi(z));
      REQUIRE(g.psi(-z) == -g.psi(z));
      REQUIRE(g.phi_prime(-z) == g.phi_prime(z));
      REQUIRE(g.psi_prime(-z) == g.psi_prime(z));
      REQUIRE(g.psi_second(-z) == -g.psi_second(z));
    }
  }
}

TEST_CASE("semiflow identity holds to 1e-12") {
  const double times[] = {5e-5, 0.0625, 0.25, 0.7, 1.3};
  std::vector<double> zs;
  for (int i = 0; i <= 48; ++i) zs.push_back(-6.0 + 12.0 * i / 48);
  for (double t : times) {
    for (double s : times) {
      NonlinearityAt gt(t), gs(s), gts(t + s);
      for (double z : zs) {
        const double composed = gt.phi(gs.phi(z));
        REQUIRE_THAT(gts.phi(z), Catch::Matchers::WithinAbs(composed, 1e-12));
      }
    }
  }
}

TEST_CASE("phi equals identity plus t psi") {
  for (double t : {1e-6, 5e-5, 2e-4, 0.1, 1.0}) {
    NonlinearityAt g(t);
    for (double z : {0.05, -0.3, 0.8, -1.2, 2.0, -4.0}) {
      REQUIRE_THAT(z + t * g.psi(z),
                   Catch::Matchers::WithinRel(g.phi(z), 1e-13) ||
                       Catch::Matchers::WithinAbs(g.phi(z), 1e-15));
    }
  }
}

TEST_CASE("values match a 40-digit reference evaluation") {
  // Frozen from an independent extended-precision evaluation of the closed
  // forms phi = z D^{-1/2}, phi' = c D^{-3/2}, psi'' = -3 c z (1-c)/t D^{-5/2}
  // with c = e^{-2t}, D = z^2 + (1 - z^2) c.
  struct Row {
    double t, z, phi, phi_prime, psi, psi_prime, psi_second;
  };
  const Row rows[] = {
      {0.1, 0.5, 0.53789939202434957, 1.0193756395019447, 0.37899392024349564,
       0.19375639501944744, -3.2078329093438410},
      {0.75, -1.3, -1.0489192671816289, 0.11720723178051110,
       0.33477431042449486, -1.1770570242926519, 0.30825024815612537},
      {1.0, 2.0, 1.0549729219451955, 0.019863006619930496, -0.94502707805480448,
       -0.98013699338006950, -0.028672569194423772},
  };
  for (const Row& r : rows) {
    NonlinearityAt g(r.t);
    REQUIRE_THAT(g.phi(r.z), Catch::Matchers::WithinRel(r.phi, 1e-14));
    REQUIRE_THAT(g.phi_prime(r.z),
                 Catch::Matchers::WithinRel(r.phi_prime, 1e-14));
    REQUIRE_THAT(g.psi(r.z), Catch::Matchers::WithinRel(r.psi, 1e-14));
    REQUIRE_THAT(g.psi_prime(r.z),
                 Catch::Matchers::WithinRel(r.psi_prime, 1e-14));
    REQUIRE_THAT(g.psi_second(r.z),
                 Catch::Matchers::WithinRel(r.psi_second, 1e-14));
  }
}

TEST_CASE("derivatives match finite differences of the long-double flow") {
  // 5-point central stencils on the long-double closed form; h = 1e-3 puts
  // the h^4 truncation error near 1e-12 while rounding stays near 1e-15.
  const long double h = 1e-3L;
  for (double t : {0.05, 0.4, 1.0}) {
    NonlinearityAt g(t);
    for (double z : {0.2, -0.7, 1.1, -1.9, 3.0}) {
      const long double zl = z;
      const long double fd_phi =
          (-phi_closed_ld(t, zl + 2 * h) + 8 * phi_closed_ld(t, zl + h) -
           8 * phi_closed_ld(t, zl - h) + phi_closed_ld(t, zl - 2 * h)) /
          (12 * h);
      const long double fd_psi =
          (-psi_closed_ld(t, zl + 2 * h) + 8 * psi_closed_ld(t, zl + h) -
           8 * psi_closed_ld(t, zl - h) + psi_closed_ld(t, zl - 2 * h)) /
          (12 * h);
      const long double fd_psi2 =
          (-psi_prime_closed_ld(t, zl + 2 * h) +
           8 * psi_prime_closed_ld(t, zl + h) -
           8 * psi_prime_closed_ld(t, zl - h) +
           psi_prime_closed_ld(t, zl - 2 * h)) /
          (12 * h);
      REQUIRE_THAT(g.phi_prime(z),
                   Catch::Matchers::WithinRel((double)fd_phi, 1e-9));
      REQUIRE_THAT(g.psi_prime(z),
                   Catch::Matchers::WithinRel((double)fd_psi, 1e-9));
      REQUIRE_THAT(g.psi_second(z),
                   Catch::Matchers::WithinRel((double)fd_psi2, 1e-9) ||
                       Catch::Matchers::WithinAbs((double)fd_psi2, 1e-10));
    }
  }
}

TEST_CASE("derivative and Lipschitz bounds hold on a 10^4-point grid") {
  // 100 time points spanning (0, 1] and 100 states spanning [-10, 10]; the
  // pointwise bound e^{dt} implies the uniform e^{dt_max} form.  z = 0, where
  // |phi'| = e^t exactly, is not a grid point, so every comparison below
  // carries a genuine margin and no rounding slack is needed.
  std::vector<double> zs(100);
  for (int i = 0; i < 100; ++i) zs[(std::size_t)i] = -10.0 + 20.0 * i / 99;
  for (int j = 1; j <= 100; ++j) {
    const double dt = j / 100.0;
    const double growth = std::exp(dt);
    NonlinearityAt g(dt);
    for (double z : zs) {
      REQUIRE(std::abs(g.phi_prime(z)) <= growth);
      REQUIRE(g.psi_prime(z) <= growth);
      REQUIRE(std::abs(g.psi_prime(z)) <= 3.1 * (1.0 + z * z));
      REQUIRE(std::abs(g.psi_second(z)) <= 6.1 * (1.0 + std::abs(z)));
    }
  }
  // Far outside the grid the guarded branches must keep the same bounds.
  for (double dt : {0.01, 0.5, 1.0}) {
    NonlinearityAt g(dt);
    for (double z : {1e9, -1e9, 3e12, -3e12}) {
      REQUIRE(std::abs(g.phi_prime(z)) <= std::exp(dt));
      REQUIRE(g.psi_prime(z) <= std::exp(dt));
      REQUIRE(std::isfinite(g.phi(z)));
      REQUIRE(std::isfinite(g.psi_second(z)));
    }
  }
}

TEST_CASE("one-sided Lipschitz inequality holds on a 10^4-point grid") {
  // (psi(z2) - psi(z1))(z2 - z1) <= e^{dt} (z2 - z1)^2 for every ordered pair
  // from 10 states at each of 100 time points.
  const double zs[10] = {-8.0, -3.0, -1.2, -0.6, -0.101,
                         0.101, 0.6,  1.2,  3.0,  8.0};
  for (int j = 1; j <= 100; ++j) {
    const double dt = j / 100.0;
    const double growth = std::exp(dt);
    NonlinearityAt g(dt);
    for (double z1 : zs) {
      for (double z2 : zs) {
        const double gap = z2 - z1;
        REQUIRE((g.psi(z2) - g.psi(z1)) * gap <= growth * gap * gap);
      }
    }
  }
}

TEST_CASE("flow contracts toward the unit interval") {
  for (double t : {0.01, 0.3, 2.0}) {
    NonlinearityAt g(t);
    for (double z : {0.2, 0.95, 1.0, 1.3, 4.0, 50.0}) {
      REQUIRE(std::abs(g.phi(z)) <= std::max(std::abs(z), 1.0));
      REQUIRE(std::abs(g.phi(-z)) <= std::max(std::abs(z), 1.0));
    }
  }
}

TEST_CASE("psi converges monotonically to the cubic drift") {
  // sup_z |psi_t - psi_0| / (1 + |z|^5) over z in [-3, 3] must shrink as t
  // halves.  The t-normalized ratio sup_z |psi_t - psi_0| / (t (1 + |z|^5))
  // is only bounded: it grows toward its t -> 0 limit sup_z |f'f| / 2 /
  // (1 + |z|^5) = 312/244 on this interval, so monotonicity is asserted for
  // the difference and boundedness for the ratio.
  std::vector<double> zs(121);
  for (int i = 0; i <= 120; ++i) zs[(std::size_t)i] = -3.0 + 6.0 * i / 120;
  double prev_diff = 0.0;
  double first_ratio = 0.0, last_ratio = 0.0;
  for (int k = 0; k <= 13; ++k) {
    const double t = std::ldexp(1.0, -k);
    NonlinearityAt g(t);
    double diff = 0.0, ratio = 0.0;
    for (double z : zs) {
      const double gap = std::abs(g.psi(z) - (z - z * z * z));
      const double weight = 1.0 + std::pow(std::abs(z), 5);
      diff = std::max(diff, gap / weight);
      ratio = std::max(ratio, gap / (t * weight));
    }
    REQUIRE(ratio <= 2.0);
    if (k == 0)
      first_ratio = ratio;
    else
      REQUIRE(diff <= prev_diff);
    prev_diff = diff;
    last_ratio = ratio;
  }
  REQUIRE(last_ratio > first_ratio);
  REQUIRE_THAT(last_ratio, Catch::Matchers::WithinAbs(312.0 / 244.0, 0.01));
}

TEST_CASE("series branch agrees with extended-precision closed form") {
  struct Probe {
    double t, z;
  };
  // Spans the series region up to both exits: t crossing the switch and
  // t z^2 crossing the cap.
  const Probe probes[] = {{1e-7, 0.001}, {1e-6, 0.05},  {1e-5, 0.3},
                          {5e-5, 1.5},   {9e-5, 3.0},   {9.9e-5, 3.1},
                          {1e-6, 30.0},  {1e-5, 9.9},   {2e-5, -7.0},
                          {8e-5, -3.5},  {1e-9, -0.42}, {6e-5, 0.97}};
  for (const Probe& p : probes) {
    REQUIRE(small_time::use_series(p.t, p.z));
    const double ref_psi = (double)psi_closed_ld(p.t, p.z);
    const double ref_psi_prime = (double)psi_prime_closed_ld(p.t, p.z);
    REQUIRE_THAT(psi(p.t, p.z), Catch::Matchers::WithinRel(ref_psi, 1e-9));
    REQUIRE_THAT(psi_prime(p.t, p.z),
                 Catch::Matchers::WithinRel(ref_psi_prime, 1e-9));
  }
}

TEST_CASE("branch handoff is seamless at the switch") {
  // At each seam both production formulas are evaluated at the same point:
  // the series result against the double-precision difference quotient, whose
  // cancellation there costs at most 1/(t z^2) <= 1e3 ulps.
  const double t_seam = small_time::kSwitch * (1.0 - 1e-12);
  for (double z : {0.001, 0.3, 1.8, 3.1}) {
    REQUIRE(small_time::use_series(t_seam, z));
    NonlinearityAt g(t_seam);
    const double quotient = (g.phi(z) - z) / t_seam;
    REQUIRE_THAT(g.psi(z), Catch::Matchers::WithinRel(quotient, 1e-10));
  }
  const double t = 9e-5;
  const double z_seam = std::sqrt(small_time::kZCap / t) * (1.0 - 1e-12);
  REQUIRE(small_time::use_series(t, z_seam));
  REQUIRE_FALSE(small_time::use_series(t, z_seam * (1.0 + 1e-9)));
  NonlinearityAt g(t);
  REQUIRE_THAT(g.psi(z_seam),
               Catch::Matchers::WithinRel((g.phi(z_seam) - z_seam) / t, 1e-10));
}

TEST_CASE("large-state branch matches the direct formula at its threshold") {
  for (double t : {1e-3, 0.5, 2.0}) {
    NonlinearityAt g(t);
    for (double mag : {0.99e8, 1.01e8, 1e12}) {
      for (double z : {mag, -mag}) {
        const double ref_phi = (double)phi_closed_ld(t, z);
        REQUIRE_THAT(g.phi(z), Catch::Matchers::WithinRel(ref_phi, 1e-12));
        // phi saturates at +-1/sqrt(1 - e^{-2t}) as |z| grows.
        REQUIRE_THAT(std::abs(g.phi(z)),
                     Catch::Matchers::WithinRel(1.0 / std::sqrt(g.s), 1e-4));
      }
    }
  }
}

TEST_CASE("negative or undefined time is rejected") {
  REQUIRE_THROWS_AS(NonlinearityAt(-1e-12), std::invalid_argument);
  REQUIRE_THROWS_AS(NonlinearityAt(-3.0), std::invalid_argument);
  REQUIRE_THROWS_AS(NonlinearityAt(std::nan("")), std::invalid_argument);
  REQUIRE_THROWS_AS(phi(-0.5, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(psi(-0.5, 1.0), std::invalid_argument);
}
