#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace acsplit {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).  Stateless:
// each (128-bit counter, 64-bit key) pair maps to four 32-bit words, so any
// draw in a run is addressable by integer indices and can be produced in any
// order on any thread with identical results.
struct Philox4x32 {
  static constexpr std::uint32_t kMulHi = 0xD2511F53u;
  static constexpr std::uint32_t kMulLo = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::uint32_t key0,
                                            std::uint32_t key1) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key0 += kWeyl0;
        key1 += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t(kMulHi) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(kMulLo) * ctr[2];
      ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key0, std::uint32_t(p1),
             std::uint32_t(p0 >> 32) ^ ctr[3] ^ key1, std::uint32_t(p0)};
    }
    return ctr;
  }
};

// One counter block yields one Box-Muller pair.  The first uniform lives in
// (0,1] so the logarithm is finite; both uniforms carry 53 mantissa bits.
inline void gaussian_pair_from_block(const std::array<std::uint32_t, 4>& w,
                                     double& g0, double& g1) {
  const std::uint64_t a = (std::uint64_t(w[0]) << 32) | w[1];
  const std::uint64_t b = (std::uint64_t(w[2]) << 32) | w[3];
  const double u = double((a >> 11) + 1) * 0x1.0p-53;
  const double v = double(b >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u));
  const double angle = 6.283185307179586476925286766559 * v;
  g0 = r * std::cos(angle);
  g1 = r * std::sin(angle);
}

}  // namespace acsplit
