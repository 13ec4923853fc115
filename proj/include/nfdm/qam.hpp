// qam.hpp - Gray-mapped 16-QAM and QPSK.
#pragma once

#include "nfdm/types.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace nfdm {

using Bits = std::vector<std::uint8_t>;

/// 16-QAM with unit average energy. Each axis carries two Gray bits:
/// 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3 (scaled by 1/sqrt(10)).
struct Qam16 {
  static constexpr int bits_per_symbol = 4;
  static double scale() { return 1.0 / std::sqrt(10.0); }

  static double level(std::uint8_t b0, std::uint8_t b1) {
    static constexpr double table[2][2] = {{-3.0, -1.0}, {3.0, 1.0}};
    return table[b0 & 1u][b1 & 1u];
  }

  /// Maps bits[offset .. offset+3] (I pair then Q pair).
  static cplx map(const Bits& bits, std::size_t offset) {
    if (offset + 4 > bits.size()) throw InvalidArgument("Qam16::map: not enough bits");
    return cplx{level(bits[offset], bits[offset + 1]), level(bits[offset + 2], bits[offset + 3])} * scale();
  }

  static std::array<std::uint8_t, 2> axis_bits(double v) {
    const double x = v / scale();
    if (x < -2.0) return {0, 0};
    if (x < 0.0) return {0, 1};
    if (x < 2.0) return {1, 1};
    return {1, 0};
  }

  static void slice(cplx y, Bits& out) {
    const auto i = axis_bits(y.real());
    const auto q = axis_bits(y.imag());
    out.insert(out.end(), {i[0], i[1], q[0], q[1]});
  }

  static cplx nearest(cplx y) {
    Bits b;
    slice(y, b);
    return map(b, 0);
  }
};

/// Gray QPSK on the phase: (0,0) -> 0, (1,0) -> pi/2, (0,1) -> -pi/2, (1,1) -> pi.
struct Qpsk {
  static double phase(std::uint8_t b0, std::uint8_t b1) {
    if (!b0 && !b1) return 0.0;
    if (b0 && !b1) return kPi / 2.0;
    if (!b0 && b1) return -kPi / 2.0;
    return kPi;
  }

  static std::array<std::uint8_t, 2> slice(double phi) {
    const double p = std::remainder(phi, 2.0 * kPi);  // (-pi, pi]
    if (std::abs(p) <= kPi / 4.0) return {0, 0};
    if (p > kPi / 4.0 && p <= 3.0 * kPi / 4.0) return {1, 0};
    if (p < -kPi / 4.0 && p >= -3.0 * kPi / 4.0) return {0, 1};
    return {1, 1};
  }
};

/// Gray code of an index with the given number of bits, MSB first.
inline void gray_bits(unsigned index, int nbits, Bits& out) {
  const unsigned g = index ^ (index >> 1);
  for (int b = nbits - 1; b >= 0; --b) out.push_back(static_cast<std::uint8_t>((g >> b) & 1u));
}

inline unsigned gray_index(const Bits& bits, std::size_t offset, int nbits) {
  unsigned g = 0;
  for (int b = 0; b < nbits; ++b) g = (g << 1) | (bits.at(offset + static_cast<std::size_t>(b)) & 1u);
  unsigned v = g;
  for (unsigned s = 1; s < 32; s <<= 1) v ^= v >> s;
  return v;
}

}  // namespace nfdm
