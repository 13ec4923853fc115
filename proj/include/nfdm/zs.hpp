// zs.hpp - Zakharov-Shabat transfer matrices for a piecewise-constant potential.
//
// Each sample is held constant over its cell, so one step is the exact
// exponential exp(M h) with M = [[-i lambda, q], [-conj q, i lambda]]:
//   exp(M h) = cos(k h) I + sin(k h)/k M,   k^2 = lambda^2 + |q|^2.
#pragma once

#include "nfdm/types.hpp"

#include <array>
#include <cmath>

namespace nfdm::zs {

struct Vec2 {
  cplx x{}, y{};
};

struct Mat2 {
  cplx a{}, b{}, c{}, d{};  // [[a, b], [c, d]]

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  Vec2 operator*(const Vec2& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
  Mat2 operator*(const Mat2& m) const {
    return {a * m.a + b * m.c, a * m.b + b * m.d, c * m.a + d * m.c, c * m.b + d * m.d};
  }
  Mat2 operator+(const Mat2& m) const { return {a + m.a, b + m.b, c + m.c, d + m.d}; }
  Mat2 operator-(const Mat2& m) const { return {a - m.a, b - m.b, c - m.c, d - m.d}; }
  Mat2 operator*(cplx s) const { return {a * s, b * s, c * s, d * s}; }
  cplx det() const { return a * d - b * c; }
  Mat2 inverse() const {
    const cplx dt = det();
    return {d / dt, -b / dt, -c / dt, a / dt};
  }
};

inline Vec2 operator+(const Vec2& u, const Vec2& v) { return {u.x + v.x, u.y + v.y}; }
inline Vec2 operator-(const Vec2& u, const Vec2& v) { return {u.x - v.x, u.y - v.y}; }
inline Vec2 operator*(cplx s, const Vec2& v) { return {s * v.x, s * v.y}; }

/// u1 v2 - u2 v1; constant in t for two solutions at the same lambda.
inline cplx wronskian(const Vec2& u, const Vec2& v) { return u.x * v.y - u.y * v.x; }

struct StepCoeffs {
  cplx c;   // cos(k h)
  cplx s;   // sin(k h) / k
  cplx dc;  // d c / d lambda
  cplx ds;  // d s / d lambda
};

inline StepCoeffs coeffs(cplx q, cplx lambda, double h, bool with_derivative) {
  const cplx k2 = lambda * lambda + std::norm(q);
  const cplx k = std::sqrt(k2);
  const cplx kh = k * h;
  StepCoeffs out;
  if (std::abs(kh) < 1e-4) {
    const cplx x2 = kh * kh;
    out.c = 1.0 - x2 / 2.0 + x2 * x2 / 24.0;
    out.s = h * (1.0 - x2 / 6.0 + x2 * x2 / 120.0);
    if (with_derivative) {
      // (h c - s) / k^2 -> -h^3/3 + k^2 h^5 / 30
      const cplx g = -h * h * h / 3.0 + k2 * h * h * h * h * h / 30.0;
      out.dc = -h * lambda * out.s;
      out.ds = lambda * g;
    }
  } else {
    out.c = std::cos(kh);
    out.s = std::sin(kh) / k;
    if (with_derivative) {
      out.dc = -h * lambda * out.s;
      out.ds = lambda * (h * out.c - out.s) / k2;
    }
  }
  return out;
}

/// exp(M h) for a constant potential sample q.
inline Mat2 step(cplx q, cplx lambda, double h) {
  const auto k = coeffs(q, lambda, h, false);
  const cplx il = kI * lambda;
  return {k.c - k.s * il, k.s * q, -k.s * std::conj(q), k.c + k.s * il};
}

/// exp(M h) and its lambda-derivative.
inline std::pair<Mat2, Mat2> step_with_derivative(cplx q, cplx lambda, double h) {
  const auto k = coeffs(q, lambda, h, true);
  const cplx il = kI * lambda;
  Mat2 t{k.c - k.s * il, k.s * q, -k.s * std::conj(q), k.c + k.s * il};
  Mat2 dt{k.dc - k.ds * il - k.s * kI, k.ds * q, -k.ds * std::conj(q), k.dc + k.ds * il + k.s * kI};
  return {t, dt};
}

/// exp(-M h) and its lambda-derivative (backward step).
inline std::pair<Mat2, Mat2> back_step_with_derivative(cplx q, cplx lambda, double h) {
  const auto k = coeffs(q, lambda, h, true);
  const cplx il = kI * lambda;
  Mat2 t{k.c + k.s * il, -k.s * q, k.s * std::conj(q), k.c - k.s * il};
  Mat2 dt{k.dc + k.ds * il + k.s * kI, -k.ds * q, k.ds * std::conj(q), k.dc - k.ds * il - k.s * kI};
  return {t, dt};
}

inline Mat2 back_step(cplx q, cplx lambda, double h) {
  const auto k = coeffs(q, lambda, h, false);
  const cplx il = kI * lambda;
  return {k.c + k.s * il, -k.s * q, k.s * std::conj(q), k.c - k.s * il};
}

}  // namespace nfdm::zs
