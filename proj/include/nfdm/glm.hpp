// glm.hpp - Gelfand-Levitan-Marchenko inversion for the dispersive spectrum.
//
// With F(x) = (1/2pi) int q_c(lambda) exp(i lambda x) dlambda and the right
// Jost kernel K(x, s), s >= x, the GLM equations read (y > x)
//   conj K2(x,y) + int_x K1(x,s) F(s+y) ds = 0
//  -conj K1(x,y) + F(x+y) + int_x K2(x,s) F(s+y) ds = 0
// and q(x) = -2 K1(x,x). For a potential supported on (-inf, X] the
// unknowns live on [x, 2X-x]; recentring on X and pairing
// (K1(s_j), conj K2(s_{n-j})) turns the trapezoidal discretization into a
// 2x2-block Toeplitz system that a block Levinson recursion solves for all
// x = X - n dt in O(N^2) total.
#pragma once

#include "nfdm/types.hpp"
#include "nfdm/zs.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <algorithm>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace nfdm {

namespace glm_detail {

using zs::Mat2;

/// B_d * M where B_d = [[0, -D conj R(d)], [D R(-d), 0]] for d != 0.
inline Mat2 offdiag_times(cplx upper, cplx lower, const Mat2& m) {
  return {upper * m.c, upper * m.d, lower * m.a, lower * m.b};
}

}  // namespace glm_detail

/// Solves the discretized GLM system for a kernel sampled as
/// R[k + N - 1] = F(2X + 2 k dt), k = -(N-1) .. N-1.
/// Returns q at x = X - n dt for n = 0 .. N-1 (right to left).
///
/// The block matrix satisfies M^H = J M J and E M E = P M^T P (J = diag(1,-1),
/// P = swap, E = block reversal), so the last block column of the inverse is
/// G[j] = sym(F[n-j]) and only F is carried through the recursion.
inline cvec glm_solve(const cvec& R, std::size_t n_out, double dt, double pivot_tol = 1e-12) {
  using glm_detail::Mat2;
  if (n_out == 0) return {};
  if (R.size() != 2 * n_out - 1) throw InvalidArgument("glm_solve: kernel length must be 2N-1");
  const double delta = 2.0 * dt;
  const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(n_out) - 1;
  // up[d + off] = -D conj R(d), lo[d + off] = D R(-d)
  cvec up(R.size()), lo(R.size());
  for (std::ptrdiff_t d = -off; d <= off; ++d) {
    up[static_cast<std::size_t>(d + off)] = -delta * std::conj(R[static_cast<std::size_t>(d + off)]);
    lo[static_cast<std::size_t>(d + off)] = delta * R[static_cast<std::size_t>(-d + off)];
  }
  auto sym = [](const Mat2& f) { return Mat2{std::conj(f.d), -std::conj(f.c), -std::conj(f.b), std::conj(f.a)}; };

  cvec q(n_out);
  q[0] = -2.0 * std::conj(R[static_cast<std::size_t>(off)]);
  std::vector<Mat2> F{Mat2::identity()};
  F.reserve(n_out);

  for (std::size_t n = 0; n + 1 < n_out; ++n) {
    Mat2 ef{}, eg{};
    for (std::size_t j = 0; j <= n; ++j) {
      const auto df = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(n + 1 - j) + off);
      const auto dg = static_cast<std::size_t>(-1 - static_cast<std::ptrdiff_t>(j) + off);
      ef = ef + glm_detail::offdiag_times(up[df], lo[df], F[j]);
      eg = eg + glm_detail::offdiag_times(up[dg], lo[dg], sym(F[n - j]));
    }
    const Mat2 pa = Mat2::identity() - eg * ef;
    if (std::abs(pa.det()) < pivot_tol)
      throw NumericalError("glm_solve: Levinson pivot below " + std::to_string(pivot_tol) + " at step " +
                           std::to_string(n + 1) +
                           "; refine dt, widen the time window or lower the spectral amplitude");
    const Mat2 alpha = pa.inverse();
    const Mat2 beta = (ef * alpha) * cplx{-1.0};

    // F_new[j] = F[j] alpha + sym(F[n+1-j]) beta, updated in mirrored pairs.
    F.push_back(Mat2{});
    const std::size_t top = n + 1;
    for (std::size_t j = 0, k = top; j <= k; ++j, --k) {
      const Mat2 fj = F[j], fk = F[k];
      const Mat2 nj = fj * alpha + (j >= 1 ? sym(fk) * beta : Mat2{});
      if (j != k) F[k] = fk * alpha + sym(fj) * beta;
      F[j] = nj;
      if (k == 0) break;
    }

    // Trapezoidal end weights as a rank-4 correction of the rectangle rule.
    const std::size_t m = top;
    Eigen::Matrix4cd g4;
    const Mat2 blocks[2][2] = {{F[0], sym(F[m])}, {F[m], sym(F[0])}};
    for (int br = 0; br < 2; ++br)
      for (int bc = 0; bc < 2; ++bc) {
        const Mat2& b = blocks[br][bc];
        g4(2 * br, 2 * bc) = b.a;
        g4(2 * br, 2 * bc + 1) = b.b;
        g4(2 * br + 1, 2 * bc) = b.c;
        g4(2 * br + 1, 2 * bc + 1) = b.d;
      }
    const Eigen::Vector4cd y = (Eigen::Matrix4cd::Identity() + g4).partialPivLu().solve(g4.col(3));
    Eigen::RowVector4cd e0 = Eigen::RowVector4cd::Zero();
    e0(0) = 1.0;
    const cplx x = g4(0, 3) + ((e0 - g4.row(0)) * y)(0);
    q[m] = -(4.0 / delta) * x;
  }
  return q;
}

/// GLM kernel F(x) from a sampled continuous spectrum (trapezoidal quadrature).
inline cplx glm_kernel(const ContinuousSpectrum& s, double x) {
  if (s.size() < 2) return cplx{};
  const double h = s.step();
  cplx acc{};
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double w = (i == 0 || i + 1 == s.size()) ? 0.5 : 1.0;
    acc += w * s.values[i] * std::exp(kI * (s.grid[i] * x));
  }
  return acc * h / (2.0 * kPi);
}

/// Time grid used by the synthesizers: cells of width dt tiling [t_start, t_end].
struct TimeWindow {
  double t_start = -5.0;
  double t_end = 5.0;

  std::size_t cells(double dt) const {
    if (!(t_end > t_start) || !(dt > 0.0)) throw InvalidArgument("TimeWindow: need t_end > t_start and dt > 0");
    const double n = std::round((t_end - t_start) / dt);
    if (n < 2) throw InvalidArgument("TimeWindow: fewer than two samples");
    return static_cast<std::size_t>(n);
  }
};

/// GLM synthesis for an arbitrary kernel F(x). When F vanishes for
/// x > support_right the potential vanishes for t > support_right / 2 and
/// the recursion is started there.
inline ComplexEnvelope glm_synthesize_kernel(const std::function<cplx(double)>& kernel, const TimeWindow& w,
                                             double dt,
                                             double support_right = std::numeric_limits<double>::infinity()) {
  const std::size_t n = w.cells(dt);
  const double t0 = w.t_start + 0.5 * dt;
  std::size_t active = n;
  if (std::isfinite(support_right)) {
    const double last = std::floor((0.5 * support_right - t0) / dt) + 2.0;
    active = static_cast<std::size_t>(std::clamp(last, 0.0, static_cast<double>(n)));
  }
  cvec out(n, cplx{});
  if (active == 0) return ComplexEnvelope(std::move(out), dt, t0, UnitSystem::normalized);
  const double x_right = t0 + static_cast<double>(active - 1) * dt;
  cvec R(2 * active - 1);
  bool all_zero = true;
  for (std::size_t i = 0; i < R.size(); ++i) {
    const double k = static_cast<double>(i) - static_cast<double>(active - 1);
    R[i] = kernel(2.0 * x_right + 2.0 * k * dt);
    if (R[i] != cplx{}) all_zero = false;
  }
  if (!all_zero) {
    const cvec rl = glm_solve(R, active, dt);
    for (std::size_t m = 0; m < active; ++m) out[active - 1 - m] = rl[m];
  }
  return ComplexEnvelope(std::move(out), dt, t0, UnitSystem::normalized);
}

/// GLM synthesis from a sampled continuous spectrum. The spectrum must have
/// decayed below 1e-6 at both grid ends.
inline ComplexEnvelope glm_synthesize(const ContinuousSpectrum& target, const TimeWindow& w, double dt) {
  target.validate();
  if (target.size() >= 2 && (std::abs(target.values.front()) > 1e-6 || std::abs(target.values.back()) > 1e-6))
    throw InvalidArgument("glm_synthesize: spectrum tails have not decayed below 1e-6 at the grid ends");
  return glm_synthesize_kernel([&](double x) { return glm_kernel(target, x); }, w, dt);
}

/// Closed-form kernel of the sinc-comb spectrum
///   q_c(lambda) = A sum_k C_k sinc(T_c lambda / pi + k)
/// optionally multiplied by the Blaschke product prod (lambda - l_j)/(lambda - conj l_j).
/// The sinc comb transforms to (A / 2T_c) sum C_k exp(-i k pi x / T_c) on
/// |x| < T_c; each partial fraction r/(lambda - mu) of the Blaschke product
/// convolves it with -i exp(i mu x) on x < 0.
class SincCombKernel {
 public:
  SincCombKernel(double amplitude, double t_c, std::vector<int> indices, cvec symbols,
                 std::vector<cplx> eigenvalues = {})
      : amp_(amplitude), tc_(t_c), idx_(std::move(indices)), sym_(std::move(symbols)) {
    if (!(t_c > 0.0)) throw InvalidArgument("SincCombKernel: T_c must be positive");
    if (idx_.size() != sym_.size()) throw InvalidArgument("SincCombKernel: index/symbol length mismatch");
    for (cplx l : eigenvalues)
      if (!(l.imag() > 0.0)) throw InvalidArgument("SincCombKernel: eigenvalues must lie in the upper half plane");
    // Partial fractions of B(lambda) = 1 + sum r_j / (lambda - mu_j), mu_j = conj(l_j).
    for (std::size_t j = 0; j < eigenvalues.size(); ++j) {
      const cplx mu = std::conj(eigenvalues[j]);
      cplx num = 1.0, den = 1.0;
      for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
        num *= mu - eigenvalues[i];
        if (i != j) den *= mu - std::conj(eigenvalues[i]);
      }
      mu_.push_back(mu);
      res_.push_back(num / den);
    }
  }

  /// Spectrum value at real lambda (before or after the Blaschke factor).
  cplx spectrum(double lambda, bool with_blaschke = true) const {
    cplx acc{};
    for (std::size_t i = 0; i < idx_.size(); ++i) acc += sym_[i] * sinc(tc_ * lambda / kPi + idx_[i]);
    acc *= amp_;
    if (with_blaschke)
      for (std::size_t j = 0; j < mu_.size(); ++j) acc *= (lambda - std::conj(mu_[j])) / (lambda - mu_[j]);
    return acc;
  }

  cplx operator()(double x) const {
    const double scale = amp_ / (2.0 * tc_);
    cplx acc{};
    if (std::abs(x) < tc_)
      for (std::size_t i = 0; i < idx_.size(); ++i) acc += sym_[i] * std::exp(-kI * (idx_[i] * kPi * x / tc_));
    acc *= scale;
    if (x >= tc_) return acc;
    const double lo = std::max(x, -tc_);
    for (std::size_t j = 0; j < mu_.size(); ++j) {
      const cplx mu = mu_[j];
      cplx conv{};
      for (std::size_t i = 0; i < idx_.size(); ++i) {
        const double kap = idx_[i] * kPi / tc_;
        const cplx nu = kap + mu;
        // exp(i mu x) (exp(-i nu lo) - exp(-i nu T)) / (i nu), exponents combined.
        const cplx e1 = std::exp(kI * mu * (x - lo) - kI * kap * lo);
        const cplx e2 = std::exp(kI * mu * (x - tc_) - kI * kap * tc_);
        conv += sym_[i] * (e1 - e2) / (kI * nu);
      }
      acc += res_[j] * (-kI) * scale * conv;
    }
    return acc;
  }

  /// F(x) = 0 for x >= T_c.
  double support_right() const { return tc_; }

  static double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
  }

 private:
  double amp_, tc_;
  std::vector<int> idx_;
  cvec sym_;
  std::vector<cplx> mu_, res_;
};

}  // namespace nfdm
