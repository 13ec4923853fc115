// nft_forward.hpp - direct nonlinear Fourier transform.
#pragma once

#include "nfdm/fft.hpp"
#include "nfdm/types.hpp"
#include "nfdm/zs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace nfdm {

struct ScatteringPair {
  cplx a;
  cplx b;
  cplx evaluated_at;
};

namespace detail {

inline void require_normalized(const ComplexEnvelope& s, const char* who) {
  s.validate();
  if (!s.normalized()) throw InvalidArgument(std::string(who) + ": envelope must be normalized");
}

inline void overflow_guard(const zs::Vec2& v, const char* who) {
  const double m = std::max(std::abs(v.x), std::abs(v.y));
  if (!std::isfinite(m) || m > 1e300)
    throw NumericalError(std::string(who) +
                         ": transfer-matrix overflow; use the forward-backward evaluation "
                         "(forward_backward_amplitude / a_matched) for this lambda");
}

/// Time of cell boundary j (j = 0 .. N).
inline double boundary_time(const ComplexEnvelope& s, std::size_t j) {
  return s.t_begin() + static_cast<double>(j) * s.dt;
}

}  // namespace detail

/// One-sided transfer-matrix propagation of the left Jost solution.
inline ScatteringPair scatter(const ComplexEnvelope& s, cplx lambda) {
  detail::require_normalized(s, "scatter");
  if (lambda.imag() < 0.0) throw InvalidArgument("scatter: Im(lambda) must be >= 0");
  const double tl = s.t_begin();
  const double tr = s.t_end();
  zs::Vec2 v{std::exp(-kI * lambda * tl), 0.0};
  for (std::size_t n = 0; n < s.size(); ++n) {
    v = zs::step(s.samples[n], lambda, s.dt) * v;
    if ((n & 255u) == 0) detail::overflow_guard(v, "scatter");
  }
  detail::overflow_guard(v, "scatter");
  return {v.x * std::exp(kI * lambda * tr), v.y * std::exp(-kI * lambda * tr), lambda};
}

/// Left Jost solution phi (from the left edge) and right Jost solution psi
/// (from the right edge), with lambda-derivatives, meeting at one cell boundary.
struct MatchedSolutions {
  zs::Vec2 phi, dphi, psi, dpsi;
  std::size_t boundary = 0;

  cplx a() const { return zs::wronskian(phi, psi); }
  cplx da() const { return zs::wronskian(dphi, psi) + zs::wronskian(phi, dpsi); }
};

/// Cell boundary at which the cumulative energy reaches half of the total.
inline std::size_t energy_midpoint(const ComplexEnvelope& s) {
  double total = 0.0;
  for (const auto& v : s.samples) total += std::norm(v);
  if (total <= 0.0) return s.size() / 2;
  double acc = 0.0;
  for (std::size_t n = 0; n < s.size(); ++n) {
    acc += std::norm(s.samples[n]);
    if (acc >= 0.5 * total) return n + 1;
  }
  return s.size();
}

inline MatchedSolutions matched_solutions(const ComplexEnvelope& s, cplx lambda, std::size_t boundary) {
  detail::require_normalized(s, "matched_solutions");
  if (boundary > s.size()) throw InvalidArgument("matched_solutions: boundary out of range");
  MatchedSolutions m;
  m.boundary = boundary;
  const double tl = s.t_begin();
  const cplx el = std::exp(-kI * lambda * tl);
  m.phi = {el, 0.0};
  m.dphi = {-kI * tl * el, 0.0};
  for (std::size_t n = 0; n < boundary; ++n) {
    const auto [t, dt] = zs::step_with_derivative(s.samples[n], lambda, s.dt);
    m.dphi = t * m.dphi + dt * m.phi;
    m.phi = t * m.phi;
  }
  const double tr = s.t_end();
  const cplx er = std::exp(kI * lambda * tr);
  m.psi = {0.0, er};
  m.dpsi = {0.0, kI * tr * er};
  for (std::size_t n = s.size(); n-- > boundary;) {
    const auto [t, dt] = zs::back_step_with_derivative(s.samples[n], lambda, s.dt);
    m.dpsi = t * m.dpsi + dt * m.psi;
    m.psi = t * m.psi;
  }
  detail::overflow_guard(m.phi, "matched_solutions");
  detail::overflow_guard(m.psi, "matched_solutions");
  return m;
}

/// a(lambda) and a'(lambda) from the Wronskian at the energy midpoint.
inline std::pair<cplx, cplx> a_matched(const ComplexEnvelope& s, cplx lambda) {
  const auto m = matched_solutions(s, lambda, energy_midpoint(s));
  return {m.a(), m.da()};
}

/// q_c = b/a at each point; points with |a| < 1e-12 are reported as invalid.
inline ContinuousSpectrum continuous_spectrum(const ComplexEnvelope& s, const std::vector<double>& grid) {
  detail::require_normalized(s, "continuous_spectrum");
  ContinuousSpectrum out;
  out.grid = grid;
  out.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto sp = scatter(s, cplx{grid[i], 0.0});
    if (std::abs(sp.a) < 1e-12) {
      out.values[i] = cplx{};
      out.invalid.push_back(i);
    } else {
      out.values[i] = sp.b / sp.a;
    }
  }
  out.validate();
  return out;
}

/// q_c at arbitrary real points (no uniformity requirement).
inline cvec continuous_at(const ComplexEnvelope& s, const std::vector<double>& lambdas) {
  cvec out(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const auto sp = scatter(s, cplx{lambdas[i], 0.0});
    out[i] = std::abs(sp.a) < 1e-12 ? cplx{} : sp.b / sp.a;
  }
  return out;
}

struct EigenSearchOptions {
  int max_iterations = 50;
  double a_tol = 1e-8;
  double step_tol = 1e-10;
  double dedup_radius = 1e-4;
  /// Stop after this many distinct roots (0: try every seed).
  std::size_t max_roots = 0;
  /// Try seeds in order of increasing |a(seed)|.
  bool rank_seeds = false;
};

struct EigenSearchResult {
  std::vector<cplx> roots;
  /// Seeds whose Newton iteration did not converge or left the upper half plane.
  std::vector<cplx> failed_seeds;
};

/// Seeded Newton search for zeros of a(lambda) in the upper half plane.
inline EigenSearchResult find_eigenvalues(const ComplexEnvelope& s, const std::vector<cplx>& seeds,
                                          const EigenSearchOptions& opt = {}) {
  detail::require_normalized(s, "find_eigenvalues");
  EigenSearchResult out;
  const std::size_t mid = energy_midpoint(s);
  for (const cplx seed : seeds)
    if (!(seed.imag() > 0.0)) throw InvalidArgument("find_eigenvalues: seeds must lie in the upper half plane");
  std::vector<cplx> order = seeds;
  if (opt.rank_seeds) {
    std::vector<std::pair<double, cplx>> ranked;
    for (const cplx seed : seeds) ranked.emplace_back(std::abs(matched_solutions(s, seed, mid).a()), seed);
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (std::size_t i = 0; i < ranked.size(); ++i) order[i] = ranked[i].second;
  }
  for (const cplx seed : order) {
    if (opt.max_roots > 0 && out.roots.size() >= opt.max_roots) break;
    cplx lam = seed;
    bool ok = false;
    for (int it = 0; it < opt.max_iterations; ++it) {
      const auto m = matched_solutions(s, lam, mid);
      const cplx a = m.a();
      const cplx da = m.da();
      if (da == cplx{} || !std::isfinite(std::abs(da))) break;
      const cplx delta = -a / da;
      lam += delta;
      if (!(lam.imag() > 0.0) || !std::isfinite(std::abs(lam))) break;
      const double ad = std::abs(delta);
      if ((ad < opt.step_tol && std::abs(a) < opt.a_tol) || ad < 1e-13 * std::max(1.0, std::abs(lam))) {
        // Confirm the residual at the updated point.
        const auto chk = matched_solutions(s, lam, mid);
        ok = std::abs(chk.a()) < opt.a_tol;
        break;
      }
    }
    if (!ok) {
      out.failed_seeds.push_back(seed);
      continue;
    }
    const bool dup = std::any_of(out.roots.begin(), out.roots.end(),
                                 [&](cplx r) { return std::abs(r - lam) < opt.dedup_radius; });
    if (!dup) out.roots.push_back(lam);
  }
  return out;
}

struct AmplitudeEstimate {
  cplx amplitude;
  /// |phi - b psi| / |phi| at the matching boundary.
  double residual = 0.0;
  bool low_confidence = false;
};

/// q_d(lambda_k) = b / a' with b read off by matching the forward-propagated
/// left solution against the backward-propagated right solution at the
/// energy midpoint.
inline AmplitudeEstimate forward_backward_amplitude(const ComplexEnvelope& s, cplx lambda_k) {
  detail::require_normalized(s, "forward_backward_amplitude");
  const auto m = matched_solutions(s, lambda_k, energy_midpoint(s));
  const double pp = std::norm(m.psi.x) + std::norm(m.psi.y);
  if (pp == 0.0) throw NumericalError("forward_backward_amplitude: degenerate right solution");
  const cplx b = (std::conj(m.psi.x) * m.phi.x + std::conj(m.psi.y) * m.phi.y) / pp;
  const zs::Vec2 r = m.phi - b * m.psi;
  const double nphi = std::sqrt(std::norm(m.phi.x) + std::norm(m.phi.y));
  AmplitudeEstimate out;
  out.residual = std::sqrt(std::norm(r.x) + std::norm(r.y)) / nphi;
  out.amplitude = b / m.da();
  out.low_confidence = out.residual > 1e-3;
  return out;
}

/// 1024-point grid on [-64, 64]; covers the 64 subcarrier samples at
/// lambda = -m pi / 2 (|lambda| <= 50.3) with margin.
inline std::vector<double> default_lambda_grid() { return uniform_grid(-64.0, 64.0, 1024); }

inline NonlinearSpectrum full_nft(const ComplexEnvelope& s, const std::vector<cplx>& seeds,
                                  const std::vector<double>& grid = default_lambda_grid()) {
  NonlinearSpectrum out;
  out.continuous = continuous_spectrum(s, grid);
  const auto found = find_eigenvalues(s, seeds);
  std::vector<DiscretePoint> pts;
  for (const cplx lam : found.roots) pts.push_back({lam, forward_backward_amplitude(s, lam).amplitude});
  out.discrete = DiscreteSpectrum(std::move(pts));
  return out;
}

/// Band-limited oversampling of a normalized envelope (same t0, dt / factor).
inline ComplexEnvelope oversampled(const ComplexEnvelope& s, std::size_t factor) {
  if (factor <= 1) return s;
  return ComplexEnvelope(fft::upsample(s.samples, factor), s.dt / static_cast<double>(factor), s.t0, s.units);
}

}  // namespace nfdm
