// nft_inverse.hpp - inverse NFT: Blaschke prefilter, GLM, Darboux dressing.
#pragma once

#include "nfdm/core.hpp"
#include "nfdm/glm.hpp"
#include "nfdm/nft_forward.hpp"
#include "nfdm/types.hpp"
#include "nfdm/zs.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace nfdm {

/// prod_k (lambda - lambda_k) / (lambda - conj lambda_k); unimodular on the real axis.
inline cplx blaschke(double lambda, const std::vector<cplx>& eigenvalues) {
  cplx p = 1.0;
  for (cplx l : eigenvalues) p *= (lambda - l) / (lambda - std::conj(l));
  return p;
}

/// Divides out the factor that the Darboux additions of `eigenvalues` will
/// multiply into the continuous spectrum.
inline ContinuousSpectrum prefilter_continuous(const ContinuousSpectrum& target, const std::vector<cplx>& eigenvalues) {
  for (cplx l : eigenvalues)
    if (!(l.imag() > 0.0)) throw InvalidArgument("prefilter_continuous: eigenvalues must lie in the upper half plane");
  ContinuousSpectrum out = target;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= blaschke(out.grid[i], eigenvalues);
  return out;
}

namespace inverse_detail {

inline void normalize_in_place(zs::Vec2& v) {
  const double m = std::max(std::abs(v.x), std::abs(v.y));
  if (m > 0.0 && std::isfinite(m)) {
    v.x /= m;
    v.y /= m;
  }
}

}  // namespace inverse_detail

/// Adds eigenvalues with prescribed spectral amplitudes to `seed`.
///
/// For each eigenvalue zeta_k the auxiliary solution
///   phi_k = phi^L(zeta_k) + beta_k psi(zeta_k),  beta_k = -q_d a(zeta_k) / (zeta_k - conj zeta_k)
/// of the seed is dressed by the earlier additions, then
///   q <- q - 2i (zeta - conj zeta) phi_1 conj(phi_2) / |phi|^2.
/// Each addition multiplies a(lambda) by (lambda - zeta)/(lambda - conj zeta)
/// and leaves b unchanged, so the amplitudes of earlier additions are
/// pre-compensated and the final spectrum is independent of the order.
inline ComplexEnvelope darboux_add(const ComplexEnvelope& seed, const std::vector<DiscretePoint>& additions) {
  detail::require_normalized(seed, "darboux_add");
  const DiscreteSpectrum checked(additions);
  const std::size_t K = additions.size();
  if (K == 0) return seed;
  const std::size_t N = seed.size();
  const double h = seed.dt;
  const std::size_t mid = energy_midpoint(seed);

  std::vector<std::vector<zs::Vec2>> aux(K, std::vector<zs::Vec2>(N));
  for (std::size_t k = 0; k < K; ++k) {
    const cplx z = additions[k].lambda;
    const auto m = matched_solutions(seed, z, mid);
    const cplx a0 = m.a();
    const cplx da0 = m.da();
    if (da0 != cplx{} && std::abs(a0 / da0) < 1e-3)
      throw NumericalError("darboux_add: seed has an eigenvalue within 1e-3 of the added eigenvalue");
    if (std::abs(a0) < 1e-14) throw NumericalError("darboux_add: seed has an eigenvalue at the added eigenvalue");

    cplx a_prev = a0;
    for (std::size_t j = 0; j < k; ++j) {
      const cplx zj = additions[j].lambda;
      a_prev *= (z - zj) / (z - std::conj(zj));
    }
    cplx target = additions[k].amplitude;
    for (std::size_t j = k + 1; j < K; ++j) {
      const cplx zj = additions[j].lambda;
      target *= (z - zj) / (z - std::conj(zj));
    }
    const cplx beta = -target * a_prev / (z - std::conj(z));

    // Left solution at cell midpoints, forward from the left edge.
    std::vector<zs::Vec2> phi(N);
    zs::Vec2 v{std::exp(-kI * z * seed.t_begin()), 0.0};
    for (std::size_t n = 0; n < N; ++n) {
      phi[n] = zs::step(seed.samples[n], z, 0.5 * h) * v;
      v = zs::step(seed.samples[n], z, h) * v;
    }
    // Right solution at cell midpoints, backward from the right edge.
    zs::Vec2 w{0.0, std::exp(kI * z * seed.t_end())};
    for (std::size_t n = N; n-- > 0;) {
      const zs::Vec2 p = zs::back_step(seed.samples[n], z, 0.5 * h) * w;
      aux[k][n] = phi[n] + beta * p;
      if (!std::isfinite(std::abs(aux[k][n].x)) || !std::isfinite(std::abs(aux[k][n].y)))
        throw NumericalError("darboux_add: auxiliary solution overflow; shorten the time window");
      inverse_detail::normalize_in_place(aux[k][n]);
      w = zs::back_step(seed.samples[n], z, h) * w;
    }
  }

  cvec q = seed.samples;
  for (std::size_t k = 0; k < K; ++k) {
    const cplx z = additions[k].lambda;
    const cplx zz = z - std::conj(z);
    for (std::size_t n = 0; n < N; ++n) {
      const zs::Vec2 f = aux[k][n];
      const double den = std::norm(f.x) + std::norm(f.y);
      if (den == 0.0) throw NumericalError("darboux_add: degenerate auxiliary solution");
      q[n] += -2.0 * kI * zz * f.x * std::conj(f.y) / den;
      for (std::size_t m = k + 1; m < K; ++m) {
        const cplx zm = additions[m].lambda;
        zs::Vec2& g = aux[m][n];
        // D(zm) g = (zm - conj z) g - (z - conj z) f (f^H g) / |f|^2
        const cplx proj = (std::conj(f.x) * g.x + std::conj(f.y) * g.y) / den;
        g = zs::Vec2{(zm - std::conj(z)) * g.x - zz * f.x * proj, (zm - std::conj(z)) * g.y - zz * f.y * proj};
        inverse_detail::normalize_in_place(g);
      }
    }
  }
  return ComplexEnvelope(std::move(q), seed.dt, seed.t0, UnitSystem::normalized);
}

struct SynthesisOptions {
  /// Internal oversampling of the GLM and Darboux stages; must be odd so the
  /// fine cells tile the output cells and share their midpoints.
  std::size_t oversample = 1;
  /// Return the internal (oversampled) grid instead of decimating to dt.
  bool keep_oversampled = false;
  /// Extra time computed on each side of the window to measure clamped tails.
  double margin = 1.0;
};

struct Synthesis {
  ComplexEnvelope signal;
  /// Energy clamped outside the window, relative to the total.
  double leaked_energy_fraction = 0.0;
};

/// GLM for the dispersive part followed by Darboux additions of the
/// discrete part. `kernel` is the GLM kernel of the already prefiltered
/// continuous spectrum (empty function for none).
inline Synthesis synthesize_with_kernel(const std::function<cplx(double)>& kernel, const DiscreteSpectrum& discrete,
                                        const TimeWindow& window, double dt, const SynthesisOptions& opt = {},
                                        double kernel_support_right = std::numeric_limits<double>::infinity()) {
  discrete.validate();
  const std::size_t n = window.cells(dt);
  const std::size_t u = std::max<std::size_t>(1, opt.oversample);
  if (u % 2 == 0) throw InvalidArgument("synthesize: oversample factor must be odd");
  if (opt.margin < 0.0) throw InvalidArgument("synthesize: margin must be >= 0");
  const auto pad = static_cast<std::size_t>(std::ceil(opt.margin / dt - 1e-9));
  const double dtf = dt / static_cast<double>(u);
  const std::size_t nf = (n + 2 * pad) * u;
  const double start = window.t_start - static_cast<double>(pad) * dt;
  const double t0f = start + 0.5 * dtf;

  ComplexEnvelope q = ComplexEnvelope::zeros(nf, dtf, t0f);
  if (kernel) q = glm_synthesize_kernel(kernel, TimeWindow{start, start + static_cast<double>(nf) * dtf}, dtf,
                                     kernel_support_right);
  if (!discrete.empty()) q = darboux_add(q, discrete.points);

  const std::size_t first = pad * u;
  double e_all = 0.0, e_in = 0.0;
  for (std::size_t m = 0; m < nf; ++m) e_all += std::norm(q.samples[m]);
  for (std::size_t m = first; m < first + n * u; ++m) e_in += std::norm(q.samples[m]);

  Synthesis s;
  if (opt.keep_oversampled) {
    cvec out(q.samples.begin() + static_cast<std::ptrdiff_t>(first),
             q.samples.begin() + static_cast<std::ptrdiff_t>(first + n * u));
    s.signal = ComplexEnvelope(std::move(out), dtf, window.t_start + 0.5 * dtf, UnitSystem::normalized);
  } else {
    cvec out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = q.samples[first + i * u + (u - 1) / 2];
    s.signal = ComplexEnvelope(std::move(out), dt, window.t_start + 0.5 * dt, UnitSystem::normalized);
  }
  s.leaked_energy_fraction = e_all > 0.0 ? std::max(0.0, (e_all - e_in) / e_all) : 0.0;
  return s;
}

/// Full multiplexing pipeline: prefilter, GLM, Darboux.
inline Synthesis synthesize(const NonlinearSpectrum& spec, const TimeWindow& window, double dt,
                            const SynthesisOptions& opt = {}) {
  spec.continuous.validate();
  spec.discrete.validate();
  std::function<cplx(double)> kernel;
  ContinuousSpectrum pre;
  const bool has_continuous = std::any_of(spec.continuous.values.begin(), spec.continuous.values.end(),
                                          [](cplx v) { return v != cplx{}; });
  if (has_continuous) {
    pre = prefilter_continuous(spec.continuous, spec.discrete.eigenvalues());
    if (std::abs(pre.values.front()) > 1e-6 || std::abs(pre.values.back()) > 1e-6)
      throw InvalidArgument("synthesize: continuous spectrum tails have not decayed below 1e-6");
    kernel = [&pre](double x) { return glm_kernel(pre, x); };
  }
  return synthesize_with_kernel(kernel, spec.discrete, window, dt, opt);
}

}  // namespace nfdm
