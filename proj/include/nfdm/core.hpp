// core.hpp - unit normalization and energy accounting.
#pragma once

#include "nfdm/types.hpp"

#include <cmath>

namespace nfdm {

/// Fiber parameters that fix the scale of the dimensionless NLSE.
///
/// With t = T/T0, z = Z/L and q = conj(A)/sqrt(P) the physical equation
///   dA/dZ = -i beta2/2 A_TT + i gamma |A|^2 A
/// becomes i q_z = q_tt + 2|q|^2 q when
///   L = 2 T0^2 / |beta2|   and   P = |beta2| / (gamma T0^2).
/// The conjugation keeps forward propagation at positive normalized distance.
struct NormalizationMap {
  double beta2_ps2_per_km = -21.3;
  double gamma_per_w_km = 1.3;
  double t0_ns = 1.0;

  NormalizationMap() = default;
  NormalizationMap(double beta2, double gamma, double t0) : beta2_ps2_per_km(beta2), gamma_per_w_km(gamma), t0_ns(t0) {
    validate();
  }

  void validate() const {
    if (!(beta2_ps2_per_km < 0.0)) throw InvalidArgument("NormalizationMap: beta2 must be negative");
    if (!(gamma_per_w_km > 0.0)) throw InvalidArgument("NormalizationMap: gamma must be positive");
    if (!(t0_ns > 0.0)) throw InvalidArgument("NormalizationMap: T0 must be positive");
  }

  double t0_s() const { return t0_ns * 1e-9; }
  /// Length scale in km.
  double length_km() const {
    const double t0_ps = t0_ns * 1e3;
    return 2.0 * t0_ps * t0_ps / std::abs(beta2_ps2_per_km);
  }
  /// Power scale in W.
  double power_w() const {
    const double beta2_s2_per_km = std::abs(beta2_ps2_per_km) * 1e-24;
    return beta2_s2_per_km / (gamma_per_w_km * t0_s() * t0_s());
  }
  double amplitude_scale() const { return std::sqrt(power_w()); }

  /// Same dispersion and T0, nonlinearity scaled by the path-average factor.
  NormalizationMap with_effective_gamma(double factor) const {
    return NormalizationMap(beta2_ps2_per_km, gamma_per_w_km * factor, t0_ns);
  }
};

/// Sum |q|^2 dt.
inline double signal_energy(const ComplexEnvelope& s) {
  double e = 0.0;
  for (const auto& v : s.samples) e += std::norm(v);
  return e * s.dt;
}

inline double average_power(const ComplexEnvelope& s) {
  return signal_energy(s) / (s.dt * static_cast<double>(s.size()));
}

inline ComplexEnvelope normalize(const ComplexEnvelope& s, const NormalizationMap& map) {
  s.validate();
  if (s.units != UnitSystem::physical) throw InvalidArgument("normalize: envelope is already normalized");
  const double inv_amp = 1.0 / map.amplitude_scale();
  cvec out(s.size());
  for (std::size_t n = 0; n < s.size(); ++n) out[n] = std::conj(s.samples[n]) * inv_amp;
  return ComplexEnvelope(std::move(out), s.dt / map.t0_s(), s.t0 / map.t0_s(), UnitSystem::normalized);
}

inline ComplexEnvelope denormalize(const ComplexEnvelope& s, const NormalizationMap& map) {
  s.validate();
  if (s.units != UnitSystem::normalized) throw InvalidArgument("denormalize: envelope is already physical");
  const double amp = map.amplitude_scale();
  cvec out(s.size());
  for (std::size_t n = 0; n < s.size(); ++n) out[n] = std::conj(s.samples[n]) * amp;
  return ComplexEnvelope(std::move(out), s.dt * map.t0_s(), s.t0 * map.t0_s(), UnitSystem::physical);
}

struct SpectrumEnergy {
  double value = 0.0;
  double continuous = 0.0;
  double discrete = 0.0;
  /// False when |q_c| at either grid end exceeds the tail tolerance; the
  /// continuous contribution is then truncated.
  bool tails_decayed = true;
};

/// Trace formula: E = (1/pi) int ln(1 + |q_c|^2) dlambda + 4 sum Im(lambda_k).
inline SpectrumEnergy spectrum_energy(const NonlinearSpectrum& spec, double tail_tol = 1e-6) {
  SpectrumEnergy out;
  const auto& c = spec.continuous;
  if (c.size() >= 2) {
    const double h = c.step();
    double acc = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double w = (i == 0 || i + 1 == c.size()) ? 0.5 : 1.0;
      acc += w * std::log1p(std::norm(c.values[i]));
    }
    out.continuous = acc * h / kPi;
    out.tails_decayed = std::abs(c.values.front()) < tail_tol && std::abs(c.values.back()) < tail_tol;
  }
  for (const auto& p : spec.discrete.points) out.discrete += 4.0 * p.lambda.imag();
  out.value = out.continuous + out.discrete;
  return out;
}

}  // namespace nfdm
