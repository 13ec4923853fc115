// channel.hpp - split-step fiber propagation, EDFA noise, loop composition and receiver front end.
#pragma once

#include "nfdm/core.hpp"
#include "nfdm/fft.hpp"
#include "nfdm/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace nfdm {

inline constexpr double kPlanck = 6.62607015e-34;
inline constexpr double kLightSpeed = 299792458.0;

struct LinkDescription {
  double span_length_km = 81.3;
  int spans_per_loop = 3;
  int loop_count = 6;
  double alpha_db_per_km = 0.2;
  double noise_figure_db = 5.0;
  /// Amplifier gain; defaults to the span loss.
  std::optional<double> amplifier_gain_db;
  /// Receiver ADC resolution; none for an ideal receiver.
  std::optional<int> adc_bits;
  double adc_full_scale_rms = 4.0;
  double step_km = 1.0;
  double beta2_ps2_per_km = -21.3;
  double gamma_per_w_km = 1.3;
  double wavelength_nm = 1550.0;
  bool ase = true;
  /// Optical band-pass before detection; <= 0 disables it.
  double obpf_bandwidth_ghz = 50.0;
  /// Laser linewidth for the optional Wiener phase noise (0: off).
  double linewidth_hz = 0.0;
  /// Internal oversampling of the split-step grid.
  std::size_t oversample = 1;

  void validate() const {
    if (!(span_length_km > 0.0)) throw InvalidArgument("LinkDescription: span_length must be > 0");
    if (spans_per_loop < 0 || loop_count < 0) throw InvalidArgument("LinkDescription: negative span or loop count");
    if (!(alpha_db_per_km >= 0.0)) throw InvalidArgument("LinkDescription: alpha must be >= 0");
    if (!(step_km > 0.0)) throw InvalidArgument("LinkDescription: step must be > 0");
    if (adc_bits && *adc_bits < 2) throw InvalidArgument("LinkDescription: ADC needs at least 2 bits");
    if (oversample == 0) throw InvalidArgument("LinkDescription: oversample must be >= 1");
    if (!(linewidth_hz >= 0.0)) throw InvalidArgument("LinkDescription: linewidth must be >= 0");
  }

  int total_spans() const { return spans_per_loop * loop_count; }
  double total_length_km() const { return span_length_km * total_spans(); }
  double gain_db() const { return amplifier_gain_db.value_or(alpha_db_per_km * span_length_km); }
  double alpha_per_km() const { return alpha_db_per_km * std::log(10.0) / 10.0; }
  double carrier_hz() const { return kLightSpeed / (wavelength_nm * 1e-9); }
  NormalizationMap normalization(double t0_ns = 1.0) const { return {beta2_ps2_per_km, gamma_per_w_km, t0_ns}; }
};

/// f = (1 - exp(-alpha L)) / (alpha L): span-averaged power over launch power.
inline double path_average_factor(const LinkDescription& link) {
  const double x = link.alpha_per_km() * link.span_length_km;
  if (x == 0.0) return 1.0;
  return -std::expm1(-x) / x;
}

/// Normalization of the lossless model matched to the lossy link on average.
inline NormalizationMap effective_normalization(const LinkDescription& link, double t0_ns = 1.0) {
  return link.normalization(t0_ns).with_effective_gamma(path_average_factor(link));
}

/// Normalized length of the whole link.
inline double normalized_length(const LinkDescription& link, double t0_ns = 1.0) {
  return link.total_length_km() / link.normalization(t0_ns).length_km();
}

/// Deterministic 64-bit mixing for sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix_seed(mix_seed(mix_seed(seed ^ mix_seed(a)) ^ mix_seed(b + 0x51ed)) ^ mix_seed(c + 0xa5a5));
}

namespace channel_detail {

/// Symmetric split-step integration: half linear, nonlinear, half linear,
/// with consecutive half steps merged. `linear(w)` is the per-km exponent
/// in the frequency domain and `nl` the per-km nonlinear phase coefficient.
template <class Linear>
cvec split_step(cvec x, double dt, double length, double step, Linear linear, double nl) {
  if (length <= 0.0) return x;
  const auto steps = static_cast<std::size_t>(std::ceil(length / step - 1e-9));
  const double h = length / static_cast<double>(steps);
  const std::size_t n = x.size();
  cvec half(n), full(n);
  for (std::size_t k = 0; k < n; ++k) {
    const cplx e = linear(fft::bin_omega(k, n, dt));
    half[k] = std::exp(0.5 * h * e);
    full[k] = std::exp(h * e);
  }
  fft::forward(x);
  for (std::size_t k = 0; k < n; ++k) x[k] *= half[k];
  for (std::size_t s = 0; s < steps; ++s) {
    fft::inverse(x);
    for (auto& v : x) v *= std::exp(kI * (nl * std::norm(v) * h));
    fft::forward(x);
    const cvec& op = (s + 1 == steps) ? half : full;
    for (std::size_t k = 0; k < n; ++k) x[k] *= op[k];
  }
  fft::inverse(x);
  return x;
}

inline double relative_l2(const cvec& a, const cvec& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace channel_detail

/// One fiber span of the physical NLSE
///   dA/dz = -i beta2/2 A_tt - alpha/2 A + i gamma |A|^2 A
/// (periodic boundary; the grid must resolve the signal bandwidth).
inline ComplexEnvelope ssfm_span(const ComplexEnvelope& s, const LinkDescription& link) {
  if (s.units != UnitSystem::physical) throw InvalidArgument("ssfm_span: physical units required");
  const double b2 = link.beta2_ps2_per_km * 1e-24;
  const double a = link.alpha_per_km();
  auto lin = [&](double w) { return cplx{-0.5 * a, 0.5 * b2 * w * w}; };
  return ComplexEnvelope(channel_detail::split_step(s.samples, s.dt, link.span_length_km, link.step_km, lin,
                                                    link.gamma_per_w_km),
                         s.dt, s.t0, UnitSystem::physical);
}

/// Relative L2 change of one span output when the step is doubled.
inline double step_convergence(const ComplexEnvelope& s, const LinkDescription& link) {
  LinkDescription coarse = link;
  coarse.step_km = 2.0 * link.step_km;
  return channel_detail::relative_l2(ssfm_span(s, coarse).samples, ssfm_span(s, link).samples);
}

/// Lossless normalized NLSE i q_z = q_tt + 2 |q|^2 q over `length`.
inline ComplexEnvelope ssfm_normalized(const ComplexEnvelope& s, double length, double step = 1e-4) {
  if (!s.normalized()) throw InvalidArgument("ssfm_normalized: normalized units required");
  auto lin = [](double w) { return cplx{0.0, w * w}; };
  return ComplexEnvelope(channel_detail::split_step(s.samples, s.dt, length, step, lin, -2.0), s.dt, s.t0,
                         UnitSystem::normalized);
}

/// One-sided ASE density (G - 1) h nu NF / 2 in W/Hz.
inline double ase_density(double gain_db, double noise_figure_db, double carrier_hz) {
  const double g = std::pow(10.0, gain_db / 10.0);
  const double nf = std::pow(10.0, noise_figure_db / 10.0);
  return (g - 1.0) * kPlanck * carrier_hz * nf / 2.0;
}

/// Amplitude gain 10^(G/20) plus complex white Gaussian ASE whose total
/// power over the simulation bandwidth 1/dt is ase_density * (1/dt).
/// A noise figure of -inf gives a noiseless amplifier.
inline ComplexEnvelope edfa(const ComplexEnvelope& s, double gain_db, double noise_figure_db, std::mt19937_64& rng,
                            double carrier_hz = kLightSpeed / 1550e-9) {
  if (s.units != UnitSystem::physical) throw InvalidArgument("edfa: physical units required");
  ComplexEnvelope out = s;
  const double amp = std::pow(10.0, gain_db / 20.0);
  for (auto& v : out.samples) v *= amp;
  if (std::isinf(noise_figure_db) && noise_figure_db < 0.0) return out;
  const double sigma = std::sqrt(ase_density(gain_db, noise_figure_db, carrier_hz) / s.dt / 2.0);
  std::normal_distribution<double> n(0.0, sigma);
  for (auto& v : out.samples) {
    const double re = n(rng);
    const double im = n(rng);
    v += cplx{re, im};
  }
  return out;
}

/// Recirculating loop: loop_count x spans_per_loop x (span, EDFA), then the
/// optical band-pass before detection. The split-step runs on a grid
/// oversampled by link.oversample; span j draws its noise from sub_seed(seed, j).
inline ComplexEnvelope propagate_link(const ComplexEnvelope& s, const LinkDescription& link, std::uint64_t seed,
                                      bool warn_on_step = false) {
  link.validate();
  if (s.units != UnitSystem::physical) throw InvalidArgument("propagate_link: physical units required");
  const int spans = link.total_spans();
  if (spans == 0) return s;
  const std::size_t u = link.oversample;
  ComplexEnvelope x(fft::upsample(s.samples, u), s.dt / static_cast<double>(u), s.t0, UnitSystem::physical);
  const double nf = link.ase ? link.noise_figure_db : -std::numeric_limits<double>::infinity();
  if (warn_on_step) {
    const double d = step_convergence(x, link);
    if (d > 1e-4)
      std::cerr << "warning: split-step output changes by " << d << " (relative L2) when the step is doubled\n";
  }
  for (int j = 0; j < spans; ++j) {
    std::mt19937_64 rng(sub_seed(seed, static_cast<std::uint64_t>(j)));
    x = edfa(ssfm_span(x, link), link.gain_db(), nf, rng, link.carrier_hz());
  }
  if (link.obpf_bandwidth_ghz > 0.0) fft::rectangular_filter(x.samples, x.dt, link.obpf_bandwidth_ghz * 1e9);
  cvec out(s.size());
  for (std::size_t n = 0; n < s.size(); ++n) out[n] = x.samples[n * u];
  return ComplexEnvelope(std::move(out), s.dt, s.t0, UnitSystem::physical);
}

/// Wiener laser phase noise with increments of variance 2 pi linewidth dt.
inline ComplexEnvelope apply_phase_noise(const ComplexEnvelope& s, double linewidth_hz, std::mt19937_64& rng) {
  if (s.units != UnitSystem::physical) throw InvalidArgument("apply_phase_noise: physical units required");
  ComplexEnvelope out = s;
  if (linewidth_hz <= 0.0) return out;
  std::normal_distribution<double> n(0.0, std::sqrt(2.0 * kPi * linewidth_hz * s.dt));
  double phi = 0.0;
  for (auto& v : out.samples) {
    phi += n(rng);
    v *= std::polar(1.0, phi);
  }
  return out;
}

struct FullScalePolicy {
  enum class Kind { rms_multiple, peak } kind = Kind::rms_multiple;
  double k = 4.0;
};

/// Uniform mid-rise quantizer applied to I and Q separately; the full scale
/// is k times the per-quadrature RMS or the largest quadrature magnitude.
inline ComplexEnvelope adc_quantize(const ComplexEnvelope& s, std::optional<int> bits, FullScalePolicy policy = {}) {
  if (!bits) return s;
  if (*bits < 2) throw InvalidArgument("adc_quantize: at least 2 bits required");
  double fs = 0.0;
  if (policy.kind == FullScalePolicy::Kind::peak) {
    for (const auto& v : s.samples) fs = std::max({fs, std::abs(v.real()), std::abs(v.imag())});
  } else {
    double p = 0.0;
    for (const auto& v : s.samples) p += std::norm(v);
    fs = policy.k * std::sqrt(p / (2.0 * static_cast<double>(s.size())));
  }
  ComplexEnvelope out = s;
  if (fs == 0.0) return out;
  const double levels = std::ldexp(1.0, *bits);
  const double delta = 2.0 * fs / levels;
  const double top = fs - 0.5 * delta;
  auto quant = [&](double x) { return std::clamp(delta * (std::floor(x / delta) + 0.5), -top, top); };
  for (auto& v : out.samples) v = {quant(v.real()), quant(v.imag())};
  return out;
}

}  // namespace nfdm
