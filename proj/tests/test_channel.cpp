#include "nfdm/channel.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace nfdm;

namespace {

LinkDescription linear_span() {
  LinkDescription l;
  l.alpha_db_per_km = 0.0;
  l.gamma_per_w_km = 1e-12;
  l.span_length_km = 100.0;
  l.step_km = 5.0;
  return l;
}

ComplexEnvelope physical(cvec x, double dt) {
  const double t0 = -0.5 * static_cast<double>(x.size() - 1) * dt;
  return ComplexEnvelope(std::move(x), dt, t0, UnitSystem::physical);
}

}  // namespace

TEST(Dispersion, GaussianPulseMatchesAnalyticField) {
  const double t0 = 20e-12, dt = 0.5e-12;
  cvec x(4096);
  auto probe = physical(x, dt);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::exp(-std::pow(probe.time(i), 2) / (2.0 * t0 * t0));
  const auto link = linear_span();
  const auto out = ssfm_span(physical(x, dt), link);
  // A(z,T) = T0 / sqrt(T0^2 - i beta2 z) exp(-T^2 / (2 (T0^2 - i beta2 z))).
  const cplx w = t0 * t0 - kI * (link.beta2_ps2_per_km * 1e-24 * link.span_length_km);
  double worst = 0.0, width_num = 0.0, width_den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = out.time(i);
    const cplx a = t0 / std::sqrt(w) * std::exp(-t * t / (2.0 * w));
    worst = std::max(worst, std::abs(out.samples[i] - a));
    width_num += t * t * std::norm(out.samples[i]);
    width_den += std::norm(out.samples[i]);
  }
  EXPECT_LT(worst, 1e-9);
  // RMS width grows by sqrt(1 + (beta2 z / T0^2)^2).
  const double z = link.beta2_ps2_per_km * 1e-24 * link.span_length_km / (t0 * t0);
  EXPECT_NEAR(std::sqrt(2.0 * width_num / width_den), t0 * std::sqrt(1.0 + z * z), 1e-3 * t0);
}

TEST(Nonlinearity, SelfPhaseModulationOfConstantField) {
  LinkDescription l;
  l.span_length_km = 80.0;
  l.step_km = 0.5;
  const double p0 = 5e-3;
  const auto out = ssfm_span(physical(cvec(256, std::sqrt(p0)), 1e-12), l);
  const double a = l.alpha_per_km();
  const double leff = -std::expm1(-a * l.span_length_km) / a;
  // Midpoint sampling of the decaying power per step is accurate to (a h)^2 / 24.
  const double phi = l.gamma_per_w_km * p0 * leff;
  const double tol = phi * std::pow(a * l.step_km, 2) / 24.0 * 1.05;
  for (std::size_t i = 0; i < out.size(); i += 17) {
    EXPECT_NEAR(std::arg(out.samples[i]), phi, tol);
    EXPECT_NEAR(std::norm(out.samples[i]), p0 * std::exp(-a * l.span_length_km), 1e-12);
  }
}

TEST(Loss, SpanLossInDecibels) {
  LinkDescription l;
  EXPECT_NEAR(l.gain_db(), 16.26, 1e-9);
  const auto out = ssfm_span(physical(cvec(64, 1e-2), 1e-12), l);
  EXPECT_NEAR(10.0 * std::log10(std::norm(out.samples[0]) / 1e-4), -16.26, 1e-9);
}

TEST(Amplifier, AseVarianceMatchesDensity) {
  std::mt19937_64 rng(7);
  const double dt = 1e-11, g = 16.26, nf = 5.0;
  const auto out = edfa(physical(cvec(200000), dt), g, nf, rng);
  const double nu = kLightSpeed / 1550e-9;
  const double rho = (std::pow(10.0, g / 10.0) - 1.0) * kPlanck * nu * std::pow(10.0, nf / 10.0) / 2.0;
  double vi = 0.0, vq = 0.0;
  for (const auto& v : out.samples) {
    vi += v.real() * v.real();
    vq += v.imag() * v.imag();
  }
  vi /= static_cast<double>(out.size());
  vq /= static_cast<double>(out.size());
  EXPECT_NEAR(vi / (rho / (2.0 * dt)), 1.0, 0.01);
  EXPECT_NEAR(vq / (rho / (2.0 * dt)), 1.0, 0.01);
}

TEST(Amplifier, NoiselessGainOnly) {
  std::mt19937_64 rng(7);
  const auto out = edfa(physical(cvec(8, 1e-3), 1e-11), 20.0, -std::numeric_limits<double>::infinity(), rng);
  for (const auto& v : out.samples) EXPECT_NEAR(std::abs(v), 1e-2, 1e-15);
}

TEST(Adc, MidRiseQuantizer) {
  cvec x(1000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = {std::sin(0.01 * i), std::cos(0.013 * i)};
  const auto s = physical(x, 1e-12);
  const auto q = adc_quantize(s, 3, {FullScalePolicy::Kind::peak, 0.0});
  std::set<double> levels;
  double fs = 0.0;
  for (const auto& v : x) fs = std::max({fs, std::abs(v.real()), std::abs(v.imag())});
  const double delta = 2.0 * fs / 8.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    levels.insert(q.samples[i].real());
    EXPECT_LE(std::abs(q.samples[i].real() - x[i].real()), 0.5 * delta + 1e-12);
    EXPECT_LE(std::abs(q.samples[i].imag() - x[i].imag()), 0.5 * delta + 1e-12);
  }
  EXPECT_LE(levels.size(), 8u);
  EXPECT_EQ(adc_quantize(s, std::nullopt).samples, s.samples);
  EXPECT_THROW(adc_quantize(s, 1), InvalidArgument);
}

TEST(Adc, RmsFullScaleClips) {
  cvec x(100, cplx{0.1, 0.1});
  x[0] = {100.0, 0.0};
  const auto q = adc_quantize(physical(x, 1e-12), 6, {FullScalePolicy::Kind::rms_multiple, 2.0});
  EXPECT_LT(q.samples[0].real(), 100.0);
}

TEST(PhaseNoise, WienerIncrementVariance) {
  std::mt19937_64 rng(3);
  const double dt = 1e-11, lw = 1e5;
  const auto out = apply_phase_noise(physical(cvec(100000, 1.0), dt), lw, rng);
  double v = 0.0;
  for (std::size_t i = 1; i < out.size(); ++i) v += std::pow(std::arg(out.samples[i] / out.samples[i - 1]), 2);
  v /= static_cast<double>(out.size() - 1);
  EXPECT_NEAR(v / (2.0 * kPi * lw * dt), 1.0, 0.02);
  for (const auto& x : out.samples) EXPECT_NEAR(std::abs(x), 1.0, 1e-12);
}

TEST(Link, PathAverageAndNormalizedLength) {
  const LinkDescription l;
  EXPECT_NEAR(path_average_factor(l), 0.2607, 1e-4);
  EXPECT_EQ(l.total_spans(), 18);
  EXPECT_NEAR(l.total_length_km(), 1463.4, 1e-9);
  EXPECT_NEAR(effective_normalization(l).power_w() * 1e6, 62.85, 0.05);
  EXPECT_NEAR(normalized_length(l), 1463.4 * 21.3 / 2.0e6, 1e-9);
  LinkDescription lossless;
  lossless.alpha_db_per_km = 0.0;
  EXPECT_DOUBLE_EQ(path_average_factor(lossless), 1.0);
}

TEST(Link, DeterministicPerSeed) {
  LinkDescription l;
  l.loop_count = 1;
  l.spans_per_loop = 2;
  l.step_km = 5.0;
  cvec x(512);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1e-3 * std::exp(-std::pow((double(i) - 256.0) / 30.0, 2));
  const auto s = physical(x, 1e-11);
  const auto a = propagate_link(s, l, 42);
  const auto b = propagate_link(s, l, 42);
  const auto c = propagate_link(s, l, 43);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
  LinkDescription none = l;
  none.loop_count = 0;
  EXPECT_EQ(propagate_link(s, none, 1).samples, s.samples);
}

TEST(Link, StepConvergenceIsSmallAtDefaultStep) {
  const LinkDescription l;
  cvec x(2000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 3e-4 * std::exp(-std::pow((double(i) - 1000.0) / 80.0, 2));
  EXPECT_LT(step_convergence(physical(x, 1e-11), l), 1e-4);
}

TEST(Link, RejectsBadDescription) {
  LinkDescription l;
  l.step_km = 0.0;
  EXPECT_THROW(l.validate(), InvalidArgument);
  l = {};
  l.oversample = 0;
  EXPECT_THROW(l.validate(), InvalidArgument);
  EXPECT_THROW(propagate_link(ComplexEnvelope(cvec(4), 0.1, 0.0, UnitSystem::normalized), LinkDescription{}, 1),
               InvalidArgument);
}

TEST(NormalizedSsfm, FundamentalSolitonRotatesPhase) {
  // 2 eta sech(2 eta t) evolves as q e^{-4 i eta^2 z}.
  const double eta = 0.5, z = 0.5, dt = 0.02;
  cvec x(4000);
  const double t0 = -40.0 + 0.5 * dt;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 2.0 * eta / std::cosh(2.0 * eta * (t0 + i * dt));
  const ComplexEnvelope q(x, dt, t0, UnitSystem::normalized);
  const auto out = ssfm_normalized(q, z, 1e-3);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, std::abs(out.samples[i] - x[i] * std::exp(-4.0 * kI * eta * eta * z)));
  EXPECT_LT(worst, 1e-4);
}
