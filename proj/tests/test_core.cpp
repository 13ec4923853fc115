#include "nfdm/core.hpp"
#include "nfdm/nft_forward.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nfdm;

TEST(Normalization, ScalesForStandardFiber) {
  const NormalizationMap m(-21.3, 1.3, 1.0);
  // L = 2 T0^2 / |beta2| with T0 = 1000 ps.
  EXPECT_NEAR(m.length_km(), 2.0e6 / 21.3, 1e-6);
  // P = 2 / (gamma L).
  EXPECT_NEAR(m.power_w(), 2.0 / (1.3 * m.length_km()), 1e-15);
  EXPECT_NEAR(m.power_w() * 1e6, 16.385, 1e-3);
}

TEST(Normalization, EffectiveGammaScalesPowerInversely) {
  const NormalizationMap m(-21.3, 1.3, 1.0);
  const auto e = m.with_effective_gamma(0.25);
  EXPECT_DOUBLE_EQ(e.length_km(), m.length_km());
  EXPECT_NEAR(e.power_w(), 4.0 * m.power_w(), 1e-15);
}

TEST(Normalization, RejectsInvalidParameters) {
  EXPECT_THROW(NormalizationMap(21.3, 1.3, 1.0), InvalidArgument);
  EXPECT_THROW(NormalizationMap(-21.3, 0.0, 1.0), InvalidArgument);
  EXPECT_THROW(NormalizationMap(-21.3, 1.3, -1.0), InvalidArgument);
}

TEST(Normalization, RoundTripIsExact) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  cvec x(257);
  for (auto& v : x) v = {1e-3 * g(rng), 1e-3 * g(rng)};
  const ComplexEnvelope phys(x, 1e-11, -1.28e-9, UnitSystem::physical);
  const NormalizationMap m(-21.3, 1.3, 1.0);
  const auto n = normalize(phys, m);
  EXPECT_TRUE(n.normalized());
  EXPECT_NEAR(n.dt, 0.01, 1e-15);
  EXPECT_NEAR(n.samples[3].real(), x[3].real() / std::sqrt(m.power_w()), 1e-12);
  EXPECT_NEAR(n.samples[3].imag(), -x[3].imag() / std::sqrt(m.power_w()), 1e-12);
  const auto back = denormalize(n, m);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(std::abs(back.samples[i] - x[i]), 0.0, 1e-18);
  EXPECT_THROW(normalize(n, m), InvalidArgument);
  EXPECT_THROW(denormalize(phys, m), InvalidArgument);
}

TEST(Energy, GaussianPulseEnergyMatchesClosedForm) {
  const double dt = 0.01;
  cvec x(2000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = -10.0 + (static_cast<double>(i) + 0.5) * dt;
    x[i] = std::exp(-t * t);
  }
  const ComplexEnvelope s(x, dt, -10.0 + 0.5 * dt, UnitSystem::normalized);
  EXPECT_NEAR(signal_energy(s), std::sqrt(kPi / 2.0), 1e-10);
  EXPECT_NEAR(average_power(s), std::sqrt(kPi / 2.0) / 20.0, 1e-10);
}

TEST(Energy, TraceFormulaDiscreteOnly) {
  NonlinearSpectrum s;
  s.discrete = DiscreteSpectrum({{{0.0, 0.5}, 1.0}, {{0.3, 1.25}, cplx{0.0, 2.0}}});
  const auto e = spectrum_energy(s);
  EXPECT_DOUBLE_EQ(e.discrete, 4.0 * 1.75);
  EXPECT_DOUBLE_EQ(e.value, 7.0);
}

TEST(Energy, TraceFormulaMatchesSechPotential) {
  // q = 0.4 sech t: no bound states; the continuous part carries all energy 0.32.
  const double dt = 0.005;
  cvec x(8000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.4 / std::cosh(-20.0 + (static_cast<double>(i) + 0.5) * dt);
  const ComplexEnvelope q(x, dt, -20.0 + 0.5 * dt, UnitSystem::normalized);
  NonlinearSpectrum s;
  s.continuous = continuous_spectrum(q, uniform_grid(-30.0, 30.0, 3001));
  const auto e = spectrum_energy(s);
  EXPECT_TRUE(e.tails_decayed);
  EXPECT_NEAR(e.value, 0.32, 1e-4);
}

TEST(Envelope, TimeAxisAndValidation) {
  const ComplexEnvelope s(cvec(4), 0.5, -0.75, UnitSystem::normalized);
  EXPECT_DOUBLE_EQ(s.time(3), 0.75);
  EXPECT_DOUBLE_EQ(s.t_begin(), -1.0);
  EXPECT_DOUBLE_EQ(s.t_end(), 1.0);
  EXPECT_THROW(ComplexEnvelope(cvec{}, 0.1, 0.0, UnitSystem::normalized), InvalidArgument);
  EXPECT_THROW(ComplexEnvelope(cvec(3), 0.0, 0.0, UnitSystem::normalized), InvalidArgument);
}
