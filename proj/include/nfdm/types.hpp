// types.hpp - value types shared by the NFT, channel and modem layers.
//
// Conventions used throughout the library:
//   normalized NLSE      i q_z = q_tt + 2|q|^2 q
//   Zakharov-Shabat      v_t = [[-i lambda, q], [-conj(q), i lambda]] v
//   continuous spectrum  q_c(lambda) = b(lambda) / a(lambda), lambda real
//   discrete spectrum    q_d(lambda_k) = b(lambda_k) / a'(lambda_k), a(lambda_k) = 0
//   evolution            b -> b exp(-4 i lambda^2 z), a fixed
// A fundamental soliton with eigenvalue i*eta is 2 eta sech(2 eta t).

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nfdm {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

/// Thrown when arguments violate a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical procedure cannot produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class UnitSystem { physical, normalized };

/// Uniformly sampled complex envelope. Sample n sits at t0 + n*dt and is
/// treated as the midpoint of the cell [t - dt/2, t + dt/2].
/// Physical envelopes carry sqrt(W) amplitudes and seconds.
struct ComplexEnvelope {
  cvec samples;
  double dt = 1.0;
  double t0 = 0.0;
  UnitSystem units = UnitSystem::normalized;

  ComplexEnvelope() = default;
  ComplexEnvelope(cvec s, double dt_, double t0_, UnitSystem u)
      : samples(std::move(s)), dt(dt_), t0(t0_), units(u) {
    validate();
  }

  void validate() const {
    if (samples.empty()) throw InvalidArgument("ComplexEnvelope: no samples");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("ComplexEnvelope: dt must be > 0");
  }

  std::size_t size() const { return samples.size(); }
  double time(std::size_t n) const { return t0 + static_cast<double>(n) * dt; }
  /// Left edge of the first cell.
  double t_begin() const { return t0 - 0.5 * dt; }
  /// Right edge of the last cell.
  double t_end() const { return t0 + (static_cast<double>(samples.size()) - 0.5) * dt; }
  bool normalized() const { return units == UnitSystem::normalized; }

  /// Envelope on a centered window of n samples, zero everywhere.
  static ComplexEnvelope zeros(std::size_t n, double dt, double t0,
                               UnitSystem u = UnitSystem::normalized) {
    return ComplexEnvelope(cvec(n, cplx{}), dt, t0, u);
  }
};

/// Uniform real grid of n points on [lo, hi].
inline std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw InvalidArgument("uniform_grid: need n >= 2 and hi > lo");
  std::vector<double> g(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + h * static_cast<double>(i);
  return g;
}

/// Continuous part of the nonlinear spectrum sampled on a uniform real grid.
struct ContinuousSpectrum {
  std::vector<double> grid;
  cvec values;
  /// Grid points where |a| fell below the spectral-singularity threshold.
  std::vector<std::size_t> invalid;

  ContinuousSpectrum() = default;
  ContinuousSpectrum(std::vector<double> g, cvec v) : grid(std::move(g)), values(std::move(v)) {
    validate();
  }

  void validate() const {
    if (grid.size() != values.size()) throw InvalidArgument("ContinuousSpectrum: length mismatch");
    if (grid.size() < 2) return;
    const double h = step();
    if (!(h > 0.0)) throw InvalidArgument("ContinuousSpectrum: grid must be increasing");
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double d = grid[i] - grid[i - 1];
      if (std::abs(d - h) > 1e-9 * std::max(1.0, std::abs(grid.back() - grid.front())))
        throw InvalidArgument("ContinuousSpectrum: grid is not uniform");
    }
  }

  std::size_t size() const { return grid.size(); }
  double step() const {
    return grid.size() < 2 ? 0.0 : (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  }
};

struct DiscretePoint {
  cplx lambda;
  cplx amplitude;
};

/// Eigenvalues in the upper half plane with their spectral amplitudes.
struct DiscreteSpectrum {
  std::vector<DiscretePoint> points;

  DiscreteSpectrum() = default;
  explicit DiscreteSpectrum(std::vector<DiscretePoint> p) : points(std::move(p)) { validate(); }

  void validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!(points[i].lambda.imag() > 0.0))
        throw InvalidArgument("DiscreteSpectrum: eigenvalue not in the upper half plane");
      if (points[i].amplitude == cplx{})
        throw InvalidArgument("DiscreteSpectrum: zero spectral amplitude");
      for (std::size_t j = 0; j < i; ++j)
        if (std::abs(points[i].lambda - points[j].lambda) <= 1e-6)
          throw InvalidArgument("DiscreteSpectrum: eigenvalues not distinct");
    }
  }

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
  std::vector<cplx> eigenvalues() const {
    std::vector<cplx> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(p.lambda);
    return out;
  }
};

struct NonlinearSpectrum {
  ContinuousSpectrum continuous;
  DiscreteSpectrum discrete;
};

}  // namespace nfdm
