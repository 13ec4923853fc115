// metrics.hpp - BER/Q conversion, EVM, correlation and Gaussian-mixture BER estimation.
#pragma once

#include "nfdm/types.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

namespace nfdm {

/// Q_dB = 20 log10(sqrt(2) erfc^-1(2 ber)). Returns -inf at ber = 0.5 and
/// +inf at ber = 0 (no finite Q; callers report a lower bound instead).
inline double ber_to_q(double ber) {
  if (!(ber >= 0.0) || ber > 0.5) throw InvalidArgument("ber_to_q: ber must lie in [0, 0.5]");
  if (ber == 0.0) return std::numeric_limits<double>::infinity();
  if (ber == 0.5) return -std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(std::sqrt(2.0) * boost::math::erfc_inv(2.0 * ber));
}

/// Q-factor lower bound for an error-free run of n bits (one error assumed).
inline double q_lower_bound(std::size_t n_bits) {
  if (n_bits < 2) return -std::numeric_limits<double>::infinity();
  return ber_to_q(1.0 / static_cast<double>(n_bits));
}

/// RMS error vector magnitude relative to the reference power.
inline double evm(const cvec& rx, const cvec& tx) {
  if (rx.size() != tx.size() || rx.empty()) throw InvalidArgument("evm: sequences must be non-empty and equal length");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += std::norm(rx[i] - tx[i]);
    den += std::norm(tx[i]);
  }
  if (den == 0.0) throw InvalidArgument("evm: zero reference power");
  return std::sqrt(num / den);
}

/// Complex correlation coefficient E[(x-mx) conj(y-my)] / sqrt(var x var y).
inline cplx complex_correlation(const cvec& x, const cvec& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("complex_correlation: need >= 2 paired samples");
  const double n = static_cast<double>(x.size());
  const cplx mx = std::accumulate(x.begin(), x.end(), cplx{}) / n;
  const cplx my = std::accumulate(y.begin(), y.end(), cplx{}) / n;
  cplx cxy{};
  double vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cxy += (x[i] - mx) * std::conj(y[i] - my);
    vx += std::norm(x[i] - mx);
    vy += std::norm(y[i] - my);
  }
  if (vx == 0.0 || vy == 0.0) return cplx{};
  return cxy / std::sqrt(vx * vy);
}

/// log Q(x) for the Gaussian tail Q(x) = erfc(x / sqrt 2) / 2, accurate far into the tail.
inline double log_gaussian_tail(double x) {
  if (x < 20.0) return std::log(0.5 * boost::math::erfc(x / std::sqrt(2.0)));
  // Asymptotic expansion of the Mills ratio.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(x * std::sqrt(2.0 * kPi)) + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

using Point2 = std::array<double, 2>;

struct GaussianComponent {
  double weight = 0.0;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

struct GmmFit {
  std::vector<GaussianComponent> components;
  int iterations = 0;
  double log_likelihood = 0.0;
};

/// Expectation-maximization fit of a 2-D Gaussian mixture with full
/// covariances, one component per initial mean.
inline GmmFit fit_gmm(const std::vector<Point2>& samples, const std::vector<Point2>& initial_means,
                      int max_iterations = 200, double tol = 1e-9) {
  const std::size_t n = samples.size();
  const std::size_t k = initial_means.size();
  if (k == 0 || n < k) throw InvalidArgument("fit_gmm: need at least one component and as many samples");
  std::vector<Eigen::Vector2d> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = {samples[i][0], samples[i][1]};

  // Pooled covariance around the nearest initial mean seeds every component.
  Eigen::Matrix2d pooled = Eigen::Matrix2d::Zero();
  for (const auto& xi : x) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = (xi - Eigen::Vector2d(initial_means[c][0], initial_means[c][1])).squaredNorm();
      if (d < bd) bd = d, best = c;
    }
    const Eigen::Vector2d r = xi - Eigen::Vector2d(initial_means[best][0], initial_means[best][1]);
    pooled += r * r.transpose();
  }
  pooled /= static_cast<double>(n);
  const double floor = 1e-12 + 1e-9 * pooled.trace();
  pooled += floor * Eigen::Matrix2d::Identity();

  GmmFit fit;
  fit.components.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    fit.components[c].weight = 1.0 / static_cast<double>(k);
    fit.components[c].mean = {initial_means[c][0], initial_means[c][1]};
    fit.components[c].cov = pooled;
  }

  Eigen::MatrixXd resp(n, k);
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iterations; ++it) {
    // E step in log space.
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const auto& g = fit.components[c];
        const Eigen::Vector2d r = x[i] - g.mean;
        const double lp = std::log(std::max(g.weight, 1e-300)) - 0.5 * r.dot(g.cov.ldlt().solve(r)) -
                          0.5 * std::log(g.cov.determinant()) - std::log(2.0 * kPi);
        resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = lp;
        mx = std::max(mx, lp);
      }
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += std::exp(resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) - mx);
      const double lse = mx + std::log(s);
      ll += lse;
      for (std::size_t c = 0; c < k; ++c) {
        auto& v = resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        v = std::exp(v - lse);
      }
    }
    // M step.
    for (std::size_t c = 0; c < k; ++c) {
      const auto col = resp.col(static_cast<Eigen::Index>(c));
      const double nk = col.sum();
      auto& g = fit.components[c];
      if (nk < 1e-10) {
        g.weight = 0.0;
        continue;
      }
      Eigen::Vector2d m = Eigen::Vector2d::Zero();
      for (std::size_t i = 0; i < n; ++i) m += col(static_cast<Eigen::Index>(i)) * x[i];
      m /= nk;
      Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d r = x[i] - m;
        s += col(static_cast<Eigen::Index>(i)) * r * r.transpose();
      }
      g.mean = m;
      g.cov = s / nk + floor * Eigen::Matrix2d::Identity();
      g.weight = nk / static_cast<double>(n);
    }
    fit.iterations = it;
    fit.log_likelihood = ll;
    if (std::abs(ll - prev) <= tol * std::max(1.0, std::abs(ll))) return fit;
    prev = ll;
  }
  std::ostringstream msg;
  msg << "fit_gmm: EM did not converge in " << max_iterations << " iterations (log-likelihood " << fit.log_likelihood
      << ", change " << std::abs(fit.log_likelihood - prev) << ")";
  throw NumericalError(msg.str());
}

struct GmmBerEstimate {
  double ber = 0.0;
  double log10_ber = -std::numeric_limits<double>::infinity();
  GmmFit fit;
};

/// BER of nearest-design-point decisions in the metric space u = T x,
/// estimated from a Gaussian mixture fitted to the received points.
/// Each pairwise error probability is the Gaussian tail across the
/// bisector of the two design points; errors are weighted by the Hamming
/// distance between labels and divided by the bits per decision.
inline GmmBerEstimate estimate_ber_gaussian_mixture(const std::vector<Point2>& samples,
                                                    const std::vector<Point2>& design,
                                                    const std::vector<std::vector<double>>& hamming,
                                                    double bits_per_decision,
                                                    const Eigen::Matrix2d& metric = Eigen::Matrix2d::Identity(),
                                                    std::size_t min_per_cluster = 100) {
  const std::size_t k = design.size();
  if (hamming.size() != k) throw InvalidArgument("estimate_ber_gaussian_mixture: hamming matrix size mismatch");
  if (!(bits_per_decision > 0.0)) throw InvalidArgument("estimate_ber_gaussian_mixture: bits_per_decision must be > 0");
  if (samples.size() < min_per_cluster * k)
    throw InvalidArgument("estimate_ber_gaussian_mixture: fewer than " + std::to_string(min_per_cluster) +
                          " samples per cluster");
  GmmBerEstimate out;
  out.fit = fit_gmm(samples, design);
  std::vector<Eigen::Vector2d> u(k);
  for (std::size_t j = 0; j < k; ++j) u[j] = metric * Eigen::Vector2d(design[j][0], design[j][1]);

  std::vector<double> terms;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& g = out.fit.components[i];
    if (g.weight <= 0.0) continue;
    const Eigen::Vector2d mu = metric * g.mean;
    const Eigen::Matrix2d cov = metric * g.cov * metric.transpose();
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i || hamming[i][j] <= 0.0) continue;
      const Eigen::Vector2d d = u[j] - u[i];
      const double len = d.norm();
      if (len == 0.0) throw InvalidArgument("estimate_ber_gaussian_mixture: duplicate design points");
      const Eigen::Vector2d nrm = d / len;
      const double margin = nrm.dot(0.5 * (u[i] + u[j]) - mu);
      const double sigma = std::sqrt(std::max(nrm.dot(cov * nrm), 1e-300));
      terms.push_back(std::log(g.weight) + log_gaussian_tail(margin / sigma) + std::log(hamming[i][j]) -
                      std::log(bits_per_decision));
    }
  }
  if (terms.empty()) return out;
  const double mx = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  const double ln_ber = std::min(mx + std::log(s), std::log(0.5));
  out.log10_ber = ln_ber / std::log(10.0);
  out.ber = std::exp(ln_ber);
  return out;
}

/// Q-factor in dB from a log10 BER, valid where the BER itself underflows.
inline double q_from_log10_ber(double log10_ber) {
  if (log10_ber == -std::numeric_limits<double>::infinity()) return std::numeric_limits<double>::infinity();
  if (log10_ber > -300.0) return ber_to_q(std::min(0.5, std::pow(10.0, log10_ber)));
  // Invert log Q(x) with Newton on the asymptotic form.
  const double target = log10_ber * std::log(10.0);
  double x = std::sqrt(-2.0 * target);
  for (int i = 0; i < 50; ++i) {
    const double f = log_gaussian_tail(x) - target;
    const double df = -x - 1.0 / x;
    x -= f / df;
  }
  return 20.0 * std::log10(x);
}

}  // namespace nfdm
