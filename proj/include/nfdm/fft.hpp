// fft.hpp - thin FFTW wrapper with a process-wide plan cache.
#pragma once

#include "nfdm/types.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace nfdm::fft {

namespace detail {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is, so plans are created under a lock and shared.
inline fftw_plan plan_for(int n, int sign) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find({n, sign});
  if (it != cache.end()) return it->second;
  cvec a(static_cast<std::size_t>(n));
  // In-place plan: execute() always transforms in place.
  fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                                 reinterpret_cast<fftw_complex*>(a.data()), sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(std::make_pair(n, sign), p);
  return p;
}

inline void execute(cvec& data, int sign) {
  if (data.empty()) return;
  fftw_plan p = plan_for(static_cast<int>(data.size()), sign);
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(p, ptr, ptr);
}

}  // namespace detail

/// In-place forward transform, X_k = sum_n x_n exp(-2 pi i k n / N).
inline void forward(cvec& data) { detail::execute(data, FFTW_FORWARD); }

/// In-place inverse transform including the 1/N factor.
inline void inverse(cvec& data) {
  detail::execute(data, FFTW_BACKWARD);
  const double s = 1.0 / static_cast<double>(data.size());
  for (auto& v : data) v *= s;
}

/// Angular frequency of FFT bin k for sample spacing dt.
inline double bin_omega(std::size_t k, std::size_t n, double dt) {
  const auto kk = static_cast<long long>(k);
  const auto nn = static_cast<long long>(n);
  const long long m = (kk <= nn / 2) ? kk : kk - nn;
  return 2.0 * kPi * static_cast<double>(m) / (static_cast<double>(nn) * dt);
}

/// Band-limited interpolation by an integer factor (zero padding in frequency).
/// The window is treated as periodic; sample n of the input maps to sample
/// n*factor of the output.
inline cvec upsample(const cvec& x, std::size_t factor) {
  if (factor <= 1) return x;
  const std::size_t n = x.size();
  const std::size_t m = n * factor;
  cvec spec = x;
  forward(spec);
  cvec big(m, cplx{});
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k < half; ++k) big[k] = spec[k];
  for (std::size_t k = half + 1; k < n; ++k) big[m - n + k] = spec[k];
  if (n % 2 == 0) {
    // Split the Nyquist bin symmetrically.
    big[half] = 0.5 * spec[half];
    big[m - half] = 0.5 * spec[half];
  } else {
    big[half] = spec[half];
  }
  inverse(big);
  for (auto& v : big) v *= static_cast<double>(factor);
  return big;
}

/// Ideal rectangular band-pass around the carrier: keeps |f| <= bandwidth/2.
inline void rectangular_filter(cvec& x, double dt, double bandwidth_hz) {
  forward(x);
  const double wmax = kPi * bandwidth_hz;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (std::abs(bin_omega(k, x.size(), dt)) > wmax) x[k] = cplx{};
  inverse(x);
}

}  // namespace nfdm::fft
