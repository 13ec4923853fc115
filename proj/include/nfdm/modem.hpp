// modem.hpp - NFDM symbol mapping, receiver decisions and the linear OFDM baseline.
#pragma once

#include "nfdm/metrics.hpp"
#include "nfdm/nft_forward.hpp"
#include "nfdm/nft_inverse.hpp"
#include "nfdm/qam.hpp"
#include "nfdm/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nfdm {

enum class Scheme { continuous, continuous_d1, continuous_d2, linear_ofdm };

inline std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::continuous: return "C";
    case Scheme::continuous_d1: return "C+D1";
    case Scheme::continuous_d2: return "C+D2";
    case Scheme::linear_ofdm: return "OFDM";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& name) {
  if (name == "C") return Scheme::continuous;
  if (name == "C+D1" || name == "CD1") return Scheme::continuous_d1;
  if (name == "C+D2" || name == "CD2") return Scheme::continuous_d2;
  if (name == "OFDM" || name == "linear-OFDM") return Scheme::linear_ofdm;
  throw InvalidArgument("unknown scheme '" + name + "' (expected C, C+D1, C+D2 or OFDM)");
}

inline bool has_discrete(Scheme s) { return s == Scheme::continuous_d1 || s == Scheme::continuous_d2; }

/// Two eigenvalues; `left` is placed before `right` in time.
struct EigenPair {
  cplx left;
  cplx right;
};

inline std::vector<EigenPair> default_d1_pairs() { return {{{0.0, 1.0}, {0.0, 1.5}}, {{0.0, 1.5}, {0.0, 1.0}}}; }

/// lambda_1 in {1, 1.25, 1.5, 1.75}i crossed with lambda_2 in {3.2, 3.6, 4.0}i,
/// index = 3 i_1 + i_2. All pair sums differ by at least 0.05.
inline std::vector<EigenPair> default_d2_pairs() {
  std::vector<EigenPair> out;
  for (double l1 : {1.0, 1.25, 1.5, 1.75})
    for (double l2 : {3.2, 3.6, 4.0}) out.push_back({{0.0, l1}, {0.0, l2}});
  return out;
}

struct ModulationConfig {
  int n_subcarriers = 64;
  int qam_order = 16;
  double t_c = 2.0;
  double t_s = 10.0;
  double guard = 4.0;
  /// Continuous-spectrum scale A; normalized continuous power is about 3.2 A^2.
  double amplitude = 0.1;
  Scheme scheme = Scheme::continuous;
  std::vector<EigenPair> d1_pairs = default_d1_pairs();
  std::vector<EigenPair> d2_pairs = default_d2_pairs();
  /// Signal all 12 D2 pairs (scored as symbol errors) instead of the 8-pair subset.
  bool d2_full_alphabet = false;
  std::vector<int> pilot_subcarriers{-24, -8, 8, 24};
  /// Weight of the difference term in the pair decision metric.
  double pair_weight = 0.25;
  /// Soliton centers at -offset and +offset within the symbol window.
  double soliton_offset = 2.5;
  double dt = 0.01;
  std::size_t tx_oversample = 3;
  std::size_t rx_oversample = 8;
  /// One pilot symbol per this many data symbols.
  int pilot_period = 32;
  /// Equalizer taps are averaged over +-equalizer_span neighbouring subcarriers.
  int equalizer_span = 4;

  void validate() const {
    if (n_subcarriers <= 0 || n_subcarriers % 2 != 0) throw InvalidArgument("ModulationConfig: n_subcarriers must be even and positive");
    if (qam_order != 16) throw InvalidArgument("ModulationConfig: only 16-QAM is supported");
    if (!(t_c > 0.0) || !(guard >= 0.0)) throw InvalidArgument("ModulationConfig: invalid T_c or guard");
    if (std::abs(t_s - (t_c + 2.0 * guard)) > 1e-9) throw InvalidArgument("ModulationConfig: T_s must equal T_c + 2 guard");
    if (!(amplitude >= 0.0)) throw InvalidArgument("ModulationConfig: amplitude must be >= 0");
    if (!(dt > 0.0)) throw InvalidArgument("ModulationConfig: dt must be > 0");
    if (tx_oversample % 2 == 0) throw InvalidArgument("ModulationConfig: tx_oversample must be odd");
    if (pilot_period <= 0) throw InvalidArgument("ModulationConfig: pilot_period must be > 0");
    if (equalizer_span < 0) throw InvalidArgument("ModulationConfig: equalizer_span must be >= 0");
    for (int k : pilot_subcarriers)
      if (k < -n_subcarriers / 2 || k >= n_subcarriers / 2) throw InvalidArgument("ModulationConfig: pilot subcarrier out of range");
    if (d1_pairs.size() != 2) throw InvalidArgument("ModulationConfig: D1 needs exactly 2 pairs");
    if (d2_pairs.size() != 12) throw InvalidArgument("ModulationConfig: D2 needs exactly 12 pairs");
  }

  TimeWindow window() const { return {-0.5 * t_s, 0.5 * t_s}; }
  std::size_t samples_per_symbol() const { return window().cells(dt); }
};

/// Subcarrier indices k = -N/2 .. N/2 - 1.
inline std::vector<int> subcarrier_indices(const ModulationConfig& cfg) {
  std::vector<int> k;
  for (int i = -cfg.n_subcarriers / 2; i < cfg.n_subcarriers / 2; ++i) k.push_back(i);
  return k;
}

/// Sampling points lambda_m = -m pi / T_c where sinc(T_c lambda / pi + k) = delta_km.
inline std::vector<double> subcarrier_lambdas(const ModulationConfig& cfg) {
  std::vector<double> l;
  for (int m : subcarrier_indices(cfg)) l.push_back(-m * kPi / cfg.t_c);
  return l;
}

inline bool is_pilot_subcarrier(const ModulationConfig& cfg, int k) {
  return std::find(cfg.pilot_subcarriers.begin(), cfg.pilot_subcarriers.end(), k) != cfg.pilot_subcarriers.end();
}

inline std::size_t continuous_bits(const ModulationConfig& cfg) {
  return static_cast<std::size_t>(cfg.n_subcarriers - static_cast<int>(cfg.pilot_subcarriers.size())) *
         Qam16::bits_per_symbol;
}

/// Known value on a pilot subcarrier: the four 16-QAM corners in turn.
inline cplx pilot_value(const ModulationConfig& cfg, int k) {
  const auto it = std::find(cfg.pilot_subcarriers.begin(), cfg.pilot_subcarriers.end(), k);
  const auto i = static_cast<std::size_t>(it - cfg.pilot_subcarriers.begin());
  static const cplx corners[4] = {{3.0, 3.0}, {3.0, -3.0}, {-3.0, 3.0}, {-3.0, -3.0}};
  return corners[i % 4] * Qam16::scale();
}

/// Known continuous symbols of a pilot symbol: fixed pseudo-random 16-QAM
/// with the usual pilot tones.
inline cvec pilot_symbol_values(const ModulationConfig& cfg) {
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<int> bit(0, 1);
  cvec out;
  Bits b(4);
  for (int k = -cfg.n_subcarriers / 2; k < cfg.n_subcarriers / 2; ++k) {
    for (auto& v : b) v = static_cast<std::uint8_t>(bit(rng));
    out.push_back(is_pilot_subcarrier(cfg, k) ? pilot_value(cfg, k) : Qam16::map(b, 0));
  }
  return out;
}

/// One entry of the active discrete alphabet with its bit label.
struct AlphabetEntry {
  EigenPair pair;
  Bits label;
};

inline std::vector<AlphabetEntry> discrete_alphabet(const ModulationConfig& cfg) {
  std::vector<AlphabetEntry> out;
  if (cfg.scheme == Scheme::continuous_d1) {
    out.push_back({cfg.d1_pairs[0], {0}});
    out.push_back({cfg.d1_pairs[1], {1}});
  } else if (cfg.scheme == Scheme::continuous_d2) {
    if (cfg.d2_full_alphabet) {
      for (const auto& p : cfg.d2_pairs) out.push_back({p, {}});
    } else {
      // Two Gray bits pick lambda_1, one bit picks the outer lambda_2 values.
      for (unsigned i1 = 0; i1 < 4; ++i1)
        for (unsigned b2 = 0; b2 < 2; ++b2) {
          AlphabetEntry e{cfg.d2_pairs[3 * i1 + (b2 ? 2 : 0)], {}};
          gray_bits(i1, 2, e.label);
          e.label.push_back(static_cast<std::uint8_t>(b2));
          out.push_back(std::move(e));
        }
    }
  }
  return out;
}

inline std::size_t label_bits(const ModulationConfig& cfg) {
  if (cfg.scheme == Scheme::continuous_d1) return 1;
  if (cfg.scheme == Scheme::continuous_d2) return cfg.d2_full_alphabet ? 0 : 3;
  return 0;
}

inline std::size_t discrete_bits(const ModulationConfig& cfg) {
  return has_discrete(cfg.scheme) ? label_bits(cfg) + 4 : 0;
}

inline std::size_t bits_per_symbol(const ModulationConfig& cfg) { return continuous_bits(cfg) + discrete_bits(cfg); }

/// Spectral amplitudes that center the two solitons at -offset and +offset.
/// An isolated soliton centered at t_c has q_d = 2 eta exp(-2 i lambda t_c);
/// the left one is seen through the right one, which contributes the
/// squared factor ((z_l - conj z_r) / (z_l - z_r))^2. Off-axis eigenvalues
/// (as detected at the receiver) give the matching reference phases.
inline std::array<cplx, 2> soliton_amplitudes(const EigenPair& p, double offset) {
  const double el = p.left.imag(), er = p.right.imag();
  if (!(el > 0.0) || !(er > 0.0)) throw InvalidArgument("soliton_amplitudes: eigenvalues must lie in the upper half plane");
  const cplx f = (p.left - std::conj(p.right)) / (p.left - p.right);
  return {2.0 * el * std::exp(2.0 * kI * p.left * offset) * f * f, 2.0 * er * std::exp(-2.0 * kI * p.right * offset)};
}

struct DiscreteChoice {
  std::size_t entry = 0;
  std::array<std::uint8_t, 4> phase_bits{};
};

/// Transmitted symbol: carried bits and its nonlinear spectrum.
struct SymbolFrame {
  Bits bits;
  cvec continuous_symbols;
  std::optional<DiscreteChoice> discrete_choice;
  DiscreteSpectrum discrete;
  bool pilot = false;
};

/// Maps continuous bits to the N subcarrier symbols (pilots inserted).
inline cvec map_subcarriers(const Bits& bits, std::size_t offset, const ModulationConfig& cfg) {
  cvec c;
  std::size_t pos = offset;
  for (int k : subcarrier_indices(cfg)) {
    if (is_pilot_subcarrier(cfg, k)) {
      c.push_back(pilot_value(cfg, k));
    } else {
      c.push_back(Qam16::map(bits, pos));
      pos += Qam16::bits_per_symbol;
    }
  }
  return c;
}

/// q_c(lambda) = A sum_k C_k sinc(T_c lambda / pi + k) on `grid`.
inline ContinuousSpectrum continuous_from_symbols(const cvec& symbols, const ModulationConfig& cfg,
                                                  const std::vector<double>& grid = default_lambda_grid()) {
  const auto idx = subcarrier_indices(cfg);
  if (symbols.size() != idx.size()) throw InvalidArgument("continuous_from_symbols: one symbol per subcarrier required");
  cvec v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    cplx acc{};
    for (std::size_t j = 0; j < idx.size(); ++j) acc += symbols[j] * SincCombKernel::sinc(cfg.t_c * grid[i] / kPi + idx[j]);
    v[i] = cfg.amplitude * acc;
  }
  return ContinuousSpectrum(grid, std::move(v));
}

inline ContinuousSpectrum encode_continuous(const Bits& bits, const ModulationConfig& cfg) {
  if (bits.size() != continuous_bits(cfg)) throw InvalidArgument("encode_continuous: wrong number of bits");
  return continuous_from_symbols(map_subcarriers(bits, 0, cfg), cfg);
}

inline DiscreteSpectrum encode_discrete(const DiscreteChoice& choice, const ModulationConfig& cfg) {
  const auto alpha = discrete_alphabet(cfg);
  if (choice.entry >= alpha.size()) throw InvalidArgument("encode_discrete: index outside the alphabet");
  const auto& p = alpha[choice.entry].pair;
  const auto amp = soliton_amplitudes(p, cfg.soliton_offset);
  const auto& b = choice.phase_bits;
  return DiscreteSpectrum({{p.left, amp[0] * std::polar(1.0, Qpsk::phase(b[0], b[1]))},
                           {p.right, amp[1] * std::polar(1.0, Qpsk::phase(b[2], b[3]))}});
}

/// Builds a data frame from bits_per_symbol(cfg) bits. With the full D2
/// alphabet the pair index is passed separately.
inline SymbolFrame encode_symbol(const Bits& bits, const ModulationConfig& cfg, std::size_t d2_index = 0) {
  if (bits.size() != bits_per_symbol(cfg)) throw InvalidArgument("encode_symbol: wrong number of bits");
  SymbolFrame f;
  f.bits = bits;
  f.continuous_symbols = map_subcarriers(bits, 0, cfg);
  if (has_discrete(cfg.scheme)) {
    std::size_t pos = continuous_bits(cfg);
    const auto alpha = discrete_alphabet(cfg);
    DiscreteChoice ch;
    if (cfg.scheme == Scheme::continuous_d2 && cfg.d2_full_alphabet) {
      ch.entry = d2_index;
    } else {
      const std::size_t nl = label_bits(cfg);
      const auto it = std::find_if(alpha.begin(), alpha.end(), [&](const AlphabetEntry& e) {
        return std::equal(e.label.begin(), e.label.end(), bits.begin() + static_cast<std::ptrdiff_t>(pos));
      });
      ch.entry = static_cast<std::size_t>(it - alpha.begin());
      pos += nl;
    }
    for (std::size_t i = 0; i < 4; ++i) ch.phase_bits[i] = bits[pos + i];
    f.discrete = encode_discrete(ch, cfg);
    f.discrete_choice = ch;
  }
  return f;
}

/// Pilot frame: known continuous symbols and the discrete pairs in turn with zero phases.
inline SymbolFrame pilot_frame(const ModulationConfig& cfg, std::size_t counter) {
  SymbolFrame f;
  f.pilot = true;
  f.continuous_symbols = pilot_symbol_values(cfg);
  if (has_discrete(cfg.scheme)) {
    DiscreteChoice ch;
    ch.entry = counter % discrete_alphabet(cfg).size();
    f.discrete = encode_discrete(ch, cfg);
    f.discrete_choice = ch;
  }
  return f;
}

inline NonlinearSpectrum tx_spectrum(const SymbolFrame& f, const ModulationConfig& cfg) {
  return {continuous_from_symbols(f.continuous_symbols, cfg), f.discrete};
}

/// Normalized time-domain symbol on the centered window of length T_s.
inline Synthesis modulate(const SymbolFrame& f, const ModulationConfig& cfg) {
  const TimeWindow w = cfg.window();
  const std::size_t n = cfg.samples_per_symbol();
  if (cfg.scheme == Scheme::linear_ofdm) {
    // Time-limited inverse of q_lin(lambda) = -conj(int q exp(2i lambda t) dt).
    const auto idx = subcarrier_indices(cfg);
    cvec q(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = w.t_start + (static_cast<double>(i) + 0.5) * cfg.dt;
      if (std::abs(t) >= 0.5 * cfg.t_c) continue;
      cplx acc{};
      for (std::size_t j = 0; j < idx.size(); ++j)
        acc += std::conj(f.continuous_symbols[j]) * std::exp(kI * (2.0 * kPi * idx[j] * t / cfg.t_c));
      q[i] = -cfg.amplitude / cfg.t_c * acc;
    }
    return {ComplexEnvelope(std::move(q), cfg.dt, w.t_start + 0.5 * cfg.dt, UnitSystem::normalized), 0.0};
  }
  SynthesisOptions opt;
  opt.oversample = cfg.tx_oversample;
  const SincCombKernel kernel(cfg.amplitude, cfg.t_c, subcarrier_indices(cfg), f.continuous_symbols,
                              f.discrete.eigenvalues());
  std::function<cplx(double)> k;
  if (cfg.amplitude > 0.0) k = std::cref(kernel);
  return synthesize_with_kernel(k, f.discrete, w, cfg.dt, opt, kernel.support_right());
}

/// Raw receiver measurements of one symbol.
struct SymbolObservation {
  /// q_c at the subcarrier points after the exp(+4i lambda^2 L) back-rotation.
  cvec subcarriers;
  std::vector<cplx> eigenvalues;
  std::vector<cplx> amplitudes;
};

inline cvec linear_spectrum_at(const ComplexEnvelope& s, const std::vector<double>& lambdas) {
  cvec out(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    cplx acc{};
    for (std::size_t n = 0; n < s.size(); ++n) acc += s.samples[n] * std::exp(kI * (2.0 * lambdas[i] * s.time(n)));
    out[i] = -std::conj(acc * s.dt);
  }
  return out;
}

/// Eigenvalue seeds: every distinct eigenvalue of the alphabet.
inline std::vector<cplx> eigen_seeds(const ModulationConfig& cfg) {
  std::vector<cplx> seeds;
  for (const auto& e : discrete_alphabet(cfg))
    for (cplx l : {e.pair.left, e.pair.right})
      if (std::none_of(seeds.begin(), seeds.end(), [&](cplx s) { return std::abs(s - l) < 1e-9; })) seeds.push_back(l);
  return seeds;
}

/// Nonlinear (or, for the OFDM baseline, linear) analysis of a received
/// normalized symbol; `length` is the normalized link length.
inline SymbolObservation observe(const ComplexEnvelope& rx, const ModulationConfig& cfg, double length) {
  detail::require_normalized(rx, "observe");
  const auto lambdas = subcarrier_lambdas(cfg);
  SymbolObservation obs;
  if (cfg.scheme == Scheme::linear_ofdm) {
    obs.subcarriers = linear_spectrum_at(rx, lambdas);
  } else {
    const ComplexEnvelope fine = oversampled(rx, cfg.rx_oversample);
    obs.subcarriers = continuous_at(fine, lambdas);
    if (has_discrete(cfg.scheme)) {
      EigenSearchOptions opt;
      opt.rank_seeds = true;
      opt.max_roots = 3;
      const auto found = find_eigenvalues(fine, eigen_seeds(cfg), opt);
      for (cplx l : found.roots) {
        obs.eigenvalues.push_back(l);
        obs.amplitudes.push_back(forward_backward_amplitude(fine, l).amplitude);
      }
    }
  }
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    obs.subcarriers[i] *= std::exp(kI * (4.0 * lambdas[i] * lambdas[i] * length));
  return obs;
}

/// Pilot-trained one-tap equalizer and discrete phase offsets.
struct Equalizer {
  cvec taps;
  /// Residual phase per eigenvalue, keyed by the eigenvalue imaginary part.
  std::map<double, cplx> discrete_rotation;
};

/// Common phase estimate: pilot tones first, then one decision-directed pass
/// over every subcarrier (pilots keep their known values).
inline cplx common_phase(const cvec& equalized, const ModulationConfig& cfg) {
  const auto idx = subcarrier_indices(cfg);
  cplx acc{};
  for (std::size_t j = 0; j < idx.size(); ++j)
    if (is_pilot_subcarrier(cfg, idx[j])) acc += equalized[j] * std::conj(pilot_value(cfg, idx[j]));
  if (std::abs(acc) == 0.0) return 1.0;
  const cplx first = acc / std::abs(acc);
  cplx dd{};
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const cplx ref = is_pilot_subcarrier(cfg, idx[j]) ? pilot_value(cfg, idx[j])
                                                      : Qam16::nearest(equalized[j] * std::conj(first));
    dd += equalized[j] * std::conj(ref);
  }
  return std::abs(dd) > 0.0 ? dd / std::abs(dd) : first;
}

struct PairDecision {
  std::size_t entry = 0;
  /// Indices of the observed roots matched to (left, right) of the entry.
  std::array<std::size_t, 2> roots{};
  bool erasure = true;
};

/// Pair decision: minimize |d sum|^2 + w |d diff|^2 over the alphabet with
/// roots ordered by imaginary part; entries with the same eigenvalue set are
/// told apart by log |q_d| against the designed amplitudes.
inline PairDecision decide_pair(const std::vector<cplx>& eigs, const std::vector<cplx>& amps,
                                const ModulationConfig& cfg) {
  PairDecision best;
  if (eigs.size() < 2) return best;
  const auto alpha = discrete_alphabet(cfg);
  double best_d = std::numeric_limits<double>::infinity(), best_amp = best_d;
  for (std::size_t i = 0; i < eigs.size(); ++i)
    for (std::size_t j = 0; j < eigs.size(); ++j) {
      if (i == j || eigs[i].imag() > eigs[j].imag()) continue;
      for (std::size_t e = 0; e < alpha.size(); ++e) {
        const auto& p = alpha[e].pair;
        const bool left_low = p.left.imag() <= p.right.imag();
        const cplx lo = left_low ? p.left : p.right, hi = left_low ? p.right : p.left;
        const cplx ds = (eigs[i] + eigs[j]) - (lo + hi);
        const cplx dd = (eigs[j] - eigs[i]) - (hi - lo);
        const double d = std::norm(ds) + cfg.pair_weight * std::norm(dd);
        const auto amp = soliton_amplitudes(p, cfg.soliton_offset);
        const std::size_t li = left_low ? i : j, ri = left_low ? j : i;
        const double da = std::pow(std::log(std::abs(amps[li]) / std::abs(amp[0])), 2) +
                          std::pow(std::log(std::abs(amps[ri]) / std::abs(amp[1])), 2);
        const bool tie = std::abs(d - best_d) <= 1e-12 * std::max(1.0, best_d);
        if (d < best_d - 1e-12 * std::max(1.0, best_d) || (tie && da < best_amp)) {
          best_d = d;
          best_amp = da;
          best = {e, {li, ri}, false};
        }
      }
    }
  return best;
}

inline cplx discrete_back_rotation(cplx designed_lambda, double length) {
  return std::exp(kI * (4.0 * designed_lambda * designed_lambda * length));
}

/// Unit reference phases of the matched roots, predicted from the detected
/// eigenvalues and the designed soliton centers.
inline std::array<cplx, 2> phase_reference(const std::vector<cplx>& eigenvalues, const PairDecision& pair,
                                           const ModulationConfig& cfg) {
  const auto a = soliton_amplitudes({eigenvalues[pair.roots[0]], eigenvalues[pair.roots[1]]}, cfg.soliton_offset);
  return {a[0] / std::abs(a[0]), a[1] / std::abs(a[1])};
}

/// Trains the equalizer on pilot symbols (least squares per subcarrier,
/// averaged over neighbouring subcarriers) and the per-eigenvalue discrete
/// phase offsets on their discrete parts.
inline Equalizer train_equalizer(const std::vector<SymbolObservation>& obs, const std::vector<SymbolFrame>& frames,
                                 const ModulationConfig& cfg, double length) {
  if (obs.size() != frames.size()) throw InvalidArgument("train_equalizer: observation/frame count mismatch");
  const std::size_t n = static_cast<std::size_t>(cfg.n_subcarriers);
  cvec num(n, cplx{});
  std::vector<double> den(n, 0.0);
  std::size_t n_pilots = 0;
  for (std::size_t s = 0; s < obs.size(); ++s) {
    if (!frames[s].pilot) continue;
    ++n_pilots;
    for (std::size_t j = 0; j < n; ++j) {
      num[j] += obs[s].subcarriers[j] * std::conj(frames[s].continuous_symbols[j]);
      den[j] += std::norm(frames[s].continuous_symbols[j]);
    }
  }
  if (n_pilots == 0) throw InvalidArgument("train_equalizer: no pilot symbols");
  cvec ls(n);
  for (std::size_t j = 0; j < n; ++j) ls[j] = num[j] / den[j];
  // Intra-symbol frequency averaging of the least-squares taps.
  Equalizer eq;
  eq.taps.resize(n);
  const auto span = static_cast<std::ptrdiff_t>(cfg.equalizer_span);
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(n); ++j) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, j - span);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, j + span);
    cplx acc{};
    for (std::ptrdiff_t i = lo; i <= hi; ++i) acc += ls[static_cast<std::size_t>(i)];
    eq.taps[static_cast<std::size_t>(j)] = acc / static_cast<double>(hi - lo + 1);
  }
  if (!has_discrete(cfg.scheme)) return eq;

  const auto alpha = discrete_alphabet(cfg);
  std::map<double, cplx> acc;
  for (std::size_t s = 0; s < obs.size(); ++s) {
    if (!frames[s].pilot) continue;
    cvec y(n);
    for (std::size_t j = 0; j < n; ++j) y[j] = obs[s].subcarriers[j] / eq.taps[j];
    const cplx cpe = common_phase(y, cfg);
    const auto dec = decide_pair(obs[s].eigenvalues, obs[s].amplitudes, cfg);
    const auto& ch = *frames[s].discrete_choice;
    if (dec.erasure || dec.entry != ch.entry) continue;
    const auto& tx = frames[s].discrete.points;
    const auto ref = phase_reference(obs[s].eigenvalues, dec, cfg);
    for (std::size_t k = 0; k < 2; ++k) {
      const cplx z = tx[k].lambda;
      const cplx qpsk = std::polar(1.0, Qpsk::phase(ch.phase_bits[2 * k], ch.phase_bits[2 * k + 1]));
      const cplx r = obs[s].amplitudes[dec.roots[k]] * discrete_back_rotation(z, length) * std::conj(cpe) *
                     std::conj(ref[k] * qpsk);
      acc[z.imag()] += r / std::abs(r);
    }
  }
  for (const auto& [key, v] : acc) eq.discrete_rotation[key] = std::abs(v) > 0.0 ? v / std::abs(v) : cplx{1.0};
  return eq;
}

/// Receiver output for one symbol.
struct DecodedSymbol {
  Bits bits;
  /// Equalized and phase-corrected subcarrier values.
  cvec subcarriers;
  cplx common_phase{1.0};
  PairDecision pair;
  /// Corrected spectral amplitudes of the matched roots (left, right).
  std::array<cplx, 2> amplitudes{};
};

inline DecodedSymbol decode_continuous(const SymbolObservation& obs, const Equalizer& eq, const ModulationConfig& cfg) {
  const auto idx = subcarrier_indices(cfg);
  if (eq.taps.size() != idx.size()) throw InvalidArgument("decode_continuous: equalizer is not trained");
  DecodedSymbol d;
  d.subcarriers.resize(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) d.subcarriers[j] = obs.subcarriers[j] / eq.taps[j];
  d.common_phase = common_phase(d.subcarriers, cfg);
  for (auto& v : d.subcarriers) v *= std::conj(d.common_phase);
  for (std::size_t j = 0; j < idx.size(); ++j)
    if (!is_pilot_subcarrier(cfg, idx[j])) Qam16::slice(d.subcarriers[j], d.bits);
  return d;
}

/// Continuous decision followed by the discrete pair and QPSK decisions.
/// On an erasure (fewer than two roots) the discrete bits are zero-filled.
inline DecodedSymbol decode_symbol(const SymbolObservation& obs, const Equalizer& eq, const ModulationConfig& cfg,
                                   double length) {
  DecodedSymbol d = decode_continuous(obs, eq, cfg);
  if (!has_discrete(cfg.scheme)) return d;
  d.pair = decide_pair(obs.eigenvalues, obs.amplitudes, cfg);
  const auto alpha = discrete_alphabet(cfg);
  if (d.pair.erasure) {
    d.bits.insert(d.bits.end(), discrete_bits(cfg), 0);
    return d;
  }
  const auto& e = alpha[d.pair.entry];
  d.bits.insert(d.bits.end(), e.label.begin(), e.label.end());
  const std::array<cplx, 2> designed{e.pair.left, e.pair.right};
  const auto ref = phase_reference(obs.eigenvalues, d.pair, cfg);
  for (std::size_t k = 0; k < 2; ++k) {
    cplx r = obs.amplitudes[d.pair.roots[k]] * discrete_back_rotation(designed[k], length) * std::conj(d.common_phase);
    r *= std::conj(ref[k]);
    const auto it = eq.discrete_rotation.find(designed[k].imag());
    if (it != eq.discrete_rotation.end()) r *= std::conj(it->second);
    d.amplitudes[k] = r;
    const auto b = Qpsk::slice(std::arg(r));
    d.bits.push_back(b[0]);
    d.bits.push_back(b[1]);
  }
  return d;
}

/// Normalized eigenvalue errors (e_1, e_2) of one symbol, ordered by imaginary part.
struct EigenError {
  cplx e1, e2;
  /// (lambda_1 + lambda_2 estimated) / (lambda_1 + lambda_2) - 1.
  cplx eps;
  cplx lambda1_hat, lambda2_hat;
};

struct Metrics {
  double ber = 0.0;
  double q_factor_db = 0.0;
  double evm = 0.0;
  std::size_t n_bits = 0;
  std::size_t n_errors = 0;
  double ber_continuous = 0.0;
  double q_continuous_db = 0.0;
  std::size_t n_bits_continuous = 0;
  std::size_t n_errors_continuous = 0;
  std::size_t n_bits_discrete = 0;
  std::size_t n_errors_discrete = 0;
  std::size_t n_pair_errors = 0;
  std::size_t n_erasures = 0;
  std::vector<EigenError> eigen_errors;
  cplx corr_e1e2{};
  double var_eps = 0.0;
};

inline std::optional<EigenError> eigen_error(const SymbolObservation& obs, const DecodedSymbol& d,
                                             const SymbolFrame& f) {
  if (d.pair.erasure || !f.discrete_choice) return std::nullopt;
  cplx a = obs.eigenvalues[d.pair.roots[0]], b = obs.eigenvalues[d.pair.roots[1]];
  if (a.imag() > b.imag()) std::swap(a, b);
  cplx l1 = f.discrete.points[0].lambda, l2 = f.discrete.points[1].lambda;
  if (l1.imag() > l2.imag()) std::swap(l1, l2);
  const double s = (l1 + l2).imag();
  return EigenError{(a - l1) / s, (b - l2) / s, (a + b) / (l1 + l2) - 1.0, a, b};
}

/// Bit, EVM and eigenvalue statistics of decoded data symbols.
inline Metrics evaluate(const std::vector<SymbolFrame>& frames, const std::vector<SymbolObservation>& obs,
                        const std::vector<DecodedSymbol>& decoded, const ModulationConfig& cfg) {
  if (frames.size() != decoded.size() || obs.size() != decoded.size())
    throw InvalidArgument("evaluate: frame/observation/decision count mismatch");
  Metrics m;
  const std::size_t nc = continuous_bits(cfg);
  const auto idx = subcarrier_indices(cfg);
  cvec rx, tx;
  for (std::size_t s = 0; s < frames.size(); ++s) {
    const auto& f = frames[s];
    const auto& d = decoded[s];
    if (f.pilot) continue;
    for (std::size_t i = 0; i < f.bits.size(); ++i) {
      const bool err = d.bits[i] != f.bits[i];
      if (i < nc) {
        ++m.n_bits_continuous;
        m.n_errors_continuous += err;
      } else {
        ++m.n_bits_discrete;
        m.n_errors_discrete += err;
      }
    }
    for (std::size_t j = 0; j < idx.size(); ++j)
      if (!is_pilot_subcarrier(cfg, idx[j])) {
        rx.push_back(d.subcarriers[j]);
        tx.push_back(f.continuous_symbols[j]);
      }
    if (f.discrete_choice) {
      if (d.pair.erasure) {
        ++m.n_erasures;
        ++m.n_pair_errors;
      } else if (d.pair.entry != f.discrete_choice->entry) {
        ++m.n_pair_errors;
      }
      if (auto e = eigen_error(obs[s], d, f)) m.eigen_errors.push_back(*e);
    }
  }
  m.n_bits = m.n_bits_continuous + m.n_bits_discrete;
  m.n_errors = m.n_errors_continuous + m.n_errors_discrete;
  auto ratio = [](std::size_t e, std::size_t n) { return n ? std::min(0.5, static_cast<double>(e) / static_cast<double>(n)) : 0.0; };
  m.ber = ratio(m.n_errors, m.n_bits);
  m.q_factor_db = ber_to_q(m.ber);
  m.ber_continuous = ratio(m.n_errors_continuous, m.n_bits_continuous);
  m.q_continuous_db = ber_to_q(m.ber_continuous);
  if (!rx.empty()) m.evm = evm(rx, tx);
  if (m.eigen_errors.size() >= 2) {
    cvec e1, e2;
    double sq = 0.0;
    for (const auto& e : m.eigen_errors) {
      e1.push_back(e.e1);
      e2.push_back(e.e2);
    }
    m.corr_e1e2 = complex_correlation(e1, e2);
    cplx mu{};
    for (const auto& e : m.eigen_errors) mu += e.eps;
    mu /= static_cast<double>(m.eigen_errors.size());
    for (const auto& e : m.eigen_errors) sq += std::norm(e.eps - mu);
    m.var_eps = sq / static_cast<double>(m.eigen_errors.size() - 1);
  }
  return m;
}

}  // namespace nfdm
