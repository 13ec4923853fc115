// harness.hpp - run configuration, burst simulation, power sweeps and result files.
#pragma once

#include "nfdm/channel.hpp"
#include "nfdm/core.hpp"
#include "nfdm/metrics.hpp"
#include "nfdm/modem.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace nfdm {

struct RunConfig {
  ModulationConfig modem;
  LinkDescription link;
  double t0_ns = 1.0;
  std::vector<Scheme> schemes{Scheme::continuous, Scheme::continuous_d1, Scheme::continuous_d2};
  /// Continuous-part launch powers.
  std::vector<double> pc_dbm{-14, -13, -12, -11, -10, -9, -8, -7, -6};
  std::size_t symbols_per_point = 200;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool dump = true;

  NormalizationMap effective_map() const { return effective_normalization(link, t0_ns); }
  double length() const { return normalized_length(link, t0_ns); }
};

namespace harness_detail {

inline std::string join_schemes(const std::vector<Scheme>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + scheme_name(s[i]);
  return out;
}

inline std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  os << std::setprecision(12);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace harness_detail

/// Flat key/value tree with sections modem, link, sweep.
inline boost::property_tree::ptree to_ptree(const RunConfig& c) {
  using harness_detail::join;
  boost::property_tree::ptree t;
  const auto& m = c.modem;
  t.put("modem.n_subcarriers", m.n_subcarriers);
  t.put("modem.qam_order", m.qam_order);
  t.put("modem.t_c", m.t_c);
  t.put("modem.t_s", m.t_s);
  t.put("modem.guard", m.guard);
  t.put("modem.pilot_subcarriers", join(m.pilot_subcarriers));
  t.put("modem.pilot_period", m.pilot_period);
  t.put("modem.equalizer_span", m.equalizer_span);
  t.put("modem.d2_full_alphabet", m.d2_full_alphabet);
  t.put("modem.pair_weight", m.pair_weight);
  t.put("modem.soliton_offset", m.soliton_offset);
  t.put("modem.dt", m.dt);
  t.put("modem.tx_oversample", m.tx_oversample);
  t.put("modem.rx_oversample", m.rx_oversample);
  t.put("modem.t0_ns", c.t0_ns);
  const auto& l = c.link;
  t.put("link.span_length_km", l.span_length_km);
  t.put("link.spans_per_loop", l.spans_per_loop);
  t.put("link.loop_count", l.loop_count);
  t.put("link.alpha_db_per_km", l.alpha_db_per_km);
  t.put("link.noise_figure_db", l.noise_figure_db);
  t.put("link.amplifier_gain_db", l.amplifier_gain_db ? harness_detail::num(*l.amplifier_gain_db) : "auto");
  t.put("link.adc_bits", l.adc_bits ? std::to_string(*l.adc_bits) : "none");
  t.put("link.adc_full_scale_rms", l.adc_full_scale_rms);
  t.put("link.step_km", l.step_km);
  t.put("link.beta2_ps2_per_km", l.beta2_ps2_per_km);
  t.put("link.gamma_per_w_km", l.gamma_per_w_km);
  t.put("link.wavelength_nm", l.wavelength_nm);
  t.put("link.ase", l.ase);
  t.put("link.obpf_bandwidth_ghz", l.obpf_bandwidth_ghz);
  t.put("link.linewidth_hz", l.linewidth_hz);
  t.put("link.oversample", l.oversample);
  t.put("sweep.schemes", harness_detail::join_schemes(c.schemes));
  t.put("sweep.pc_dbm", join(c.pc_dbm));
  t.put("sweep.symbols_per_point", c.symbols_per_point);
  t.put("sweep.seed", c.seed);
  t.put("sweep.threads", c.threads);
  t.put("sweep.dump", c.dump);
  return t;
}

inline std::string config_text(const RunConfig& c) {
  std::ostringstream os;
  boost::property_tree::write_ini(os, to_ptree(c));
  return os.str();
}

/// Overlays the keys present in `t` on the defaults in `c`.
inline RunConfig from_ptree(const boost::property_tree::ptree& t, RunConfig c = {}) {
  using harness_detail::split;
  auto& m = c.modem;
  m.n_subcarriers = t.get("modem.n_subcarriers", m.n_subcarriers);
  m.qam_order = t.get("modem.qam_order", m.qam_order);
  m.t_c = t.get("modem.t_c", m.t_c);
  m.t_s = t.get("modem.t_s", m.t_s);
  m.guard = t.get("modem.guard", m.guard);
  if (auto v = t.get_optional<std::string>("modem.pilot_subcarriers")) {
    m.pilot_subcarriers.clear();
    for (const auto& s : split(*v)) m.pilot_subcarriers.push_back(std::stoi(s));
  }
  m.pilot_period = t.get("modem.pilot_period", m.pilot_period);
  m.equalizer_span = t.get("modem.equalizer_span", m.equalizer_span);
  m.d2_full_alphabet = t.get("modem.d2_full_alphabet", m.d2_full_alphabet);
  m.pair_weight = t.get("modem.pair_weight", m.pair_weight);
  m.soliton_offset = t.get("modem.soliton_offset", m.soliton_offset);
  m.dt = t.get("modem.dt", m.dt);
  m.tx_oversample = t.get("modem.tx_oversample", m.tx_oversample);
  m.rx_oversample = t.get("modem.rx_oversample", m.rx_oversample);
  c.t0_ns = t.get("modem.t0_ns", c.t0_ns);
  auto& l = c.link;
  l.span_length_km = t.get("link.span_length_km", l.span_length_km);
  l.spans_per_loop = t.get("link.spans_per_loop", l.spans_per_loop);
  l.loop_count = t.get("link.loop_count", l.loop_count);
  l.alpha_db_per_km = t.get("link.alpha_db_per_km", l.alpha_db_per_km);
  l.noise_figure_db = t.get("link.noise_figure_db", l.noise_figure_db);
  if (auto v = t.get_optional<std::string>("link.amplifier_gain_db"))
    l.amplifier_gain_db = (*v == "auto") ? std::nullopt : std::optional<double>(std::stod(*v));
  if (auto v = t.get_optional<std::string>("link.adc_bits"))
    l.adc_bits = (*v == "none") ? std::nullopt : std::optional<int>(std::stoi(*v));
  l.adc_full_scale_rms = t.get("link.adc_full_scale_rms", l.adc_full_scale_rms);
  l.step_km = t.get("link.step_km", l.step_km);
  l.beta2_ps2_per_km = t.get("link.beta2_ps2_per_km", l.beta2_ps2_per_km);
  l.gamma_per_w_km = t.get("link.gamma_per_w_km", l.gamma_per_w_km);
  l.wavelength_nm = t.get("link.wavelength_nm", l.wavelength_nm);
  l.ase = t.get("link.ase", l.ase);
  l.obpf_bandwidth_ghz = t.get("link.obpf_bandwidth_ghz", l.obpf_bandwidth_ghz);
  l.linewidth_hz = t.get("link.linewidth_hz", l.linewidth_hz);
  l.oversample = t.get("link.oversample", l.oversample);
  if (auto v = t.get_optional<std::string>("sweep.schemes")) {
    c.schemes.clear();
    for (const auto& s : split(*v)) c.schemes.push_back(parse_scheme(s));
  }
  if (auto v = t.get_optional<std::string>("sweep.pc_dbm")) {
    c.pc_dbm.clear();
    for (const auto& s : split(*v)) c.pc_dbm.push_back(std::stod(s));
  }
  c.symbols_per_point = t.get("sweep.symbols_per_point", c.symbols_per_point);
  c.seed = t.get("sweep.seed", c.seed);
  c.threads = t.get("sweep.threads", c.threads);
  c.dump = t.get("sweep.dump", c.dump);
  c.modem.validate();
  c.link.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  boost::property_tree::ptree t;
  try {
    boost::property_tree::read_ini(path, t);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  return from_ptree(t);
}

inline double dbm_to_w(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double w_to_dbm(double w) { return 10.0 * std::log10(w / 1e-3); }

/// Mean normalized power of the discrete part: 4 sum Im(lambda) / T_s over the alphabet.
inline double discrete_power_normalized(const ModulationConfig& cfg) {
  const auto alpha = discrete_alphabet(cfg);
  if (alpha.empty()) return 0.0;
  double e = 0.0;
  for (const auto& a : alpha) e += 4.0 * (a.pair.left.imag() + a.pair.right.imag());
  return e / static_cast<double>(alpha.size()) / cfg.t_s;
}

/// Continuous-spectrum scale for a continuous launch power: the normalized
/// power of the sinc comb is A^2 N / (T_c T_s) for unit-energy symbols.
inline double amplitude_for_power(double pc_w, const ModulationConfig& cfg, const NormalizationMap& map) {
  const double p = pc_w / map.power_w();
  return std::sqrt(p * cfg.t_c * cfg.t_s / cfg.n_subcarriers);
}

/// Frames and receiver observations of one burst (one pilot plus pilot_period data symbols).
struct BurstResult {
  std::vector<SymbolFrame> frames;
  std::vector<SymbolObservation> observations;
  double leaked_energy_fraction = 0.0;
};

/// Builds, transmits and analyses one burst. The bit stream and channel
/// noise come from sub-seeds of (seed, stream, burst) so that bursts can be
/// processed in any order.
inline BurstResult simulate_burst(const ModulationConfig& cfg, const LinkDescription& link, double t0_ns,
                                  std::uint64_t seed, std::uint64_t stream, std::size_t burst) {
  const NormalizationMap map = effective_normalization(link, t0_ns);
  const double length = normalized_length(link, t0_ns);
  BurstResult out;
  std::mt19937_64 bits_rng(sub_seed(seed, stream, burst, 1));
  std::uniform_int_distribution<int> bit(0, 1);
  std::uniform_int_distribution<std::size_t> pair12(0, 11);
  out.frames.push_back(pilot_frame(cfg, burst));
  for (int s = 0; s < cfg.pilot_period; ++s) {
    Bits b(bits_per_symbol(cfg));
    for (auto& v : b) v = static_cast<std::uint8_t>(bit(bits_rng));
    const std::size_t idx = (cfg.scheme == Scheme::continuous_d2 && cfg.d2_full_alphabet) ? pair12(bits_rng) : 0;
    out.frames.push_back(encode_symbol(b, cfg, idx));
  }
  const std::size_t ns = cfg.samples_per_symbol();
  cvec tx;
  tx.reserve(ns * out.frames.size());
  for (const auto& f : out.frames) {
    const Synthesis syn = modulate(f, cfg);
    out.leaked_energy_fraction = std::max(out.leaked_energy_fraction, syn.leaked_energy_fraction);
    const ComplexEnvelope phys = denormalize(syn.signal, map);
    tx.insert(tx.end(), phys.samples.begin(), phys.samples.end());
  }
  const double dt_s = cfg.dt * map.t0_s();
  ComplexEnvelope sig(std::move(tx), dt_s, 0.5 * dt_s, UnitSystem::physical);
  sig = propagate_link(sig, link, sub_seed(seed, stream, burst, 2));
  if (link.linewidth_hz > 0.0) {
    std::mt19937_64 rng(sub_seed(seed, stream, burst, 3));
    sig = apply_phase_noise(sig, link.linewidth_hz, rng);
  }
  sig = adc_quantize(sig, link.adc_bits, {FullScalePolicy::Kind::rms_multiple, link.adc_full_scale_rms});
  const ComplexEnvelope rx = normalize(sig, map);
  const double t0 = cfg.window().t_start + 0.5 * cfg.dt;
  for (std::size_t s = 0; s < out.frames.size(); ++s) {
    cvec part(rx.samples.begin() + static_cast<std::ptrdiff_t>(s * ns),
              rx.samples.begin() + static_cast<std::ptrdiff_t>((s + 1) * ns));
    out.observations.push_back(observe(ComplexEnvelope(std::move(part), cfg.dt, t0, UnitSystem::normalized), cfg, length));
  }
  return out;
}

/// Runs `count` bursts on up to `threads` workers; results are indexed by burst.
inline std::vector<BurstResult> simulate_bursts(const ModulationConfig& cfg, const LinkDescription& link, double t0_ns,
                                                std::uint64_t seed, std::uint64_t stream, std::size_t count,
                                                std::size_t threads) {
  std::vector<BurstResult> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t b; (b = next++) < count;) {
      try {
        out[b] = simulate_burst(cfg, link, t0_ns, seed, stream, b);
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, count));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Decoded run at one operating point.
struct PointRun {
  std::vector<SymbolFrame> frames;
  std::vector<SymbolObservation> observations;
  std::vector<DecodedSymbol> decoded;
  Metrics metrics;
  double leaked_energy_fraction = 0.0;
};

/// Simulates at least `symbols` data symbols, trains the equalizer on all
/// pilot symbols, then decodes.
inline PointRun run_point(const ModulationConfig& cfg, const LinkDescription& link, double t0_ns, std::size_t symbols,
                          std::uint64_t seed, std::uint64_t stream, std::size_t threads = 1) {
  cfg.validate();
  const auto per = static_cast<std::size_t>(cfg.pilot_period);
  const std::size_t bursts = std::max<std::size_t>(1, (symbols + per - 1) / per);
  PointRun run;
  for (auto& b : simulate_bursts(cfg, link, t0_ns, seed, stream, bursts, threads)) {
    run.frames.insert(run.frames.end(), b.frames.begin(), b.frames.end());
    run.observations.insert(run.observations.end(), b.observations.begin(), b.observations.end());
    run.leaked_energy_fraction = std::max(run.leaked_energy_fraction, b.leaked_energy_fraction);
  }
  const double length = normalized_length(link, t0_ns);
  const Equalizer eq = train_equalizer(run.observations, run.frames, cfg, length);
  for (const auto& o : run.observations) run.decoded.push_back(decode_symbol(o, eq, cfg, length));
  run.metrics = evaluate(run.frames, run.observations, run.decoded, cfg);
  return run;
}

struct SweepResult {
  Scheme scheme = Scheme::continuous;
  double pc_dbm = 0.0;
  /// Total launch power P_c + P_d.
  double launch_power_dbm = 0.0;
  double q_continuous_db = 0.0;
  double ber_continuous = 0.0;
  std::optional<double> q_discrete_db;
  std::optional<cplx> corr_e1e2;
  std::size_t n_bits = 0;
  std::size_t n_errors = 0;
  /// Fewer than 100 errors behind the BER.
  bool provisional = false;
  double evm = 0.0;
  std::size_t pair_errors = 0;
  std::string failure;
};

/// Stream id of a (scheme, power index) point.
inline std::uint64_t point_stream(Scheme s, std::size_t power_index) {
  return (static_cast<std::uint64_t>(s) + 1) * 1000003ULL + power_index;
}

inline SweepResult summarize(Scheme scheme, double pc_dbm, const ModulationConfig& cfg, const NormalizationMap& map,
                             const Metrics& m) {
  SweepResult r;
  r.scheme = scheme;
  r.pc_dbm = pc_dbm;
  r.launch_power_dbm = w_to_dbm(dbm_to_w(pc_dbm) + discrete_power_normalized(cfg) * map.power_w());
  r.ber_continuous = m.ber_continuous;
  r.q_continuous_db = m.n_errors_continuous ? m.q_continuous_db : q_lower_bound(m.n_bits_continuous);
  r.n_bits = m.n_bits_continuous;
  r.n_errors = m.n_errors_continuous;
  r.provisional = m.n_errors_continuous < 100;
  r.evm = m.evm;
  r.pair_errors = m.n_pair_errors;
  if (has_discrete(scheme)) {
    const double ber_d = m.n_bits_discrete ? static_cast<double>(m.n_errors_discrete) / m.n_bits_discrete : 0.0;
    r.q_discrete_db = m.n_errors_discrete ? ber_to_q(std::min(0.5, ber_d)) : q_lower_bound(m.n_bits_discrete);
    r.corr_e1e2 = m.corr_e1e2;
  }
  return r;
}

/// FNV-1a hash of the configuration text, as 16 hex digits.
inline std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_text(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline void write_results_csv(const std::filesystem::path& p, const std::vector<SweepResult>& rows) {
  using harness_detail::num;
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << "scheme,pc_dbm,launch_power_dbm,q_continuous_db,ber_continuous,q_discrete_db,corr_re,corr_im,n_bits,n_errors,"
       "provisional,evm,pair_errors,failure\n";
  for (const auto& r : rows) {
    f << scheme_name(r.scheme) << ',' << num(r.pc_dbm) << ',' << num(r.launch_power_dbm) << ','
      << num(r.q_continuous_db) << ',' << num(r.ber_continuous) << ','
      << (r.q_discrete_db ? num(*r.q_discrete_db) : "") << ',' << (r.corr_e1e2 ? num(r.corr_e1e2->real()) : "")
      << ',' << (r.corr_e1e2 ? num(r.corr_e1e2->imag()) : "") << ',' << r.n_bits << ',' << r.n_errors << ','
      << (r.provisional ? 1 : 0) << ',' << num(r.evm) << ',' << r.pair_errors << ',' << r.failure << '\n';
  }
  if (!f) throw std::runtime_error("write failed: " + p.string());
}

/// Per-point scatter records: constellation, eigenvalues with (e1, e2), spectral-amplitude phases.
inline void dump_artifacts(const std::filesystem::path& dir, const std::string& tag, const PointRun& run,
                           const ModulationConfig& cfg) {
  using harness_detail::num;
  std::filesystem::create_directories(dir);
  const auto idx = subcarrier_indices(cfg);
  std::ofstream c(dir / (tag + "_constellation.csv"));
  c << "symbol,subcarrier,rx_re,rx_im,tx_re,tx_im\n";
  std::ofstream e;
  std::ofstream ph;
  if (has_discrete(cfg.scheme)) {
    e.open(dir / (tag + "_eigenvalues.csv"));
    e << "symbol,lambda1_re,lambda1_im,lambda2_re,lambda2_im,e1_re,e1_im,e2_re,e2_im\n";
    ph.open(dir / (tag + "_phases.csv"));
    ph << "symbol,phase1,phase2,tx_phase1,tx_phase2\n";
  }
  std::size_t sym = 0;
  for (std::size_t s = 0; s < run.frames.size(); ++s) {
    const auto& f = run.frames[s];
    if (f.pilot) continue;
    const auto& d = run.decoded[s];
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (is_pilot_subcarrier(cfg, idx[j])) continue;
      c << sym << ',' << idx[j] << ',' << num(d.subcarriers[j].real()) << ',' << num(d.subcarriers[j].imag()) << ','
        << num(f.continuous_symbols[j].real()) << ',' << num(f.continuous_symbols[j].imag()) << '\n';
    }
    if (has_discrete(cfg.scheme)) {
      const auto err = eigen_error(run.observations[s], d, f);
      if (err) {
        e << sym << ',' << num(err->lambda1_hat.real()) << ',' << num(err->lambda1_hat.imag()) << ','
          << num(err->lambda2_hat.real()) << ',' << num(err->lambda2_hat.imag()) << ',' << num(err->e1.real()) << ','
          << num(err->e1.imag()) << ',' << num(err->e2.real()) << ',' << num(err->e2.imag()) << '\n';
        const auto& b = f.discrete_choice->phase_bits;
        ph << sym << ',' << num(std::arg(d.amplitudes[0])) << ',' << num(std::arg(d.amplitudes[1])) << ','
           << num(Qpsk::phase(b[0], b[1])) << ',' << num(Qpsk::phase(b[2], b[3])) << '\n';
      }
    }
    ++sym;
  }
  if (!c || (e.is_open() && !e) || (ph.is_open() && !ph)) throw std::runtime_error("write failed in " + dir.string());
}

/// Full sweep over schemes and continuous powers. Point failures are
/// recorded and the sweep continues. With a non-empty `out_dir` the results
/// go to out_dir/<config hash>/.
inline std::vector<SweepResult> run_sweep(const RunConfig& c, const std::filesystem::path& out_dir = {},
                                          const std::function<void(const SweepResult&)>& progress = {}) {
  c.modem.validate();
  c.link.validate();
  const NormalizationMap map = c.effective_map();
  std::filesystem::path dir;
  if (!out_dir.empty()) {
    dir = out_dir / config_hash(c);
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "config.ini") << config_text(c);
  }
  std::vector<SweepResult> rows;
  for (Scheme scheme : c.schemes) {
    for (std::size_t i = 0; i < c.pc_dbm.size(); ++i) {
      ModulationConfig cfg = c.modem;
      cfg.scheme = scheme;
      cfg.amplitude = amplitude_for_power(dbm_to_w(c.pc_dbm[i]), cfg, map);
      SweepResult r;
      try {
        const PointRun run = run_point(cfg, c.link, c.t0_ns, c.symbols_per_point, c.seed, point_stream(scheme, i), c.threads);
        r = summarize(scheme, c.pc_dbm[i], cfg, map, run.metrics);
        if (!dir.empty() && c.dump) {
          std::ostringstream tag;
          tag << scheme_name(scheme) << "_p" << i;
          dump_artifacts(dir / "points", tag.str(), run, cfg);
        }
      } catch (const std::exception& ex) {
        r.scheme = scheme;
        r.pc_dbm = c.pc_dbm[i];
        r.launch_power_dbm = w_to_dbm(dbm_to_w(c.pc_dbm[i]) + discrete_power_normalized(cfg) * map.power_w());
        r.failure = ex.what();
        for (auto& ch : r.failure)
          if (ch == ',' || ch == '\n') ch = ';';
      }
      rows.push_back(r);
      if (progress) progress(r);
    }
  }
  if (!dir.empty()) write_results_csv(dir / "results.csv", rows);
  return rows;
}

struct Threshold {
  Scheme scheme = Scheme::continuous;
  double p_opt_dbm = 0.0;
  double q_peak_db = 0.0;
  /// Peak at the sweep edge or too few points: no fit.
  bool edge = false;
};

/// P_opt from the vertex of a least-squares parabola over the highest-Q point
/// of Q versus launch power and up to two neighbours on each side. Needs at
/// least five points and an interior peak.
inline Threshold fit_threshold(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw InvalidArgument("fit_threshold: size mismatch");
  Threshold t;
  if (p.size() < 5) {
    t.edge = true;
    return t;
  }
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::size_t best = 0;
  for (std::size_t i = 1; i < order.size(); ++i)
    if (q[order[i]] > q[order[best]]) best = i;
  t.p_opt_dbm = p[order[best]];
  t.q_peak_db = q[order[best]];
  if (best == 0 || best + 1 == order.size()) {
    t.edge = true;
    return t;
  }
  const std::size_t lo = best >= 2 ? best - 2 : 0;
  const std::size_t hi = std::min(order.size() - 1, best + 2);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(hi - lo + 1), 3);
  Eigen::VectorXd y(m.rows());
  for (std::size_t i = lo; i <= hi; ++i) {
    const double x = p[order[i]];
    m.row(static_cast<Eigen::Index>(i - lo)) << x * x, x, 1.0;
    y(static_cast<Eigen::Index>(i - lo)) = q[order[i]];
  }
  const Eigen::Vector3d c = m.colPivHouseholderQr().solve(y);
  if (!(c(0) < 0.0)) return t;
  t.p_opt_dbm = -c(1) / (2.0 * c(0));
  t.q_peak_db = c(2) - c(1) * c(1) / (4.0 * c(0));
  return t;
}

/// Per-scheme thresholds of a sweep table (points with failures are skipped).
inline std::vector<Threshold> report_threshold(const std::vector<SweepResult>& table) {
  std::vector<Threshold> out;
  std::vector<Scheme> seen;
  for (const auto& r : table)
    if (std::find(seen.begin(), seen.end(), r.scheme) == seen.end()) seen.push_back(r.scheme);
  for (Scheme s : seen) {
    std::vector<double> p, q;
    for (const auto& r : table)
      if (r.scheme == s && r.failure.empty()) {
        p.push_back(r.launch_power_dbm);
        q.push_back(r.q_continuous_db);
      }
    Threshold t = fit_threshold(p, q);
    t.scheme = s;
    out.push_back(t);
  }
  return out;
}

struct ThresholdShift {
  Scheme from = Scheme::continuous;
  Scheme to = Scheme::continuous;
  double shift_db = 0.0;
  /// False when either threshold is an edge or unfitted peak.
  bool valid = false;
};

/// P_opt(to) - P_opt(from) for every ordered pair of schemes in `t`.
inline std::vector<ThresholdShift> threshold_shifts(const std::vector<Threshold>& t) {
  std::vector<ThresholdShift> out;
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = i + 1; j < t.size(); ++j)
      out.push_back({t[i].scheme, t[j].scheme, t[j].p_opt_dbm - t[i].p_opt_dbm, !t[i].edge && !t[j].edge});
  return out;
}

}  // namespace nfdm
