// nfdm: command-line front end for sweeps, self-tests and configuration.
#include "nfdm/harness.hpp"
#include "nfdm/nft_forward.hpp"
#include "nfdm/nft_inverse.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <random>

using namespace nfdm;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "runs";
  std::optional<std::size_t> threads;
};

RunConfig resolve(const Common& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  return c;
}

int cmd_run(const Common& o) {
  const RunConfig c = resolve(o);
  std::cerr << "config " << config_hash(c) << ": " << c.schemes.size() << " schemes x " << c.pc_dbm.size()
            << " powers, " << c.symbols_per_point << " symbols per point\n";
  const auto rows = run_sweep(c, o.out_dir, [](const SweepResult& r) {
    std::fprintf(stderr, "  %-5s Pc %6.2f dBm  P %6.2f dBm  Q %6.2f dB  BER %.3e%s%s\n", scheme_name(r.scheme).c_str(),
                 r.pc_dbm, r.launch_power_dbm, r.q_continuous_db, r.ber_continuous, r.provisional ? " (provisional)" : "",
                 r.failure.empty() ? "" : (" FAILED: " + r.failure).c_str());
  });
  const auto th = report_threshold(rows);
  for (const auto& t : th) {
    if (t.edge)
      std::printf("%s: peak at sweep edge (P %.2f dBm, Q %.2f dB), no fit\n", scheme_name(t.scheme).c_str(),
                  t.p_opt_dbm, t.q_peak_db);
    else
      std::printf("%s: P_opt %.2f dBm, Q_peak %.2f dB\n", scheme_name(t.scheme).c_str(), t.p_opt_dbm, t.q_peak_db);
  }
  for (const auto& s : threshold_shifts(th))
    std::printf("shift %s -> %s: %s\n", scheme_name(s.from).c_str(), scheme_name(s.to).c_str(),
                s.valid ? (std::to_string(s.shift_db) + " dB").c_str() : "n/a");
  std::printf("results: %s\n", (std::filesystem::path(o.out_dir) / config_hash(c) / "results.csv").c_str());
  const bool any_failed = std::any_of(rows.begin(), rows.end(), [](const SweepResult& r) { return !r.failure.empty(); });
  return any_failed ? 2 : 0;
}

// Back-to-back synthesis and analysis on a widened window.
int cmd_roundtrip(const Common& o, std::size_t symbols, double guard, double dt) {
  const RunConfig c = resolve(o);
  bool ok = true;
  for (Scheme s : {Scheme::continuous_d1, Scheme::continuous_d2}) {
    ModulationConfig cfg = c.modem;
    cfg.scheme = s;
    cfg.guard = guard;
    cfg.t_s = cfg.t_c + 2.0 * guard;
    if (dt > 0.0) {
      // Keep the receiver grid at the configured resolution.
      const double fine = cfg.dt / static_cast<double>(cfg.rx_oversample);
      cfg.dt = dt;
      cfg.tx_oversample = 1;
      cfg.rx_oversample = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(dt / fine)));
    }
    cfg.amplitude = amplitude_for_power(dbm_to_w(-8.0), cfg, c.effective_map());
    std::mt19937_64 rng(mix_seed(c.seed));
    std::uniform_int_distribution<int> bit(0, 1);
    double worst_lambda = 0.0, worst_amp = 0.0, num = 0.0, den = 0.0;
    std::size_t missing = 0;
    for (std::size_t k = 0; k < symbols; ++k) {
      Bits b(bits_per_symbol(cfg));
      for (auto& v : b) v = static_cast<std::uint8_t>(bit(rng));
      const auto f = encode_symbol(b, cfg);
      const auto obs = observe(modulate(f, cfg).signal, cfg, 0.0);
      for (std::size_t j = 0; j < obs.subcarriers.size(); ++j) {
        const cplx ref = cfg.amplitude * f.continuous_symbols[j];
        num += std::norm(obs.subcarriers[j] - ref);
        den += std::norm(ref);
      }
      for (const auto& p : f.discrete.points) {
        auto it = std::min_element(obs.eigenvalues.begin(), obs.eigenvalues.end(),
                                   [&](cplx x, cplx y) { return std::abs(x - p.lambda) < std::abs(y - p.lambda); });
        if (it == obs.eigenvalues.end() || std::abs(*it - p.lambda) > 0.05) {
          ++missing;
          continue;
        }
        worst_lambda = std::max(worst_lambda, std::abs(*it - p.lambda));
        const cplx a = obs.amplitudes[static_cast<std::size_t>(it - obs.eigenvalues.begin())];
        worst_amp = std::max(worst_amp, std::abs(std::abs(a) / std::abs(p.amplitude) - 1.0));
      }
    }
    const double e = std::sqrt(num / den);
    const bool pass = missing == 0 && worst_lambda < 1e-4 && worst_amp < 0.01 && e < 0.01;
    ok = ok && pass;
    std::printf("%-5s %zu symbols: max |dlambda| %.2e, max ||q_d| error| %.2e, continuous EVM %.3f%%, missing %zu  %s\n",
                scheme_name(s).c_str(), symbols, worst_lambda, worst_amp, 100.0 * e, missing, pass ? "PASS" : "FAIL");
  }
  return ok ? 0 : 1;
}

ComplexEnvelope sampled(const std::function<cplx(double)>& f, double half, double dt) {
  const auto n = static_cast<std::size_t>(std::llround(2.0 * half / dt));
  cvec q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = f(-half + (static_cast<double>(i) + 0.5) * dt);
  return ComplexEnvelope(std::move(q), dt, -half + 0.5 * dt, UnitSystem::normalized);
}

bool report(const char* name, bool pass, const std::string& detail) {
  std::printf("%-44s %s  %s\n", name, pass ? "PASS" : "FAIL", detail.c_str());
  return pass;
}

// Closed-form soliton and linear-limit checks.
int cmd_oracle() {
  bool ok = true;
  char buf[256];
  for (double amp : {1.0, 3.0}) {
    // q = A sech t has eigenvalues i (A - 1/2 - k) for A - 1/2 - k > 0.
    const auto q = sampled([amp](double t) { return cplx{amp / std::cosh(t)}; }, 20.0, 0.002);
    std::vector<cplx> expected;
    for (int k = 0; amp - 0.5 - k > 0.0; ++k) expected.push_back({0.0, amp - 0.5 - k});
    std::vector<cplx> seeds;
    for (cplx e : expected) seeds.push_back(e + cplx{0.01, 0.02});
    auto found = find_eigenvalues(q, seeds).roots;
    double err = found.size() == expected.size() ? 0.0 : 1.0;
    for (cplx e : expected) {
      double best = 1.0;
      for (cplx r : found) best = std::min(best, std::abs(r - e));
      err = std::max(err, best);
    }
    std::snprintf(buf, sizeof buf, "A=%g: %zu/%zu eigenvalues, max error %.2e", amp, found.size(), expected.size(), err);
    ok &= report("sech potential eigenvalues", err < 1e-4, buf);
  }
  {
    // Fundamental soliton 2 eta sech(2 eta t) keeps its modulus over z = 1.
    const double eta = 0.5;
    const auto q = sampled([eta](double t) { return cplx{2.0 * eta / std::cosh(2.0 * eta * t)}; }, 40.0, 0.02);
    const auto out = ssfm_normalized(q, 1.0, 1e-3);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      num += std::pow(std::abs(out.samples[i]) - std::abs(q.samples[i]), 2);
      den += std::norm(q.samples[i]);
    }
    std::snprintf(buf, sizeof buf, "relative modulus drift %.2e", std::sqrt(num / den));
    ok &= report("soliton shape over unit length", std::sqrt(num / den) < 5e-3, buf);
  }
  {
    // Weak pulse: q_c approaches -conj of the Fourier integral.
    const double eps = 1e-4;
    const auto q = sampled([eps](double t) { return eps * std::exp(-t * t) * std::exp(kI * 0.3 * t); }, 10.0, 0.005);
    const std::vector<double> lam{-2.0, -0.5, 0.0, 0.7, 1.5};
    const auto nl = continuous_at(q, lam);
    double worst = 0.0;
    for (std::size_t i = 0; i < lam.size(); ++i) {
      const double w = 2.0 * lam[i] + 0.3;
      const cplx ft = eps * std::sqrt(kPi) * std::exp(-w * w / 4.0);
      worst = std::max(worst, std::abs(nl[i] + std::conj(ft)) / std::abs(ft));
    }
    std::snprintf(buf, sizeof buf, "max relative deviation %.2e", worst);
    ok &= report("linear limit of the continuous spectrum", worst < 1e-3, buf);
  }
  {
    // Energy of a Darboux-dressed pulse against the trace formula.
    const auto seed = sampled([](double t) { return cplx{0.4 * std::exp(-t * t / 2.0)}; }, 16.0, 0.005);
    const auto q = darboux_add(seed, {{{0.1, 1.2}, cplx{1.0, 0.5}}});
    const auto spec = full_nft(q, {{0.1, 1.25}}, uniform_grid(-40.0, 40.0, 4001));
    const double e_time = signal_energy(q);
    const double e_spec = spectrum_energy(spec).value;
    std::snprintf(buf, sizeof buf, "time %.6f, spectrum %.6f", e_time, e_spec);
    ok &= report("trace formula on a mixed spectrum", std::abs(e_spec / e_time - 1.0) < 1e-3, buf);
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear frequency-division multiplexing link simulator"};
  app.require_subcommand(1);
  Common opts;
  auto add_common = [&opts](CLI::App* s) {
    s->add_option("--config", opts.config, "INI configuration file")->check(CLI::ExistingFile);
    s->add_option("--seed", opts.seed, "Master seed");
    s->add_option("--out-dir", opts.out_dir, "Output directory")->capture_default_str();
    s->add_option("--threads", opts.threads, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto* run = app.add_subcommand("run", "Power sweep with result and scatter files");
  add_common(run);
  auto* rt = app.add_subcommand("roundtrip", "Synthesis/analysis self-test without a channel");
  add_common(rt);
  std::size_t symbols = 100;
  double guard = 7.0;
  double rt_dt = 0.005;
  rt->add_option("--symbols", symbols, "Symbols per scheme")->capture_default_str();
  rt->add_option("--guard", guard, "Guard interval per side (normalized)")->capture_default_str();
  rt->add_option("--dt", rt_dt, "Synthesis sample spacing (normalized); 0 keeps the configured grid")
      ->capture_default_str();
  app.add_subcommand("oracle", "Closed-form soliton and linear-limit checks");
  auto* pc = app.add_subcommand("print-config", "Print the effective configuration");
  add_common(pc);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(opts);
    if (*rt) return cmd_roundtrip(opts, symbols, guard, rt_dt);
    if (app.got_subcommand("oracle")) return cmd_oracle();
    if (*pc) {
      std::cout << config_text(resolve(opts));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
