#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spintorque/spintorque.hpp"

namespace fs = std::filesystem;
using namespace spintorque;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitPartial = 4;

struct Common {
  std::string config;
  std::string out = ".";
  std::vector<std::string> sets;
  int threads = 1;
  bool quiet = false;
  std::string input;  // analyze only
};

struct Run {
  RunConfig cfg;
  std::string seed_source = "config";
  fs::path out;
  Manifest manifest;
  std::vector<std::string> outputs;
  bool quiet = false;
  int threads = 1;

  void write(const std::string& name, const std::string& content) {
    write_atomic(out / name, content);
    outputs.push_back(name);
  }
  void say(const std::string& s) const {
    if (!quiet) std::cout << s << "\n";
  }
};

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Run prepare(const Common& c, const std::string& command) {
  Run r;
  KeyValues kv = c.config.empty() ? KeyValues{} : parse_config_file(c.config);
  if (const char* env = std::getenv(kSeedEnv)) {
    kv["sim.seed"] = env;
    r.seed_source = std::string("env ") + kSeedEnv;
  }
  for (const auto& s : c.sets) set_entry(kv, s, "--set");
  if (!c.input.empty()) kv["analyze.input"] = c.input;
  r.cfg = load_config(kv);
  r.out = c.out;
  r.quiet = c.quiet;
  r.threads = std::max(1, c.threads);
  fs::create_directories(r.out);

  std::string overrides;
  for (const auto& s : c.sets) overrides += (overrides.empty() ? "" : "; ") + s;
  r.manifest.add("tool_version", SPINTORQUE_VERSION);
  r.manifest.add("command", command);
  r.manifest.add("config_path", c.config.empty() ? "(none)" : c.config);
  r.manifest.add("config_hash", hex(fnv1a(canonical_text(kv))));
  r.manifest.add("seed", std::to_string(r.cfg.params.sim.seed));
  r.manifest.add("seed_source", r.seed_source);
  r.manifest.add("overrides", overrides.empty() ? "(none)" : overrides);
  return r;
}

void finish(Run& r, double wall) {
  std::string outs;
  for (const auto& o : r.outputs) outs += (outs.empty() ? "" : ", ") + o;
  r.manifest.add("outputs", outs);
  r.manifest.add("wall_time_s", format_number(wall));
  for (const auto& [k, v] : r.cfg.entries) r.manifest.add("cfg." + k, v);
  write_atomic(r.out / "manifest.txt", r.manifest.str());
}

std::string num(double x) { return format_number(x); }
double hz(double w) { return w / constants::two_pi; }

// ---------------------------------------------------------------------------

SystemState initial_state(const ValidatedParams& p, const RunConfig& cfg, std::uint64_t seed) {
  double center = cfg.init.phi;
  if (cfg.init.relative) center += operating_angle(p, cfg.protocol.at(0.0, p.drive()));
  if (cfg.init.thermal) {
    SystemState s = thermal_initial_state(p, cfg.protocol, seed, center);
    s.mech.phi_dot += cfg.init.phi_dot;
    return s;
  }
  return steady_initial_state(p, cfg.protocol, center, cfg.init.phi_dot);
}

CsvTable trajectory_table(const Trajectory& tr) {
  CsvTable t;
  t.meta = {{"kind", "trajectory"}, {"model", to_string(tr.model)}, {"seed", std::to_string(tr.seed)},
            {"sample_interval_s", num(tr.sample_interval())}};
  t.header = {"t", "phi", "phi_dot", "pop0", "pop_m1", "pop_p1", "re_S", "im_S"};
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto& s = tr.states[k];
    t.add_row({num(tr.times[k]), num(s.mech.phi), num(s.mech.phi_dot), num(s.spin.pop0), num(s.spin.pop_m1),
               num(s.spin.pop_p1), num(s.spin.coherence.real()), num(s.spin.coherence.imag())});
  }
  return t;
}

int cmd_simulate(Run& r) {
  const ValidatedParams p = validate(r.cfg.params);
  for (const auto& w : p.warnings()) std::cerr << "warning: " << w << "\n";
  const auto& cfg = r.cfg;
  if (p.sim().n_traj == 1) {
    const Trajectory tr = integrate_trajectory(initial_state(p, cfg, p.sim().seed), p, cfg.protocol, p.sim());
    r.write("trajectory.csv", trajectory_table(tr).str());
    r.say("wrote " + std::to_string(tr.size()) + " samples");
    return kExitOk;
  }
  EnsembleOptions opt;
  opt.threads = r.threads;
  opt.initial = [&](int, std::uint64_t seed) { return initial_state(p, cfg, seed); };
  std::string first;
  opt.on_trajectory = [&](int k, const Trajectory& tr) {
    if (k == 0) first = trajectory_table(tr).str();
  };
  const EnsembleResult res = run_ensemble(p, cfg.protocol, p.sim(), opt);
  r.write("trajectory.csv", first);
  CsvTable t;
  t.meta = {{"kind", "ensemble"}, {"n_traj", std::to_string(res.stats.n_traj)},
            {"pooled_var_phi", num(res.stats.pooled_var_phi())}};
  t.header = {"t", "mean_phi", "var_phi", "mean_pop0", "var_pop0", "mean_pop_m1", "var_pop_m1", "mean_pop_p1",
              "var_pop_p1"};
  const auto& s = res.stats;
  for (std::size_t k = 0; k < s.times.size(); ++k)
    t.add_row({num(s.times[k]), num(s.mean_phi[k]), num(s.var_phi[k]), num(s.mean_pop0[k]), num(s.var_pop0[k]),
               num(s.mean_pop_m1[k]), num(s.var_pop_m1[k]), num(s.mean_pop_p1[k]), num(s.var_pop_p1[k])});
  r.write("ensemble.csv", t.str());
  r.say("ensemble of " + std::to_string(s.n_traj) + " members, equipartition T = " +
        num(equipartition_temperature(s.pooled_var_phi(), p.mech())) + " K");
  return kExitOk;
}

std::vector<double> grid(double from, double to, int points) {
  if (points < 1) throw ConfigError("grid needs at least one point");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) g[k] = points == 1 ? from : from + (to - from) * k / (points - 1);
  return g;
}

int cmd_sweep(Run& r) {
  const ValidatedParams p = validate(r.cfg.params);
  const auto& sw = r.cfg.sweep;
  const auto values = grid(sw.from, sw.to, sw.points);
  CsvTable t;
  int ok = 0;
  if (sw.axis == "detuning") {
    const auto rows = detuning_sweep(p, p.drive().rabi_omega, values, r.threads);
    t.meta = {{"kind", "detuning_sweep"}, {"rabi_hz", num(hz(p.drive().rabi_omega))}};
    t.header = {"detuning_hz", "effective_detuning_hz", "omega_eff_hz", "gamma_eff_hz", "re_xi", "im_xi", "status"};
    for (const auto& row : rows) {
      const bool good = row.dynamics.has_value();
      ok += good;
      t.add_row({num(hz(row.detuning)), good ? num(hz(row.dynamics->effective_detuning)) : "",
                 good ? num(hz(row.dynamics->omega_eff)) : "",
                 good ? num(hz(row.dynamics->gamma_eff)) : "", num(row.xi.real()), num(row.xi.imag()), row.status});
    }
  } else {
    // Rabi axis: stationary oscillator energy, thermal below threshold, limit cycle above.
    t.meta = {{"kind", "rabi_sweep"}, {"detuning_hz", num(hz(p.drive().detuning))}};
    t.header = {"rabi_khz", "omega_eff_hz", "gamma_eff_hz", "re_xi", "im_xi", "energy_j", "status"};
    const double kT = constants::k_boltzmann * p.mech().temperature;
    for (double rabi : values) {
      const DriveState d{rabi, p.drive().detuning};
      try {
        const auto e = effective_dynamics(p, d);
        double energy = 0.0;
        if (e.dynamics.gamma_eff > 0) {
          energy = kT * p.mech().gamma / e.dynamics.gamma_eff;
        } else {
          const auto q = detail::with_t1(p, p.spin().t1, 0.0);
          const double width = q.sigma() / std::abs(q.spin().zeeman_slope);
          const double amp = detail::settle_amplitude(q, rabi, operating_angle(q, d) + 0.1 * width, ThresholdOptions{},
                                                      false);
          energy = 0.5 * p.mech().inertia * e.dynamics.omega_eff * e.dynamics.omega_eff * amp * amp;
        }
        ++ok;
        t.add_row({num(rabi / constants::two_pi / 1e3), num(hz(e.dynamics.omega_eff)), num(hz(e.dynamics.gamma_eff)),
                   num(e.response.xi.real()), num(e.response.xi.imag()), num(energy), "ok"});
      } catch (const NumericalError& err) {
        t.add_row({num(rabi / constants::two_pi / 1e3), "", "", "", "", "", err.what()});
      }
    }
  }
  r.write("sweep.csv", t.str());
  const double frac = static_cast<double>(ok) / values.size();
  r.say(std::to_string(ok) + "/" + std::to_string(values.size()) + " sweep points succeeded");
  return frac >= 0.8 ? kExitOk : kExitPartial;
}

int cmd_analyze(Run& r) {
  const auto& a = r.cfg.analyze;
  if (a.input.empty()) throw ConfigError("analyze needs analyze.input or --input");
  const CsvData data = read_csv(a.input);
  const auto& t_all = data["t"];
  const auto& phi_all = data["phi"];
  std::vector<double> t, phi;
  for (std::size_t k = 0; k < t_all.size(); ++k)
    if (t_all[k] >= a.t_start) { t.push_back(t_all[k]); phi.push_back(phi_all[k]); }
  if (t.size() < 2) throw TooShort("analysis window has fewer than two samples");
  const double dt = t[1] - t[0];
  std::ostringstream report;

  if (a.mode == "psd") {
    const Psd psd = welch_psd(phi, dt, std::min<std::size_t>(a.segment_len, phi.size()));
    CsvTable ps;
    ps.meta = {{"kind", "psd"}, {"segments", std::to_string(psd.segment_count)}, {"window", psd.window_name},
               {"resolution_bw_hz", num(psd.resolution_bw)}};
    ps.header = {"freq_hz", "psd"};
    for (std::size_t k = 0; k < psd.freqs.size(); ++k) ps.add_row({num(psd.freqs[k]), num(psd.values[k])});
    r.write("psd.csv", ps.str());
    const PsdFit fit = fit_psd_lorentzian(psd);
    CsvTable ft;
    ft.header = {"omega_phi_hz", "gamma_hz", "amplitude_scale", "sd_omega_phi_hz", "sd_gamma_hz", "residual_norm"};
    ft.add_row({num(hz(fit.omega_phi_hat)), num(hz(fit.gamma_hat)), num(fit.amplitude_scale),
                num(hz(std::sqrt(fit.covariance(0, 0)))), num(hz(std::sqrt(fit.covariance(1, 1)))),
                num(fit.residual_norm)});
    r.write("psd_fit.csv", ft.str());
    report << "PSD fit: omega_phi/2pi = " << hz(fit.omega_phi_hat) << " Hz, gamma/2pi = " << hz(fit.gamma_hat)
           << " Hz\n";
  } else if (a.mode == "ringdown") {
    const RingdownFit fit = fit_ringdown(t, phi, a.two_modes);
    CsvTable ft;
    ft.header = {"A1", "omega_eff_hz", "phase1", "gamma_eff_hz", "A2", "omega2_hz", "phase2", "gamma2_hz", "A0",
                 "residual_norm"};
    ft.add_row({num(fit.A1), num(hz(fit.omega_eff)), num(fit.phase1), num(hz(fit.gamma_eff)), num(fit.A2),
                num(hz(fit.omega2)), num(fit.phase2), num(hz(fit.gamma2)), num(fit.A0), num(fit.residual_norm)});
    r.write("ringdown_fit.csv", ft.str());
    report << "ring-down fit: omega_eff/2pi = " << hz(fit.omega_eff) << " Hz, gamma_eff/2pi = " << hz(fit.gamma_eff)
           << " Hz\n";
  } else if (a.mode == "histogram") {
    const HistogramStats h = amplitude_histogram(phi, a.bins);
    CsvTable ht;
    ht.meta = {{"kind", "histogram"}, {"excess_kurtosis", num(h.excess_kurtosis)},
               {"bimodality_flag", h.bimodality_flag ? "true" : "false"}};
    ht.header = {"bin_lo", "bin_hi", "count"};
    for (std::size_t k = 0; k < h.counts.size(); ++k)
      ht.add_row({num(h.bin_edges[k]), num(h.bin_edges[k + 1]), std::to_string(h.counts[k])});
    r.write("histogram.csv", ht.str());
    report << "histogram: excess kurtosis = " << h.excess_kurtosis
           << ", bimodal = " << (h.bimodality_flag ? "true" : "false") << "\n";
  } else if (a.mode == "temperature") {
    double temperature = 0.0;
    if (std::find(data.header.begin(), data.header.end(), "var_phi") != data.header.end()) {
      // Ensemble file: pool the per-time variances over the window.
      const auto& tv = data["t"];
      const auto& mean = data["mean_phi"];
      const auto& var = data["var_phi"];
      double s2 = 0, m = 0;
      std::size_t n = 0;
      for (std::size_t k = 0; k < tv.size(); ++k)
        if (tv[k] >= a.t_start) { s2 += var[k] + mean[k] * mean[k]; m += mean[k]; ++n; }
      m /= n;
      temperature = equipartition_temperature(s2 / n - m * m, r.cfg.params.mech);
    } else {
      temperature = equipartition_temperature(phi, r.cfg.params.mech);
    }
    CsvTable tt;
    tt.header = {"temperature_k"};
    tt.add_row({num(temperature)});
    r.write("temperature.csv", tt.str());
    report << "equipartition temperature: " << temperature << " K\n";
  } else {
    throw ConfigError("analyze.mode must be psd, ringdown, histogram or temperature");
  }
  r.write("report.txt", report.str());
  r.say(report.str());
  return kExitOk;
}

int cmd_bistability(Run& r) {
  const ValidatedParams p = validate(r.cfg.params);
  const auto& b = r.cfg.bistability;
  const BistabilityCurve curve = bistability_curve(p, p.drive().rabi_omega, grid(b.from, b.to, b.points));
  CsvTable t;
  t.meta = {{"kind", "bistability"}, {"rabi_hz", num(hz(p.drive().rabi_omega))}};
  if (auto w = curve.window()) {
    t.meta.emplace_back("window_lo_hz", num(hz(w->first)));
    t.meta.emplace_back("window_hi_hz", num(hz(w->second)));
  }
  t.header = {"detuning_hz", "root1", "stab1", "root2", "stab2", "root3", "stab3"};
  for (std::size_t k = 0; k < curve.detunings.size(); ++k) {
    std::vector<std::string> row{num(hz(curve.detunings[k]))};
    for (std::size_t j = 0; j < 3; ++j) {
      if (j < curve.branches[k].size()) {
        row.push_back(num(curve.branches[k][j].phi_root));
        row.push_back(to_string(curve.branches[k][j].stability));
      } else {
        row.push_back("");
        row.push_back("");
      }
    }
    t.add_row(row);
  }
  r.write("bistability.csv", t.str());
  r.say(curve.window() ? "bistable window found" : "no bistable window on the grid");
  return kExitOk;
}

int cmd_hysteresis(Run& r) {
  const ValidatedParams p = validate(r.cfg.params);
  const auto& h = r.cfg.hysteresis;
  const HysteresisResult res = hysteresis_sweep(p, p.drive().rabi_omega, h.from, h.to, h.rate, h.points);
  CsvTable t;
  t.meta = {{"kind", "hysteresis"}, {"loop_area_rad_hz", num(hz(res.loop_area))}};
  if (res.switch_forward) t.meta.emplace_back("switch_forward_hz", num(hz(*res.switch_forward)));
  if (res.switch_backward) t.meta.emplace_back("switch_backward_hz", num(hz(*res.switch_backward)));
  t.header = {"direction", "detuning_hz", "phi"};
  for (std::size_t k = 0; k < res.up.phi.size(); ++k) t.add_row({"forward", num(hz(res.up.detuning[k])), num(res.up.phi[k])});
  for (std::size_t k = 0; k < res.down.phi.size(); ++k)
    t.add_row({"backward", num(hz(res.down.detuning[k])), num(res.down.phi[k])});
  r.write("hysteresis.csv", t.str());
  r.say("loop area " + num(hz(res.loop_area)) + " rad*Hz");
  return kExitOk;
}

int cmd_potential(Run& r) {
  const ValidatedParams p = validate(r.cfg.params);
  const auto& g = r.cfg.potential;
  const DriveState d{p.drive().rabi_omega, p.drive().detuning};
  const EffectivePotential pot = effective_potential(p, d, g.from, g.to, g.points);
  CsvTable t;
  t.meta = {{"kind", "potential"}};
  if (pot.double_well()) {
    const double kT = constants::k_boltzmann * p.mech().temperature;
    const KramersResult k = kramers_rates(pot, p);
    t.meta.emplace_back("phi_A", num(*pot.phi_A));
    t.meta.emplace_back("phi_B", num(*pot.phi_B));
    t.meta.emplace_back("phi_C", num(*pot.phi_C));
    t.meta.emplace_back("U_A_over_kT", num(*pot.depth_A / kT));
    t.meta.emplace_back("U_B_over_kT", num(*pot.depth_B / kT));
    CsvTable kt;
    kt.header = {"rate_ab", "rate_ba", "residence_ratio", "omega_a_hz", "omega_b_hz", "omega_c_hz"};
    kt.add_row({num(k.rate_AB), num(k.rate_BA), num(k.residence_ratio), num(hz(k.omega_A)), num(hz(k.omega_B)),
                num(hz(k.omega_C))});
    r.write("kramers.csv", kt.str());
  }
  t.header = {"phi", "U_j"};
  for (std::size_t k = 0; k < pot.phi.size(); ++k) t.add_row({num(pot.phi[k]), num(pot.U[k])});
  r.write("potential.csv", t.str());
  r.say(pot.double_well() ? "double well" : "single well");
  return kExitOk;
}

int cmd_threshold(Run& r) {
  const ValidatedParams p = validate(r.cfg.params);
  const auto& th = r.cfg.threshold;
  ThresholdOptions opt;
  opt.verify = th.verify;
  CsvTable t;
  t.meta = {{"kind", "threshold"}, {"detuning_hz", num(hz(p.drive().detuning))}};
  t.header = {"inv_t1_khz", "omega_th_khz"};
  const auto rabi = grid(th.rabi_min, th.rabi_max, th.rabi_points);
  for (double inv_t1 : th.inv_t1) {
    const LasingThreshold res = lasing_threshold(p, rabi, 1.0 / inv_t1, opt);
    if (th.verify)
      t.meta.emplace_back("verified_inv_t1_" + num(inv_t1 / 1e3) + "khz", res.verified ? "true" : "false");
    t.add_row({num(inv_t1 / 1e3), num(res.rabi / constants::two_pi / 1e3)});
  }
  r.write("threshold.csv", t.str());
  r.say("thresholds written");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spin-torque libration simulator"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Run configuration (key = value)");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--set", common.sets, "Override a config entry, key=value");
    sub->add_option("--threads", common.threads, "Worker threads");
    sub->add_flag("--quiet", common.quiet, "No summary on stdout");
  };
  struct Cmd { const char* name; const char* help; int (*fn)(Run&); };
  const std::vector<Cmd> cmds = {
      {"simulate", "Integrate trajectories", cmd_simulate},
      {"sweep", "Linear-response sweep over detuning or Rabi frequency", cmd_sweep},
      {"analyze", "PSD, ring-down, histogram or temperature analysis of a trajectory CSV", cmd_analyze},
      {"bistability", "Steady angles over a detuning grid", cmd_bistability},
      {"hysteresis", "Noise-free detuning sweep up and down", cmd_hysteresis},
      {"potential", "Effective potential and Kramers rates", cmd_potential},
      {"threshold", "Lasing threshold versus 1/T1", cmd_threshold},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    if (std::string(c.name) == "analyze") sub->add_option("--input", common.input, "Input CSV");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  for (std::size_t k = 0; k < cmds.size(); ++k) {
    if (!subs[k]->parsed()) continue;
    try {
      const auto t0 = std::chrono::steady_clock::now();
      Run run = prepare(common, cmds[k].name);
      const int code = cmds[k].fn(run);
      finish(run, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      return code;
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfig;
    } catch (const NumericalError& e) {
      std::cerr << "numerical error: " << e.what() << "\n";
      return kExitNumerical;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return kExitConfig;
}
