#pragma once

// Flat `key = value` run configuration. Keys carry their unit in the suffix;
// oscillation frequencies are given in Hz/kHz/MHz and converted to rad/s here.
// Unknown keys are errors. `#` starts a comment.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spintorque/constants.hpp"
#include "spintorque/errors.hpp"
#include "spintorque/model.hpp"
#include "spintorque/protocol.hpp"

namespace spintorque {

using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

}  // namespace detail

inline void set_entry(KeyValues& kv, std::string_view line, const std::string& where) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
  const std::string key = detail::trim(line.substr(0, eq));
  const std::string value = detail::trim(line.substr(eq + 1));
  if (key.empty()) throw ConfigError(where + ": empty key");
  kv[key] = value;
}

inline KeyValues parse_config_text(const std::string& text, const std::string& name = "config") {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    set_entry(kv, line, name + ":" + std::to_string(n));
  }
  return kv;
}

inline KeyValues parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

/// Canonical text (sorted `key=value` lines) used for hashing and manifests.
inline std::string canonical_text(const KeyValues& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
  return s;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Typed configuration

struct InitSpec {
  double phi = 0.0;      // rad, offset from the operating angle when `relative`
  double phi_dot = 0.0;  // rad/s
  bool thermal = false;  // draw (phi, phi') from the bath around `phi`
  bool relative = false; // phi measured from the stable steady angle
};

struct SweepSpec {
  std::string axis = "detuning";  // detuning | rabi
  double from = 0.0, to = 0.0;    // rad/s
  int points = 1;
};

struct AnalyzeSpec {
  std::string mode = "psd";  // psd | ringdown | histogram | temperature
  std::string input;
  int segment_len = 4096;
  int bins = 60;
  bool two_modes = false;
  double t_start = 0.0;      // s
};

struct RangeSpec {
  double from = 0.0, to = 0.0;
  int points = 101;
};

struct HysteresisSpec {
  double from = 0.0, to = 0.0;  // rad/s
  double rate = 0.0;            // rad/s per s
  int points = 2000;
};

struct ThresholdSpec {
  std::vector<double> inv_t1 = {1e3, 2e3, 3e3};  // 1/s
  double rabi_min = 0.0, rabi_max = 0.0;          // rad/s
  int rabi_points = 40;
  bool verify = true;
};

struct RunConfig {
  PhysicalParams params;
  Protocol protocol = Protocol::always_on();
  InitSpec init;
  SweepSpec sweep;
  AnalyzeSpec analyze;
  RangeSpec bistability;
  HysteresisSpec hysteresis;
  RangeSpec potential{-0.1, 0.1, 2001};
  ThresholdSpec threshold;
  KeyValues entries;  // effective key/values after overrides
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* b = v.data();
  const char* e = v.data() + v.size();
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  const auto [ptr, ec] = std::from_chars(b, e, out);
  if (ec != std::errc{} || ptr != e) throw ConfigError("key " + key + ": not a number: '" + v + "'");
  return out;
}

inline long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError("key " + key + ": not an integer: '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key " + key + ": not a boolean: '" + v + "'");
}

inline Segment parse_segment(const std::string& key, const std::string& v) {
  // t_start_s, t_end_s, on|off [, detuning_mhz [, rabi_khz [, detuning_end_mhz]]]
  const auto f = split(v, ',');
  if (f.size() < 3 || f.size() > 6) throw ConfigError("key " + key + ": expected 3 to 6 comma-separated fields");
  Segment s;
  s.t_start = to_double(key, f[0]);
  s.t_end = to_double(key, f[1]);
  if (f[2] != "on" && f[2] != "off") throw ConfigError("key " + key + ": third field must be on or off");
  s.microwave_on = f[2] == "on";
  const double mhz = constants::two_pi * 1e6, khz = constants::two_pi * 1e3;
  if (f.size() > 3 && !f[3].empty()) s.detuning = to_double(key, f[3]) * mhz;
  if (f.size() > 4 && !f[4].empty()) s.rabi = to_double(key, f[4]) * khz;
  if (f.size() > 5 && !f[5].empty()) s.detuning_end = to_double(key, f[5]) * mhz;
  return s;
}

}  // namespace detail

/// Build the typed configuration. Throws ConfigError on unknown keys or bad values.
inline RunConfig load_config(const KeyValues& kv) {
  using detail::to_bool;
  using detail::to_double;
  using detail::to_int;
  const double hz = constants::two_pi, khz = constants::two_pi * 1e3, mhz = constants::two_pi * 1e6;

  RunConfig c;
  c.entries = kv;
  auto& p = c.params;
  std::string protocol_kind = "always_on";
  double switch_on = 0.0;
  int pulses = 0;
  double duty = 0.5;
  std::map<long long, Segment> segments;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto num = [&](double& dst, double scale = 1.0) -> Setter {
    return [&dst, scale](const std::string& k, const std::string& v) { dst = to_double(k, v) * scale; };
  };
  auto integer = [&](int& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = static_cast<int>(to_int(k, v)); };
  };
  auto flag = [&](bool& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = to_bool(k, v); };
  };
  auto text = [&](std::string& dst) -> Setter {
    return [&dst](const std::string&, const std::string& v) { dst = v; };
  };

  const std::map<std::string, Setter> table = {
      {"mech.inertia_kgm2", num(p.mech.inertia)},
      {"mech.omega_phi_hz", num(p.mech.omega_phi, hz)},
      {"mech.gamma_hz", num(p.mech.gamma, hz)},
      {"mech.temperature_k", num(p.mech.temperature)},
      {"spin.t2_star_s", num(p.spin.t2_star)},
      {"spin.t1_s", num(p.spin.t1)},
      {"spin.gamma_las_per_s", num(p.spin.gamma_las)},
      {"spin.n_spins", num(p.spin.n_spins)},
      {"spin.zeeman_slope_mhz_per_rad", num(p.spin.zeeman_slope, mhz)},
      {"spin.gaussian_offset_rad", num(p.spin.gaussian_offset)},
      {"spin.lineshape",
       [&](const std::string& k, const std::string& v) {
         if (v == "lorentzian") p.spin.lineshape = Lineshape::Lorentzian;
         else if (v == "gaussian") p.spin.lineshape = Lineshape::Gaussian;
         else throw ConfigError("key " + k + ": expected lorentzian or gaussian");
       }},
      {"drive.rabi_khz", num(p.drive.rabi_omega, khz)},
      {"drive.detuning_mhz", num(p.drive.detuning, mhz)},
      {"drive.torque_coeff_rad_s2",
       [&](const std::string& k, const std::string& v) { p.drive.torque_coeff = to_double(k, v); }},
      {"sim.dt_s", num(p.sim.dt)},
      {"sim.duration_s", num(p.sim.duration)},
      {"sim.n_traj", integer(p.sim.n_traj)},
      {"sim.record_stride", integer(p.sim.record_stride)},
      {"sim.seed",
       [&](const std::string& k, const std::string& v) {
         const long long s = to_int(k, v);
         if (s < 0) throw ConfigError("key " + k + ": seed must be non-negative");
         p.sim.seed = static_cast<std::uint64_t>(s);
       }},
      {"sim.model",
       [&](const std::string& k, const std::string& v) {
         if (v == "full_bloch") p.model = ModelKind::FullBloch;
         else if (v == "rate") p.model = ModelKind::RateEq;
         else throw ConfigError("key " + k + ": expected full_bloch or rate");
       }},
      {"protocol.kind", text(protocol_kind)},
      {"protocol.switch_on_s", num(switch_on)},
      {"protocol.pulses", integer(pulses)},
      {"protocol.duty", num(duty)},
      {"init.phi_rad", num(c.init.phi)},
      {"init.phi_dot_rad_s", num(c.init.phi_dot)},
      {"init.thermal", flag(c.init.thermal)},
      {"init.relative", flag(c.init.relative)},
      {"sweep.axis", text(c.sweep.axis)},
      {"sweep.from", num(c.sweep.from)},
      {"sweep.to", num(c.sweep.to)},
      {"sweep.points", integer(c.sweep.points)},
      {"analyze.mode", text(c.analyze.mode)},
      {"analyze.input", text(c.analyze.input)},
      {"analyze.segment_len", integer(c.analyze.segment_len)},
      {"analyze.bins", integer(c.analyze.bins)},
      {"analyze.two_modes", flag(c.analyze.two_modes)},
      {"analyze.t_start_s", num(c.analyze.t_start)},
      {"bistability.from_mhz", num(c.bistability.from, mhz)},
      {"bistability.to_mhz", num(c.bistability.to, mhz)},
      {"bistability.points", integer(c.bistability.points)},
      {"hysteresis.from_mhz", num(c.hysteresis.from, mhz)},
      {"hysteresis.to_mhz", num(c.hysteresis.to, mhz)},
      {"hysteresis.rate_mhz_per_s", num(c.hysteresis.rate, mhz)},
      {"hysteresis.points", integer(c.hysteresis.points)},
      {"potential.phi_min_rad", num(c.potential.from)},
      {"potential.phi_max_rad", num(c.potential.to)},
      {"potential.points", integer(c.potential.points)},
      {"threshold.inv_t1_khz",
       [&](const std::string& k, const std::string& v) {
         c.threshold.inv_t1.clear();
         for (const auto& f : detail::split(v, ',')) c.threshold.inv_t1.push_back(to_double(k, f) * 1e3);
       }},
      {"threshold.rabi_min_khz", num(c.threshold.rabi_min, khz)},
      {"threshold.rabi_max_khz", num(c.threshold.rabi_max, khz)},
      {"threshold.rabi_points", integer(c.threshold.rabi_points)},
      {"threshold.verify", flag(c.threshold.verify)},
  };

  for (const auto& [k, v] : kv) {
    if (k.rfind("protocol.segment.", 0) == 0) {
      segments[to_int(k, k.substr(std::string("protocol.segment.").size()))] = detail::parse_segment(k, v);
      continue;
    }
    const auto it = table.find(k);
    if (it == table.end()) throw ConfigError("unknown config key: " + k);
    it->second(k, v);
  }

  // Sweep bounds are in MHz (detuning axis) or kHz (Rabi axis).
  if (c.sweep.axis == "detuning") { c.sweep.from *= mhz; c.sweep.to *= mhz; }
  else if (c.sweep.axis == "rabi") { c.sweep.from *= khz; c.sweep.to *= khz; }
  else throw ConfigError("sweep.axis must be detuning or rabi");

  if (protocol_kind == "always_on") c.protocol = Protocol::always_on();
  else if (protocol_kind == "always_off") c.protocol = Protocol::always_off();
  else if (protocol_kind == "switch_on") c.protocol = Protocol::switch_on_at(switch_on);
  else if (protocol_kind == "parametric") c.protocol = build_parametric_excitation(p.mech.omega_phi, pulses, duty);
  else if (protocol_kind == "segments") {
    std::vector<Segment> segs;
    for (auto& [idx, s] : segments) segs.push_back(s);
    c.protocol = Protocol(std::move(segs));
  } else {
    throw ConfigError("protocol.kind must be always_on, always_off, switch_on, parametric or segments");
  }
  if (protocol_kind != "segments" && !segments.empty())
    throw ConfigError("protocol.segment.* given but protocol.kind is not segments");
  return c;
}

/// Seed override from the environment, taking precedence over the config.
inline constexpr const char* kSeedEnv = "SPINTORQUE_SEED";

}  // namespace spintorque
