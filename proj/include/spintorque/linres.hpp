#pragma once

// Linear response of the spin population to small harmonic libration.
// Phasor convention: phi(t) = center + A cos(w t) gives
//   dS_z(t) = A (Re xi cos(w t) - Im xi sin(w t)),
// so that with phi ~ e^{i w t}:
//   omega_eff^2 = omega_phi^2 - Gamma Re xi,   gamma_eff = gamma - Gamma Im xi / omega_eff.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "spintorque/dynamics.hpp"
#include "spintorque/errors.hpp"
#include "spintorque/model.hpp"
#include "spintorque/spin.hpp"
#include "spintorque/steadystate.hpp"

namespace spintorque {

struct SpinResponse {
  double omega = 0.0;  // rad/s
  cdouble xi{0.0, 0.0};  // 1/rad
  double center = 0.0;   // rad, angle the probe oscillates about
};

struct EffectiveDynamics {
  double omega_eff = 0.0;  // rad/s
  double gamma_eff = 0.0;  // rad/s, negative above the lasing threshold
  double detuning = 0.0;   // rad/s, at phi = 0
  double effective_detuning = 0.0;  // rad/s, seen by the spins at the probe center
};

struct ProbeOptions {
  int transient_periods = 20;
  int check_periods = 5;
  int max_periods = 400;
  int min_steps_per_period = 400;
  double tolerance = 0.01;     // projection drift and linearity gate
  bool check_linearity = true;
  std::optional<double> center;  // clamp center; default: operating steady angle
};

/// Probe amplitude small against the lineshape width in angle.
inline double default_probe_amplitude(const ValidatedParams& p) {
  const double g = std::abs(p.spin().zeeman_slope);
  return g > 0 ? 1e-3 * p.sigma() / g : 1e-3;
}

namespace detail {

inline cdouble probe_once(const ValidatedParams& p, const DriveState& d, double omega, double amp, double center,
                          const ProbeOptions& opt) {
  const SpinParams& s = p.spin();
  const ModelKind kind = p.model();
  const double period = constants::two_pi / omega;

  // Step: resolve the period and stay inside the RK4 stability region.
  const double r = s.inv_t1();
  const double w_peak = d.rabi * d.rabi * 0.5 / s.sigma();
  double fastest = 3.0 * r + 2.0 * s.gamma_las + w_peak;
  if (kind == ModelKind::FullBloch) {
    const double delta_max = std::abs(d.detuning) + std::abs(s.zeeman_slope) * (std::abs(center) + amp);
    fastest = std::max(fastest, std::hypot(s.sigma(), delta_max) + d.rabi);
  }
  int steps = opt.min_steps_per_period;
  if (fastest > 0) steps = std::max(steps, static_cast<int>(std::ceil(period * fastest / 1.0)));
  const double dt = period / steps;

  // Slowest spin relaxation sets the transient.
  const double slowest = r + s.gamma_las;
  int transient = opt.transient_periods;
  if (slowest > 0) transient = std::max(transient, static_cast<int>(std::ceil(12.0 / slowest / period)));
  if (transient > opt.max_periods) throw NoSteadyState("spin relaxation too slow for the probe frequency");

  auto phi_of_t = [&](double t) { return center + amp * std::cos(omega * t); };
  SpinState x = steady_spin(s, d, center);
  if (kind == ModelKind::RateEq) x.coherence = 0.0;
  x = integrate_spin_clamped(kind, x, s, d, phi_of_t, 0.0, dt, static_cast<long long>(transient) * steps);

  // Per-period quadrature projections (rectangle rule is exact for periodic integrands).
  std::vector<cdouble> history;
  for (int k = transient; k < opt.max_periods; ++k) {
    double ic = 0.0, qs = 0.0;
    for (int n = 0; n < steps; ++n) {
      const double t = (static_cast<double>(k) * steps + n) * dt;
      const double sz = x.sz();
      ic += sz * std::cos(omega * t);
      qs += sz * std::sin(omega * t);
      x = integrate_spin_clamped(kind, x, s, d, phi_of_t, t, dt, 1);
    }
    ic *= 2.0 / steps;
    qs *= 2.0 / steps;
    history.push_back(cdouble{ic, -qs} / amp);
    if (static_cast<int>(history.size()) >= opt.check_periods) {
      const cdouble last = history.back();
      bool settled = true;
      for (std::size_t j = history.size() - opt.check_periods; j < history.size(); ++j)
        if (std::abs(history[j] - last) > opt.tolerance * std::abs(last) + 1e-300) settled = false;
      if (settled) return last;
    }
  }
  throw NoSteadyState("quadrature projection did not settle");
}

}  // namespace detail

/// Complex spin response xi = dS_z / dphi at probe frequency `omega_probe`,
/// by harmonic probing of the clamped spin block.
inline SpinResponse spin_response_xi(const ValidatedParams& p, const DriveState& d, double omega_probe,
                                     double probe_amp, const ProbeOptions& opt = {}) {
  if (!(omega_probe > 0) || !(probe_amp > 0)) throw ConfigError("probe frequency and amplitude must be positive");
  const double center = opt.center ? *opt.center : operating_angle(p, d);
  const cdouble xi = detail::probe_once(p, d, omega_probe, probe_amp, center, opt);
  if (opt.check_linearity) {
    const cdouble half = detail::probe_once(p, d, omega_probe, 0.5 * probe_amp, center, opt);
    if (std::abs(xi - half) > opt.tolerance * std::abs(xi)) throw NonLinearResponse("probe amplitude too large");
  }
  return {omega_probe, xi, center};
}

/// Effective frequency and damping from xi at one frequency.
inline EffectiveDynamics effective_from_xi(const ValidatedParams& p, const DriveState& d, const SpinResponse& r) {
  const double w2 = p.mech().omega_phi * p.mech().omega_phi - p.torque() * r.xi.real();
  if (!(w2 > 0)) throw NoFixedPoint("spin spring removes the restoring torque");
  const double w = std::sqrt(w2);
  return {w, p.mech().gamma - p.torque() * r.xi.imag() / w, d.detuning,
          d.detuning + p.spin().zeeman_slope * r.center};
}

struct EffectiveResult {
  EffectiveDynamics dynamics;
  SpinResponse response;  // xi at the converged omega_eff
  int iterations = 0;
};

/// Self-consistent (omega_eff, gamma_eff): xi is re-evaluated at omega_eff until it stops moving.
inline EffectiveResult effective_dynamics(const ValidatedParams& p, const DriveState& d,
                                          std::optional<double> probe_amp = std::nullopt,
                                          ProbeOptions opt = {}) {
  const double amp = probe_amp ? *probe_amp : default_probe_amplitude(p);
  if (!opt.center) opt.center = operating_angle(p, d);
  double omega = p.mech().omega_phi;
  for (int it = 1; it <= 20; ++it) {
    const SpinResponse r = spin_response_xi(p, d, omega, amp, opt);
    const EffectiveDynamics e = effective_from_xi(p, d, r);
    const bool done = std::abs(e.omega_eff - omega) <= 1e-6 * omega && it >= 2;
    omega = e.omega_eff;
    if (done) return {e, r, it};
  }
  throw NoFixedPoint("omega_eff refinement did not converge in 20 iterations");
}

struct SweepRow {
  double detuning = 0.0;  // rad/s
  std::optional<EffectiveDynamics> dynamics;
  cdouble xi{0.0, 0.0};
  std::string status = "ok";
};

/// Effective dynamics on a detuning grid. Failed points keep their error in `status`.
inline std::vector<SweepRow> detuning_sweep(const ValidatedParams& p, double rabi, const std::vector<double>& detunings,
                                            int threads = 1, std::optional<double> probe_amp = std::nullopt) {
  std::vector<SweepRow> rows(detunings.size());
  auto work = [&](std::size_t k) {
    SweepRow& row = rows[k];
    row.detuning = detunings[k];
    try {
      const auto res = effective_dynamics(p, DriveState{rabi, detunings[k]}, probe_amp);
      row.dynamics = res.dynamics;
      row.xi = res.response.xi;
    } catch (const NumericalError& e) {
      row.status = e.what();
    }
  };
  const std::size_t workers = static_cast<std::size_t>(std::max(1, threads));
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t k = w; k < rows.size(); k += workers) work(k);
    });
  pool.clear();
  return rows;
}

}  // namespace spintorque
