#pragma once

// Coupled spin-libration equations and their fixed-step stochastic integration.
//
// Mechanics:  phi'' = -omega_phi^2 phi - gamma phi' + Gamma (S_z^{-1} - S_z^{+1}) + noise
// Spins:      full Bloch (coherence explicit) or adiabatic rate equations.
//
// Integration: stochastic Heun for the drift with one additive Gaussian kick
// on phi' per step, variance 2 k T gamma dt / I. Kicks are drawn from a
// counter-based generator keyed by (seed, step), so a trajectory is a pure
// function of (seed, params, protocol, dt).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "spintorque/errors.hpp"
#include "spintorque/model.hpp"
#include "spintorque/protocol.hpp"
#include "spintorque/rng.hpp"
#include "spintorque/spin.hpp"

namespace spintorque {

struct MechState {
  double phi = 0.0;      // rad
  double phi_dot = 0.0;  // rad/s
};

struct SystemState {
  MechState mech;
  SpinState spin;
};

struct Trajectory {
  std::vector<double> times;         // s, uniform with spacing dt * record_stride
  std::vector<SystemState> states;
  PhysicalParams params;
  std::uint64_t seed = 0;
  ModelKind model = ModelKind::RateEq;
  Protocol protocol;

  std::size_t size() const { return times.size(); }
  std::vector<double> phi() const {
    std::vector<double> out(states.size());
    for (std::size_t k = 0; k < states.size(); ++k) out[k] = states[k].mech.phi;
    return out;
  }
  double sample_interval() const { return params.sim.dt * params.sim.record_stride; }
};

namespace detail {

inline MechState mech_derivs(const MechState& m, const MechanicalParams& mp, double torque, double sz) {
  return {m.phi_dot, -mp.omega_phi * mp.omega_phi * m.phi - mp.gamma * m.phi_dot + torque * sz};
}

inline void check_finite(const SystemState& d) {
  const bool ok = std::isfinite(d.mech.phi) && std::isfinite(d.mech.phi_dot) &&
                  std::isfinite(d.spin.coherence.real()) && std::isfinite(d.spin.coherence.imag()) &&
                  std::isfinite(d.spin.pop0) && std::isfinite(d.spin.pop_m1) && std::isfinite(d.spin.pop_p1);
  if (!ok) throw NonFiniteError("non-finite derivative");
}

inline SystemState axpy(const SystemState& y, double h, const SystemState& k) {
  SystemState o;
  o.mech.phi = y.mech.phi + h * k.mech.phi;
  o.mech.phi_dot = y.mech.phi_dot + h * k.mech.phi_dot;
  o.spin.coherence = y.spin.coherence + h * k.spin.coherence;
  o.spin.pop0 = y.spin.pop0 + h * k.spin.pop0;
  o.spin.pop_m1 = y.spin.pop_m1 + h * k.spin.pop_m1;
  o.spin.pop_p1 = y.spin.pop_p1 + h * k.spin.pop_p1;
  return o;
}

}  // namespace detail

/// Deterministic time derivative with the full Bloch spin block.
inline SystemState derivs_full_bloch(const SystemState& x, const ValidatedParams& p, const DriveState& d) {
  SystemState dx;
  dx.spin = bloch_derivs(x.spin, p.spin(), d, x.mech.phi);
  dx.mech = detail::mech_derivs(x.mech, p.mech(), p.torque(), x.spin.sz());
  detail::check_finite(dx);
  return dx;
}

/// Deterministic time derivative with the adiabatic rate-equation spin block.
inline SystemState derivs_rate(const SystemState& x, const ValidatedParams& p, const DriveState& d) {
  SystemState dx;
  dx.spin = rate_derivs(x.spin, p.spin(), d, x.mech.phi);
  dx.mech = detail::mech_derivs(x.mech, p.mech(), p.torque(), x.spin.sz());
  detail::check_finite(dx);
  return dx;
}

inline SystemState derivs(ModelKind kind, const SystemState& x, const ValidatedParams& p, const DriveState& d) {
  return kind == ModelKind::FullBloch ? derivs_full_bloch(x, p, d) : derivs_rate(x, p, d);
}

/// Langevin velocity kicks for one trajectory. kick(step) is the increment of
/// phi' applied during step `step`; std = sqrt(2 k T gamma dt / I).
class LangevinKicks {
 public:
  LangevinKicks(const MechanicalParams& m, double dt, std::uint64_t seed)
      : rng_(seed, 0), scale_(std::sqrt(2.0 * constants::k_boltzmann * m.temperature * m.gamma * dt / m.inertia)) {}

  double kick(std::uint64_t step) const { return scale_ == 0.0 ? 0.0 : scale_ * rng_.normal(step); }
  double stddev() const { return scale_; }

 private:
  Philox4x32 rng_;
  double scale_;
};

/// Initial state at angle `phi` with the spin block in its steady state for the drive at t = 0.
inline SystemState steady_initial_state(const ValidatedParams& p, const Protocol& protocol, double phi,
                                        double phi_dot = 0.0) {
  SystemState s;
  s.mech = {phi, phi_dot};
  s.spin = steady_spin(p.spin(), protocol.at(0.0, p.drive()), phi);
  if (p.model() == ModelKind::RateEq) s.spin.coherence = 0.0;
  return s;
}

/// Thermal initial condition: phi and phi' drawn from the equilibrium Gaussian
/// around `phi_center` (uses a stream separate from the Langevin kicks).
inline SystemState thermal_initial_state(const ValidatedParams& p, const Protocol& protocol, std::uint64_t seed,
                                         double phi_center = 0.0) {
  const Philox4x32 rng(seed, 1);
  const double sd_phi = std::sqrt(p.thermal_var());
  const double sd_vel = std::sqrt(constants::k_boltzmann * p.mech().temperature / p.mech().inertia);
  return steady_initial_state(p, protocol, phi_center + sd_phi * rng.normal(0), sd_vel * rng.normal(1));
}

namespace detail {

inline constexpr double kPopSlack = 1e-6;

inline void enforce_invariants(SystemState& s, long long step, ModelKind kind) {
  auto& sp = s.spin;
  for (double v : {sp.pop0, sp.pop_m1, sp.pop_p1})
    if (!(v >= -kPopSlack && v <= 1.0 + kPopSlack)) throw InvariantViolated(step, "population out of [0, 1]");
  sp.pop0 = std::clamp(sp.pop0, 0.0, 1.0);
  sp.pop_m1 = std::clamp(sp.pop_m1, 0.0, 1.0);
  sp.pop_p1 = std::clamp(sp.pop_p1, 0.0, 1.0);
  const double total = sp.total();
  if (!(total > 0)) throw InvariantViolated(step, "population sum vanished");
  sp.pop0 /= total;
  sp.pop_m1 /= total;
  sp.pop_p1 /= total;
  if (kind == ModelKind::FullBloch && !(std::abs(sp.coherence) <= 0.5 + kPopSlack))
    throw InvariantViolated(step, "|coherence| > 1/2");
  if (!std::isfinite(s.mech.phi) || !std::isfinite(s.mech.phi_dot)) throw NonFiniteError("non-finite state");
  if (!(std::abs(s.mech.phi) < constants::pi / 2)) throw InvariantViolated(step, "|phi| >= pi/2");
}

}  // namespace detail

/// One stochastic Heun step from t to t + dt. `kick` is the velocity increment.
inline SystemState heun_step(ModelKind kind, const SystemState& y, const ValidatedParams& p, const DriveState& d0,
                             const DriveState& d1, double dt, double kick) {
  const SystemState k1 = derivs(kind, y, p, d0);
  SystemState pred = detail::axpy(y, dt, k1);
  pred.mech.phi_dot += kick;
  const SystemState k2 = derivs(kind, pred, p, d1);
  SystemState out = detail::axpy(y, 0.5 * dt, k1);
  out = detail::axpy(out, 0.5 * dt, k2);
  out.mech.phi_dot += kick;
  return out;
}

/// Integrate one trajectory. Samples are taken every `record_stride` steps,
/// starting with the initial state at t = 0; the trajectory holds
/// floor(n_steps / record_stride) samples.
inline Trajectory integrate_trajectory(const SystemState& initial, const ValidatedParams& params,
                                       const Protocol& protocol, const SimControl& control) {
  if (!(control.dt > 0) || control.dt > max_step(params.raw()))
    throw ValidationError({{ViolationKind::StepTooLarge, "dt"}});
  if (control.record_stride < 1) throw ValidationError({{ViolationKind::NonPositive, "record_stride"}});

  const ModelKind kind = params.model();
  const long long n_steps = std::llround(control.duration / control.dt);
  const long long n_records = n_steps / control.record_stride;

  Trajectory tr;
  tr.params = params.raw();
  tr.params.sim = control;
  tr.seed = control.seed;
  tr.model = kind;
  tr.protocol = protocol;
  tr.times.reserve(static_cast<std::size_t>(n_records));
  tr.states.reserve(static_cast<std::size_t>(n_records));

  const LangevinKicks kicks(params.mech(), control.dt, control.seed);
  SystemState y = initial;
  detail::enforce_invariants(y, 0, kind);
  DriveState d0 = protocol.at(0.0, params.drive());
  const long long total_steps = n_records * control.record_stride;
  for (long long step = 0; step < total_steps; ++step) {
    const double t = step * control.dt;
    if (step % control.record_stride == 0) {
      tr.times.push_back(t);
      tr.states.push_back(y);
    }
    const DriveState d1 = protocol.at(t + control.dt, params.drive());
    y = heun_step(kind, y, params, d0, d1, control.dt, kicks.kick(static_cast<std::uint64_t>(step)));
    detail::enforce_invariants(y, step + 1, kind);
    d0 = d1;
  }
  return tr;
}

/// Deterministic integration of the spin block alone with phi(t) prescribed.
/// Classical RK4; used for harmonic probing and clamped-angle checks.
template <class PhiOfT>
SpinState integrate_spin_clamped(ModelKind kind, SpinState x, const SpinParams& s, const DriveState& d,
                                 PhiOfT&& phi_of_t, double t0, double dt, long long n_steps) {
  auto f = [&](const SpinState& y, double t) {
    return kind == ModelKind::FullBloch ? bloch_derivs(y, s, d, phi_of_t(t)) : rate_derivs(y, s, d, phi_of_t(t));
  };
  auto add = [](const SpinState& y, double h, const SpinState& k) {
    SpinState o;
    o.coherence = y.coherence + h * k.coherence;
    o.pop0 = y.pop0 + h * k.pop0;
    o.pop_m1 = y.pop_m1 + h * k.pop_m1;
    o.pop_p1 = y.pop_p1 + h * k.pop_p1;
    return o;
  };
  double t = t0;
  for (long long n = 0; n < n_steps; ++n) {
    const SpinState k1 = f(x, t);
    const SpinState k2 = f(add(x, 0.5 * dt, k1), t + 0.5 * dt);
    const SpinState k3 = f(add(x, 0.5 * dt, k2), t + 0.5 * dt);
    const SpinState k4 = f(add(x, dt, k3), t + dt);
    x.coherence += dt / 6.0 * (k1.coherence + 2.0 * k2.coherence + 2.0 * k3.coherence + k4.coherence);
    x.pop0 += dt / 6.0 * (k1.pop0 + 2.0 * k2.pop0 + 2.0 * k3.pop0 + k4.pop0);
    x.pop_m1 += dt / 6.0 * (k1.pop_m1 + 2.0 * k2.pop_m1 + 2.0 * k3.pop_m1 + k4.pop_m1);
    x.pop_p1 += dt / 6.0 * (k1.pop_p1 + 2.0 * k2.pop_p1 + 2.0 * k3.pop_p1 + k4.pop_p1);
    t += dt;
  }
  return x;
}

}  // namespace spintorque
