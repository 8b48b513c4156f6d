#pragma once

// Physical parameters of the spin-libration system, their validation and the
// closed-form quantities derived from them.
//
// Unit conventions (internal): SI units throughout, every oscillation frequency
// is angular (rad/s), decay rates (gamma_las, 1/T1) are plain inverse times
// (1/s). Conversion from the Hz-based config keys happens in config.hpp only.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "spintorque/constants.hpp"
#include "spintorque/errors.hpp"

namespace spintorque {

enum class Lineshape { Lorentzian, Gaussian };
enum class ModelKind { FullBloch, RateEq };

inline const char* to_string(Lineshape l) { return l == Lineshape::Lorentzian ? "lorentzian" : "gaussian"; }
inline const char* to_string(ModelKind m) { return m == ModelKind::FullBloch ? "full_bloch" : "rate"; }

struct MechanicalParams {
  double inertia = 1.4e-22;                          // kg m^2
  double omega_phi = constants::two_pi * 480.0;      // rad/s
  double gamma = constants::two_pi * 16.0;           // rad/s, energy damping rate
  double temperature = 300.0;                        // K

  bool operator==(const MechanicalParams&) const = default;
};

struct SpinParams {
  double t2_star = 50e-9;                            // s
  double t1 = 1.0 / 600.0;                           // s, may be +inf
  double gamma_las = 2000.0;                         // 1/s
  double n_spins = 0.0;                              // magnetized NV count
  double zeeman_slope = constants::two_pi * 260e6;   // rad/s per rad of libration
  Lineshape lineshape = Lineshape::Lorentzian;
  double gaussian_offset = 0.0;                      // rad, angle offset inside the Gaussian P

  /// Inhomogeneous linewidth 1/T2* (1/s). Always derived, never stored.
  double sigma() const { return 1.0 / t2_star; }
  double inv_t1() const { return std::isinf(t1) ? 0.0 : 1.0 / t1; }

  bool operator==(const SpinParams&) const = default;
};

struct DriveParams {
  double rabi_omega = 0.0;                           // rad/s
  double detuning = 0.0;                             // rad/s, at phi = 0
  std::optional<double> torque_coeff;                // rad/s^2; derived from spins if unset

  bool operator==(const DriveParams&) const = default;
};

struct SimControl {
  double dt = 1e-5;                                  // s
  double duration = 0.1;                             // s
  int n_traj = 1;
  std::uint64_t seed = 1;
  int record_stride = 10;

  bool operator==(const SimControl&) const = default;
};

struct PhysicalParams {
  MechanicalParams mech;
  SpinParams spin;
  DriveParams drive;
  SimControl sim;
  ModelKind model = ModelKind::RateEq;

  bool operator==(const PhysicalParams&) const = default;
};

// ---------------------------------------------------------------------------
// Closed-form quantities

/// Torque per unit population difference, hbar * N * slope / I  [rad/s^2].
/// `zeeman_slope` is angular (rad/s per rad).
inline double torque_coefficient(double n_spins, double zeeman_slope, double inertia) {
  return constants::hbar * n_spins * zeeman_slope / inertia;
}

/// Static angular displacement for a constant population difference.
inline double static_shift(double torque_coeff, double sz_population, double omega_phi) {
  if (!(sz_population >= 0.0 && sz_population <= 1.0))
    throw ConfigError("static_shift: population outside [0, 1]");
  return torque_coeff * sz_population / (omega_phi * omega_phi);
}

/// White Langevin torque spectral level 2 k T gamma I  [N^2 m^2 s].
inline double langevin_psd_level(const MechanicalParams& m) {
  return 2.0 * constants::k_boltzmann * m.temperature * m.gamma * m.inertia;
}

/// Equipartition variance <phi^2> = k T / (I omega^2)  [rad^2].
inline double thermal_variance(const MechanicalParams& m) {
  return constants::k_boltzmann * m.temperature / (m.inertia * m.omega_phi * m.omega_phi);
}

/// Largest stable step for the given model kind.
inline double max_step(const PhysicalParams& p) {
  if (p.model == ModelKind::FullBloch) return p.spin.t2_star / 10.0;
  const double inf = std::numeric_limits<double>::infinity();
  const double las = p.spin.gamma_las > 0 ? 1.0 / p.spin.gamma_las : inf;
  const double period = constants::two_pi / p.mech.omega_phi;
  return std::min({las, p.spin.t1, period}) / 50.0;
}

// ---------------------------------------------------------------------------
// Validation

/// Parameters that passed validate(). Immutable; cheap to copy and share.
class ValidatedParams {
 public:
  const PhysicalParams& raw() const { return p_; }
  const MechanicalParams& mech() const { return p_.mech; }
  const SpinParams& spin() const { return p_.spin; }
  const DriveParams& drive() const { return p_.drive; }
  const SimControl& sim() const { return p_.sim; }
  ModelKind model() const { return p_.model; }

  double sigma() const { return p_.spin.sigma(); }
  double torque() const { return *p_.drive.torque_coeff; }
  double thermal_var() const { return thermal_variance(p_.mech); }
  const std::vector<std::string>& warnings() const { return warnings_; }

  bool operator==(const ValidatedParams& o) const { return p_ == o.p_; }

 private:
  friend ValidatedParams validate(const PhysicalParams&);
  PhysicalParams p_;
  std::vector<std::string> warnings_;
};

inline ValidatedParams validate(const PhysicalParams& in) {
  std::vector<Violation> bad;
  auto positive = [&](double v, const char* field) {
    if (!std::isfinite(v) && !(std::isinf(v) && v > 0)) bad.push_back({ViolationKind::NonFinite, field});
    else if (!(v > 0)) bad.push_back({ViolationKind::NonPositive, field});
  };
  auto non_negative = [&](double v, const char* field) {
    if (!std::isfinite(v)) bad.push_back({ViolationKind::NonFinite, field});
    else if (v < 0) bad.push_back({ViolationKind::Negative, field});
  };
  auto finite = [&](double v, const char* field) {
    if (!std::isfinite(v)) bad.push_back({ViolationKind::NonFinite, field});
  };

  const auto& m = in.mech;
  positive(m.inertia, "inertia_I");
  positive(m.omega_phi, "omega_phi");
  positive(m.gamma, "gamma");
  non_negative(m.temperature, "temperature_T");
  if (std::isinf(m.inertia) || std::isinf(m.omega_phi) || std::isinf(m.gamma))
    bad.push_back({ViolationKind::NonFinite, "mech"});
  if (m.omega_phi > 0 && m.gamma > 0 && !(m.omega_phi > m.gamma))
    bad.push_back({ViolationKind::UnderdampedViolation, "gamma"});

  const auto& s = in.spin;
  positive(s.t2_star, "t2_star");
  if (std::isinf(s.t2_star)) bad.push_back({ViolationKind::NonFinite, "t2_star"});
  positive(s.t1, "t1");
  non_negative(s.gamma_las, "gamma_las");
  non_negative(s.n_spins, "n_spins");
  finite(s.zeeman_slope, "zeeman_slope");
  finite(s.gaussian_offset, "gaussian_offset");
  if (in.model == ModelKind::FullBloch && s.lineshape != Lineshape::Lorentzian)
    bad.push_back({ViolationKind::OutOfRange, "lineshape"});  // Bloch equations are Lorentzian

  const auto& d = in.drive;
  non_negative(d.rabi_omega, "rabi_omega");
  finite(d.detuning, "detuning");
  if (d.torque_coeff) finite(*d.torque_coeff, "torque_coeff");

  const auto& c = in.sim;
  positive(c.dt, "dt");
  positive(c.duration, "duration");
  if (c.n_traj < 1) bad.push_back({ViolationKind::NonPositive, "n_traj"});
  if (c.record_stride < 1) bad.push_back({ViolationKind::NonPositive, "record_stride"});

  if (bad.empty() && c.dt > max_step(in)) bad.push_back({ViolationKind::StepTooLarge, "dt"});
  if (!bad.empty()) throw ValidationError(std::move(bad));

  ValidatedParams out;
  out.p_ = in;
  const double derived = torque_coefficient(s.n_spins, s.zeeman_slope, m.inertia);
  if (!d.torque_coeff) {
    out.p_.drive.torque_coeff = derived;
  } else if (s.n_spins > 0) {
    const double set = *d.torque_coeff;
    if (std::abs(set - derived) > 0.1 * std::max(std::abs(set), std::abs(derived)))
      out.warnings_.push_back("torque_coeff set directly (" + std::to_string(set) +
                              " rad/s^2) differs from hbar*N*slope/I (" + std::to_string(derived) +
                              ") by more than 10%; using the direct value");
  }
  if (!(s.t2_star * 10.0 < s.t1)) out.warnings_.push_back("t2_star is not much shorter than t1");
  return out;
}

/// Validation is idempotent: re-validating returns the same parameters.
inline ValidatedParams validate(const ValidatedParams& v) { return validate(v.raw()); }

}  // namespace spintorque
