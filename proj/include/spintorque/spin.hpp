#pragma once

// NV spin block: state, lineshape, Bloch and rate-equation right-hand sides,
// and the exact steady state at a clamped libration angle.
//
// Populations: pop0 = S_z^{0}, pop_m1 = S_z^{-1}, pop_p1 = S_z^{+1}.
// The coherence is the ensemble mean of sigma^- on the {|0>, |-1>} subspace.

#include <cmath>
#include <complex>

#include "spintorque/model.hpp"

namespace spintorque {

using cdouble = std::complex<double>;

struct SpinState {
  cdouble coherence{0.0, 0.0};
  double pop0 = 1.0;
  double pop_m1 = 0.0;
  double pop_p1 = 0.0;

  /// Population difference that produces the torque, S_z^{-1} - S_z^{+1}.
  double sz() const { return pop_m1 - pop_p1; }
  double total() const { return pop0 + pop_m1 + pop_p1; }
};

/// Microwave field seen by the spins at one instant.
struct DriveState {
  double rabi = 0.0;       // rad/s, zero when the microwave is gated off
  double detuning = 0.0;   // rad/s
};

/// Spectral pumping profile P(detuning, phi) [s]. Peak value 1/(2 sigma) for both shapes.
inline double lineshape(const SpinParams& s, double detuning, double phi) {
  const double sigma = s.sigma();
  if (s.lineshape == Lineshape::Lorentzian) {
    const double x = (detuning + s.zeeman_slope * phi) / sigma;
    return 0.5 / sigma / (1.0 + x * x);
  }
  const double x = (detuning + s.zeeman_slope * (s.gaussian_offset + phi)) / sigma;
  return 0.5 / sigma * std::exp(-x * x);
}

/// Microwave pumping rate Omega^2 P into |-1> [1/s].
inline double pumping_rate(const SpinParams& s, const DriveState& d, double phi) {
  return d.rabi * d.rabi * lineshape(s, d.detuning, phi);
}

/// Rate-equation right-hand side. The pumping term drives S_z^{-1} toward S_z^{0}.
inline SpinState rate_derivs(const SpinState& x, const SpinParams& s, const DriveState& d, double phi) {
  const double r = s.inv_t1();
  const double w = pumping_rate(s, d, phi);
  SpinState dx;
  dx.coherence = 0.0;
  dx.pop_p1 = -r * (x.pop_p1 - x.pop0) - s.gamma_las * x.pop_p1;
  dx.pop_m1 = -(r + w) * (x.pop_m1 - x.pop0) - s.gamma_las * x.pop_m1;
  dx.pop0 = -(dx.pop_p1 + dx.pop_m1);
  return dx;
}

/// Full Bloch right-hand side (coherence kept explicitly; intrinsically Lorentzian).
inline SpinState bloch_derivs(const SpinState& x, const SpinParams& s, const DriveState& d, double phi) {
  const double r = s.inv_t1();
  const double delta = d.detuning + s.zeeman_slope * phi;
  const cdouble i{0.0, 1.0};
  SpinState dx;
  dx.coherence = cdouble{-s.sigma(), delta} * x.coherence + i * (0.5 * d.rabi) * (x.pop_m1 - x.pop0);
  // i (Omega/2) (S - S*) = -Omega Im S
  dx.pop_m1 = -r * (x.pop_m1 - x.pop0) - s.gamma_las * x.pop_m1 - d.rabi * x.coherence.imag();
  dx.pop_p1 = -r * (x.pop_p1 - x.pop0) - s.gamma_las * x.pop_p1;
  dx.pop0 = -(dx.pop_p1 + dx.pop_m1);
  return dx;
}

/// Exact steady populations of the rate equations for pumping rate `w`.
/// With no relaxation at all (gamma_las = 1/T1 = 0) the state is not unique;
/// the branch connected to the polarized ground state is returned.
inline SpinState steady_populations(double w, double inv_t1, double gamma_las) {
  const double r = inv_t1, g = gamma_las;
  SpinState x;
  if (r + g <= 0.0) {
    if (w > 0) x.pop0 = x.pop_m1 = 0.5;
    return x;
  }
  const double denom = w * (3.0 * r + 2.0 * g) + (r + g) * (3.0 * r + g);
  x.pop0 = (w + r + g) * (r + g) / denom;
  x.pop_m1 = (w + r) * (r + g) / denom;
  x.pop_p1 = r * (w + r + g) / denom;
  return x;
}

/// Steady spin state at clamped angle `phi`, including the adiabatic coherence.
inline SpinState steady_spin(const SpinParams& s, const DriveState& d, double phi) {
  SpinState x = steady_populations(pumping_rate(s, d, phi), s.inv_t1(), s.gamma_las);
  const double delta = d.detuning + s.zeeman_slope * phi;
  const cdouble i{0.0, 1.0};
  x.coherence = i * (0.5 * d.rabi) * (x.pop_m1 - x.pop0) / cdouble{s.sigma(), -delta};
  return x;
}

}  // namespace spintorque
