#pragma once

// Lasing threshold: the Rabi frequency at which the delayed spin torque
// cancels the mechanical damping on the blue side.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "spintorque/dynamics.hpp"
#include "spintorque/errors.hpp"
#include "spintorque/linres.hpp"
#include "spintorque/model.hpp"

namespace spintorque {

struct ThresholdOptions {
  bool verify = true;
  double above_factor = 1.5;   // verification drive, in units of the threshold
  double below_factor = 0.5;
  double chunk = 0.5;          // s, simulated per amplitude check
  double max_time = 30.0;      // s
  double settle_tol = 0.01;    // relative change between chunks
  double agree_tol = 0.05;     // limit-cycle amplitudes from two starts
  double rel_tol = 1e-4;       // bisection width relative to the threshold
};

struct LasingThreshold {
  double rabi = 0.0;  // rad/s
  bool verified = false;
  std::optional<double> amplitude_small_start;  // rad, limit-cycle amplitude from a small displacement
  std::optional<double> amplitude_large_start;  // rad, from a large displacement
  std::optional<double> below_decay;            // final / initial amplitude below threshold
};

inline double oscillation_amplitude(const std::vector<double>& x, std::size_t first = 0) {
  if (first >= x.size()) return 0.0;
  const auto [lo, hi] = std::minmax_element(x.begin() + static_cast<std::ptrdiff_t>(first), x.end());
  return 0.5 * (*hi - *lo);
}

namespace detail {

inline ValidatedParams with_t1(const ValidatedParams& p, double t1, double temperature) {
  PhysicalParams raw = p.raw();
  raw.spin.t1 = t1;
  raw.mech.temperature = temperature;
  raw.sim.dt = std::min(raw.sim.dt, max_step(raw));
  return validate(raw);
}

/// Noise-free run at constant drive; returns the settled oscillation amplitude
/// (or the last one measured if `decay_only`).
inline double settle_amplitude(const ValidatedParams& q, double rabi, double phi0, const ThresholdOptions& opt,
                               bool decay_only, double* initial_amp = nullptr) {
  Segment seg;
  seg.rabi = rabi;
  const Protocol proto({seg});
  const double period = constants::two_pi / q.mech().omega_phi;
  SimControl c = q.sim();
  c.duration = opt.chunk;
  c.record_stride = std::max(1, static_cast<int>(period / 40.0 / c.dt));
  const std::size_t tail = static_cast<std::size_t>(std::ceil(0.2 * opt.chunk / (c.dt * c.record_stride)));

  SystemState y = steady_initial_state(q, proto, phi0);
  std::optional<double> prev;
  double amp = 0.0;
  for (double t = 0; t < opt.max_time; t += opt.chunk) {
    const Trajectory tr = integrate_trajectory(y, q, proto, c);
    const auto phi = tr.phi();
    if (initial_amp && !prev) *initial_amp = oscillation_amplitude(phi, 0) ;
    amp = oscillation_amplitude(phi, phi.size() > tail ? phi.size() - tail : 0);
    y = tr.states.back();
    if (decay_only) {
      if (initial_amp && amp < std::exp(-1.0) * *initial_amp) return amp;
    } else if (prev && std::abs(amp - *prev) <= opt.settle_tol * std::max(amp, 1e-300)) {
      return amp;
    }
    prev = amp;
  }
  return amp;
}

}  // namespace detail

/// Threshold Rabi frequency at the configured detuning for relaxation time `t1`.
/// Bisection on the first positive-to-negative crossing of gamma_eff over `rabi_grid`.
inline LasingThreshold lasing_threshold(const ValidatedParams& params, const std::vector<double>& rabi_grid, double t1,
                                        const ThresholdOptions& opt = {}) {
  if (rabi_grid.size() < 2) throw ConfigError("lasing_threshold needs at least two grid points");
  const ValidatedParams p = detail::with_t1(params, t1, params.mech().temperature);
  const double detuning = p.drive().detuning;
  auto gamma_eff = [&](double rabi) { return effective_dynamics(p, DriveState{rabi, detuning}).dynamics.gamma_eff; };

  std::optional<std::pair<double, double>> bracket;
  double g_prev = gamma_eff(rabi_grid[0]);
  for (std::size_t k = 1; k < rabi_grid.size() && !bracket; ++k) {
    const double g = gamma_eff(rabi_grid[k]);
    if (g_prev > 0 && g <= 0) bracket = std::pair{rabi_grid[k - 1], rabi_grid[k]};
    g_prev = g;
  }
  if (!bracket) throw NoSignChange("gamma_eff does not cross zero on the Rabi grid");

  auto [lo, hi] = *bracket;
  while (hi - lo > opt.rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (gamma_eff(mid) > 0 ? lo : hi) = mid;
  }
  LasingThreshold res;
  res.rabi = 0.5 * (lo + hi);
  if (!opt.verify) return res;

  // Limit cycle above threshold, decay below, both without noise.
  const ValidatedParams q = detail::with_t1(params, t1, 0.0);
  const double width = q.sigma() / std::max(std::abs(q.spin().zeeman_slope), 1e-300);
  const double above = opt.above_factor * res.rabi, below = opt.below_factor * res.rabi;
  const double center_above = operating_angle(q, DriveState{above, detuning});
  res.amplitude_small_start = detail::settle_amplitude(q, above, center_above + 0.1 * width, opt, false);
  const double far = std::max(4.0 * *res.amplitude_small_start, 2.0 * width);
  res.amplitude_large_start = detail::settle_amplitude(q, above, center_above + far, opt, false);

  const double center_below = operating_angle(q, DriveState{below, detuning});
  double initial = 0.0;
  const double final_amp = detail::settle_amplitude(q, below, center_below + 0.1 * width, opt, true, &initial);
  res.below_decay = initial > 0 ? final_amp / initial : 0.0;

  const double a = *res.amplitude_small_start, b = *res.amplitude_large_start;
  res.verified = a > 0.1 * width && std::abs(a - b) <= opt.agree_tol * std::max(a, b) && *res.below_decay < 0.5;
  return res;
}

}  // namespace spintorque
