#pragma once

// Non-linear steady-state analysis of the spin torque: steady population,
// bistable angle roots, quasi-static hysteresis, the adiabatic effective
// potential and Kramers escape statistics between its wells.

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "spintorque/dynamics.hpp"
#include "spintorque/errors.hpp"
#include "spintorque/model.hpp"
#include "spintorque/spin.hpp"

namespace spintorque {

// ---------------------------------------------------------------------------
// Steady population

/// Steady torque-producing population S_z = S_z^{-1} - S_z^{+1} at a clamped angle.
inline double sz_steady(const ValidatedParams& p, const DriveState& d, double phi) {
  return steady_spin(p.spin(), d, phi).sz();
}

inline double sz_steady(const ValidatedParams& p, double phi) {
  return sz_steady(p, DriveState{p.drive().rabi_omega, p.drive().detuning}, phi);
}

/// For the Lorentzian lineshape the steady population is exactly
/// S_z = amplitude / (kappa + delta^2), delta = detuning + slope * phi.
struct LorentzianForm {
  double amplitude = 0.0;  // 1/s^2
  double kappa = 0.0;      // 1/s^2
};

inline LorentzianForm lorentzian_form(const SpinParams& s, double rabi) {
  const double r = s.inv_t1(), g = s.gamma_las, sigma = s.sigma();
  const double w2 = rabi * rabi;
  if (r + g <= 0.0) return {0.5 * sigma * sigma, sigma * sigma};  // saturated, S_z -> 1/2 on resonance
  const double denom = 2.0 * (r + g) * (3.0 * r + g);
  return {w2 * sigma * g / denom, sigma * sigma + w2 * sigma * (3.0 * r + 2.0 * g) / denom};
}

/// Drive strength I_d = Gamma * amplitude / omega_phi^2 of the steady-angle cubic
/// phi = I_d / (kappa + (detuning + slope * phi)^2).
inline double drive_strength(const ValidatedParams& p, double rabi) {
  const double w = p.mech().omega_phi;
  return p.torque() * lorentzian_form(p.spin(), rabi).amplitude / (w * w);
}

// ---------------------------------------------------------------------------
// Bistability

enum class Stability { Stable, Unstable };
inline const char* to_string(Stability s) { return s == Stability::Stable ? "stable" : "unstable"; }

struct SteadyBranch {
  double phi_root = 0.0;
  Stability stability = Stability::Stable;
  double residual = 0.0;  // normalized cubic residual
};

namespace detail {

struct SteadyCubic {
  double slope, detuning, kappa, drive;  // g, Delta, kappa, I_d

  double residual(double phi) const {
    const double d = detuning + slope * phi;
    return phi * (kappa + d * d) - drive;
  }
  double derivative(double phi) const {
    return 3.0 * slope * slope * phi * phi + 4.0 * detuning * slope * phi + kappa + detuning * detuning;
  }
  double normalized(double phi) const {
    const double d = detuning + slope * phi;
    const double scale = std::abs(phi) * (kappa + d * d) + std::abs(drive);
    return scale > 0 ? residual(phi) / scale : 0.0;
  }
};

/// Real roots of x^3 + a x^2 + b x + c.
inline std::vector<double> monic_cubic_roots(double a, double b, double c) {
  const double q = (a * a - 3.0 * b) / 9.0;
  const double r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
  const double q3 = q * q * q;
  if (r * r < q3) {
    const double theta = std::acos(std::clamp(r / std::sqrt(q3), -1.0, 1.0));
    const double m = -2.0 * std::sqrt(q);
    return {m * std::cos(theta / 3.0) - a / 3.0, m * std::cos((theta + constants::two_pi) / 3.0) - a / 3.0,
            m * std::cos((theta - constants::two_pi) / 3.0) - a / 3.0};
  }
  const double big = -std::copysign(std::cbrt(std::abs(r) + std::sqrt(r * r - q3)), r);
  const double small = big != 0.0 ? q / big : 0.0;
  return {big + small - a / 3.0};
}

inline double polish(const SteadyCubic& cub, double x) {
  for (int it = 0; it < 60; ++it) {
    const double d = cub.derivative(x);
    if (d == 0.0) break;
    const double step = cub.residual(x) / d;
    x -= step;
    if (std::abs(step) <= 1e-17 * std::max(std::abs(x), 1e-300)) break;
  }
  return x;
}

}  // namespace detail

/// All real steady angles for the Lorentzian lineshape, ascending, via the
/// closed-form cubic with Newton polish. Stability from the sign of the
/// restoring-torque slope.
inline std::vector<SteadyBranch> bistability_roots(const ValidatedParams& p, const DriveState& d) {
  if (p.spin().lineshape != Lineshape::Lorentzian)
    throw ConfigError("bistability_roots requires the Lorentzian lineshape");
  const auto form = lorentzian_form(p.spin(), d.rabi);
  const double w = p.mech().omega_phi;
  const detail::SteadyCubic cub{p.spin().zeeman_slope, d.detuning, form.kappa,
                                p.torque() * form.amplitude / (w * w)};

  std::vector<double> raw;
  if (cub.slope == 0.0) {
    raw = {cub.drive / (cub.kappa + cub.detuning * cub.detuning)};
  } else {
    const double g2 = cub.slope * cub.slope;
    raw = detail::monic_cubic_roots(2.0 * cub.detuning / cub.slope, (cub.kappa + cub.detuning * cub.detuning) / g2,
                                    -cub.drive / g2);
  }
  for (double& x : raw) x = detail::polish(cub, x);
  std::sort(raw.begin(), raw.end());
  raw.erase(std::unique(raw.begin(), raw.end(),
                        [](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(std::abs(x), 1e-12); }),
            raw.end());

  std::vector<SteadyBranch> out;
  for (double x : raw)
    out.push_back({x, cub.derivative(x) > 0 ? Stability::Stable : Stability::Unstable, cub.normalized(x)});
  return out;
}

inline std::vector<SteadyBranch> bistability_roots(const ValidatedParams& p) {
  return bistability_roots(p, DriveState{p.drive().rabi_omega, p.drive().detuning});
}

/// Steady angles for any lineshape: sign changes of the net static torque on a
/// dense grid, refined by bisection. Used for the Gaussian profile and as the
/// brute-force oracle for bistability_roots.
inline std::vector<SteadyBranch> steady_angles_scan(const ValidatedParams& p, const DriveState& d, double lo, double hi,
                                                    int n_points) {
  const double w2 = p.mech().omega_phi * p.mech().omega_phi;
  auto net = [&](double phi) { return w2 * phi - p.torque() * sz_steady(p, d, phi); };  // -(total torque)
  std::vector<SteadyBranch> out;
  double x0 = lo, f0 = net(lo);
  for (int k = 1; k < n_points; ++k) {
    const double x1 = lo + (hi - lo) * k / (n_points - 1);
    const double f1 = net(x1);
    if (f0 == 0.0 || (f0 < 0) != (f1 < 0)) {
      double a = x0, b = x1, fa = f0;
      if (f0 != 0.0) {
        for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
          const double m = 0.5 * (a + b);
          const double fm = net(m);
          if ((fm < 0) == (fa < 0)) { a = m; fa = fm; } else { b = m; }
        }
      }
      const double root = f0 == 0.0 ? x0 : 0.5 * (a + b);
      out.push_back({root, f1 > f0 ? Stability::Stable : Stability::Unstable, net(root) / w2});
    }
    x0 = x1;
    f0 = f1;
  }
  return out;
}

/// Stable steady angle used as the operating point: the stable root closest to zero.
inline double operating_angle(const ValidatedParams& p, const DriveState& d) {
  std::vector<SteadyBranch> roots;
  if (p.spin().lineshape == Lineshape::Lorentzian) {
    roots = bistability_roots(p, d);
  } else {
    const double w2 = p.mech().omega_phi * p.mech().omega_phi;
    const double reach = std::abs(p.torque()) / w2 * 1.01 + 1e-12;
    roots = steady_angles_scan(p, d, -reach, reach, 200001);
  }
  std::optional<double> best;
  for (const auto& r : roots)
    if (r.stability == Stability::Stable && (!best || std::abs(r.phi_root) < std::abs(*best))) best = r.phi_root;
  if (!best) throw NoFixedPoint("no stable steady angle");
  return *best;
}

struct BistabilityCurve {
  std::vector<double> detunings;
  std::vector<std::vector<SteadyBranch>> branches;

  /// Smallest interval of the detuning grid containing every 3-root point.
  std::optional<std::pair<double, double>> window() const {
    std::optional<std::pair<double, double>> w;
    for (std::size_t k = 0; k < detunings.size(); ++k) {
      if (branches[k].size() != 3) continue;
      if (!w) w = std::pair{detunings[k], detunings[k]};
      w->first = std::min(w->first, detunings[k]);
      w->second = std::max(w->second, detunings[k]);
    }
    return w;
  }
};

inline BistabilityCurve bistability_curve(const ValidatedParams& p, double rabi, const std::vector<double>& detunings) {
  BistabilityCurve c;
  c.detunings = detunings;
  for (double det : detunings) c.branches.push_back(bistability_roots(p, DriveState{rabi, det}));
  return c;
}

// ---------------------------------------------------------------------------
// Hysteresis

struct HysteresisTrace {
  std::vector<double> detuning;  // rad/s
  std::vector<double> phi;       // rad
};

struct HysteresisResult {
  HysteresisTrace up;    // from -> to
  HysteresisTrace down;  // to -> from, continuing from the end of `up`
  std::optional<double> switch_forward;   // detuning where the forward sweep jumps
  std::optional<double> switch_backward;  // detuning where the backward sweep jumps
  double loop_area = 0.0;                 // integral of |phi_up - phi_down| d(detuning), rad * rad/s
};

/// Noise-free quasi-static sweep of the detuning at `rate` (rad/s per second),
/// forward then backward. The forward sweep starts on the stable root closest to
/// zero; the backward sweep continues from where the forward one ended.
inline HysteresisResult hysteresis_sweep(const ValidatedParams& params, double rabi, double from, double to,
                                         double rate, int n_record = 2000) {
  if (!(rate > 0)) throw ConfigError("hysteresis sweep rate must be positive");
  PhysicalParams quiet = params.raw();
  quiet.mech.temperature = 0.0;
  const ValidatedParams p = validate(quiet);

  const double duration = std::abs(to - from) / rate;
  SimControl c = p.sim();
  c.duration = duration;
  const long long n_steps = std::llround(duration / c.dt);
  c.record_stride = static_cast<int>(std::max<long long>(1, n_steps / n_record));

  auto sweep = [&](double a, double b, const SystemState& start) {
    Segment s;
    s.t_start = 0.0;
    s.t_end = duration;
    s.rabi = rabi;
    s.detuning = a;
    s.detuning_end = b;
    const Protocol proto({s});
    Trajectory tr = integrate_trajectory(start, p, proto, c);
    HysteresisTrace trace;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      trace.detuning.push_back(a + (b - a) * tr.times[k] / duration);
      trace.phi.push_back(tr.states[k].mech.phi);
    }
    return std::pair{trace, tr.states.empty() ? start : tr.states.back()};
  };

  HysteresisResult res;
  const DriveState d0{rabi, from};
  SystemState start;
  start.mech.phi = operating_angle(p, d0);
  start.spin = steady_spin(p.spin(), d0, start.mech.phi);
  if (p.model() == ModelKind::RateEq) start.spin.coherence = 0.0;
  auto [up, end_state] = sweep(from, to, start);
  auto [down, unused] = sweep(to, from, end_state);
  res.up = std::move(up);
  res.down = std::move(down);

  // Backward branch interpolated onto the forward detuning grid.
  const std::size_t n = res.up.phi.size();
  if (n < 2 || res.down.phi.size() < 2) return res;
  std::vector<double> down_det(res.down.detuning.rbegin(), res.down.detuning.rend());
  std::vector<double> down_phi(res.down.phi.rbegin(), res.down.phi.rend());
  if (down_det.front() > down_det.back()) {
    std::reverse(down_det.begin(), down_det.end());
    std::reverse(down_phi.begin(), down_phi.end());
  }
  auto down_at = [&](double x) {
    const auto it = std::lower_bound(down_det.begin(), down_det.end(), x);
    if (it == down_det.begin()) return down_phi.front();
    if (it == down_det.end()) return down_phi.back();
    const std::size_t j = static_cast<std::size_t>(it - down_det.begin());
    const double f = (x - down_det[j - 1]) / (down_det[j] - down_det[j - 1]);
    return down_phi[j - 1] + f * (down_phi[j] - down_phi[j - 1]);
  };
  std::vector<double> gap(n);
  for (std::size_t k = 0; k < n; ++k) gap[k] = res.up.phi[k] - down_at(res.up.detuning[k]);
  const auto [up_lo, up_hi] = std::minmax_element(res.up.phi.begin(), res.up.phi.end());
  const auto [down_lo, down_hi] = std::minmax_element(down_phi.begin(), down_phi.end());
  const double lo = std::min(*up_lo, *down_lo), hi = std::max(*up_hi, *down_hi);
  const double step = std::abs(res.up.detuning[1] - res.up.detuning[0]);
  for (std::size_t k = 0; k < n; ++k) res.loop_area += std::abs(gap[k]) * step;

  const double threshold = 0.1 * (hi - lo);
  std::optional<std::size_t> first, last;
  for (std::size_t k = 0; k < n; ++k)
    if (std::abs(gap[k]) > threshold && hi > lo) {
      if (!first) first = k;
      last = k;
    }
  if (first) {
    res.switch_forward = res.up.detuning[*last];
    res.switch_backward = res.up.detuning[*first];
  }
  return res;
}

// ---------------------------------------------------------------------------
// Effective potential and Kramers statistics

struct EffectivePotential {
  std::vector<double> phi;  // rad
  std::vector<double> U;    // J, U(0) = 0
  std::vector<double> minima, maxima;
  // Double-well description (present only with two minima around one barrier).
  std::optional<double> phi_A, phi_B, phi_C;  // A: minimum closest to zero, C: barrier
  std::optional<double> depth_A, depth_B;     // U(C) - U(A), U(C) - U(B)  [J]
  std::optional<double> curvature_A, curvature_B, curvature_C;  // U'' / I  [rad^2/s^2]

  bool double_well() const { return phi_A.has_value(); }
};

/// dU/dphi = I (omega^2 phi - Gamma S_z(phi)) = -(total steady torque).
inline double potential_slope(const ValidatedParams& p, const DriveState& d, double phi) {
  const double w = p.mech().omega_phi;
  return p.mech().inertia * (w * w * phi - p.torque() * sz_steady(p, d, phi));
}

inline EffectivePotential effective_potential(const ValidatedParams& p, const DriveState& d, double phi_lo,
                                              double phi_hi, int n_points = 2001) {
  if (!(phi_hi > phi_lo) || n_points < 3) throw ConfigError("effective_potential: bad grid");
  using boost::math::quadrature::gauss_kronrod;
  auto slope = [&](double x) { return potential_slope(p, d, x); };
  const double panel = (phi_hi - phi_lo) / (n_points - 1);
  // Fixed 31-point panels no wider than the grid step; the slope is smooth on that scale.
  auto integral = [&](double a, double b) {
    if (a == b) return 0.0;
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / panel)));
    double sum = 0.0;
    for (int k = 0; k < n; ++k)
      sum += gauss_kronrod<double, 31>::integrate(slope, a + (b - a) * k / n, a + (b - a) * (k + 1) / n, 0);
    return sum;
  };

  EffectivePotential pot;
  pot.phi.resize(static_cast<std::size_t>(n_points));
  pot.U.resize(pot.phi.size());
  for (int k = 0; k < n_points; ++k) pot.phi[k] = phi_lo + (phi_hi - phi_lo) * k / (n_points - 1);
  pot.U[0] = integral(0.0, pot.phi[0]);
  for (std::size_t k = 1; k < pot.phi.size(); ++k) pot.U[k] = pot.U[k - 1] + integral(pot.phi[k - 1], pot.phi[k]);

  // Extrema: sign changes of the slope, refined by bisection.
  for (std::size_t k = 0; k + 1 < pot.phi.size(); ++k) {
    double a = pot.phi[k], b = pot.phi[k + 1];
    double fa = slope(a), fb = slope(b);
    if (fa == 0.0 || (fa < 0) == (fb < 0)) continue;
    const bool is_min = fa < 0;
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
      const double m = 0.5 * (a + b);
      const double fm = slope(m);
      if ((fm < 0) == (fa < 0)) { a = m; fa = fm; } else { b = m; }
    }
    (is_min ? pot.minima : pot.maxima).push_back(0.5 * (a + b));
  }

  if (pot.minima.size() == 2 && pot.maxima.size() == 1) {
    double a = pot.minima[0], b = pot.minima[1];
    if (std::abs(b) < std::abs(a)) std::swap(a, b);
    const double c = pot.maxima[0];
    auto U_at = [&](double x) { return integral(0.0, x); };
    auto curvature = [&](double x) {
      const double h = 1e-6 * std::max(std::abs(x), 1e-3);
      return (slope(x + h) - slope(x - h)) / (2.0 * h) / p.mech().inertia;
    };
    pot.phi_A = a;
    pot.phi_B = b;
    pot.phi_C = c;
    const double uc = U_at(c);
    pot.depth_A = uc - U_at(a);
    pot.depth_B = uc - U_at(b);
    pot.curvature_A = curvature(a);
    pot.curvature_B = curvature(b);
    pot.curvature_C = curvature(c);
  }
  return pot;
}

struct KramersResult {
  double rate_AB = 0.0;  // 1/s, escape from A
  double rate_BA = 0.0;
  double residence_ratio = 0.5;  // fraction of time in A
  double omega_A = 0.0, omega_B = 0.0, omega_C = 0.0;  // rad/s
};

/// Fraction of time in well A from the depth difference, normalized so equal depths give 1/2.
inline double residence_ratio(double depth_A, double depth_B, double kT) {
  return 1.0 / (1.0 + std::exp(-(depth_A - depth_B) / kT));
}

inline KramersResult kramers_rates(const EffectivePotential& pot, const ValidatedParams& p) {
  if (!pot.double_well()) throw NoDoubleWell("effective potential has a single well");
  const double kT = constants::k_boltzmann * p.mech().temperature;
  const double g = p.mech().gamma;
  KramersResult k;
  k.omega_A = std::sqrt(std::abs(*pot.curvature_A));
  k.omega_B = std::sqrt(std::abs(*pot.curvature_B));
  k.omega_C = std::sqrt(std::abs(*pot.curvature_C));
  const double transmission = std::sqrt(k.omega_C * k.omega_C + g * g / 4.0) - g / 2.0;
  k.rate_AB = k.omega_A / k.omega_C * transmission / constants::two_pi * std::exp(-*pot.depth_A / kT);
  k.rate_BA = k.omega_B / k.omega_C * transmission / constants::two_pi * std::exp(-*pot.depth_B / kT);
  k.residence_ratio = residence_ratio(*pot.depth_A, *pot.depth_B, kT);
  return k;
}

}  // namespace spintorque
