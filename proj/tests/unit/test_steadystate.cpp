#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "spintorque/steadystate.hpp"

using namespace spintorque;

namespace {

// Bistable point in the 240 Hz regime.
PhysicalParams bistable() {
  PhysicalParams p;
  p.mech.omega_phi = constants::two_pi * 240.0;
  p.spin.gamma_las = 2e5;
  p.drive.torque_coeff = 1.5e6;
  p.drive.rabi_omega = constants::two_pi * 126e3;
  p.drive.detuning = constants::two_pi * -9.85e6;
  p.sim.dt = 1e-7;
  return p;
}

DriveState drive_of(const ValidatedParams& v) { return {v.drive().rabi_omega, v.drive().detuning}; }

// Independent oracle: closed-form antiderivative of the Lorentzian torque.
double potential_oracle(const ValidatedParams& v, double phi) {
  const auto f = lorentzian_form(v.spin(), v.drive().rabi_omega);
  const double g = v.spin().zeeman_slope, d = v.drive().detuning, sk = std::sqrt(f.kappa);
  const double w = v.mech().omega_phi, I = v.mech().inertia;
  const double spring = 0.5 * I * w * w * phi * phi;
  const double spin = I * v.torque() * f.amplitude / (g * sk) * (std::atan((d + g * phi) / sk) - std::atan(d / sk));
  return spring - spin;
}

}  // namespace

TEST(Bistability, ThreeRootsSUS) {
  const auto v = validate(bistable());
  const auto roots = bistability_roots(v);
  ASSERT_EQ(roots.size(), 3u);
  EXPECT_EQ(roots[0].stability, Stability::Stable);
  EXPECT_EQ(roots[1].stability, Stability::Unstable);
  EXPECT_EQ(roots[2].stability, Stability::Stable);
  for (const auto& r : roots) EXPECT_LT(std::abs(r.residual), 1e-12);
}

TEST(Bistability, MatchesGridScanOracle) {
  const auto v = validate(bistable());
  const auto roots = bistability_roots(v);
  const auto scan = steady_angles_scan(v, drive_of(v), -0.1, 0.2, 100000);
  ASSERT_EQ(scan.size(), roots.size());
  for (std::size_t k = 0; k < roots.size(); ++k) {
    EXPECT_NEAR(roots[k].phi_root, scan[k].phi_root, 1e-8);
    EXPECT_EQ(roots[k].stability, scan[k].stability);
  }
}

TEST(Bistability, RandomDrawsMatchGridScan) {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int three = 0;
  for (int draw = 0; draw < 100; ++draw) {
    PhysicalParams p = bistable();
    p.mech.omega_phi = constants::two_pi * (200.0 + 800.0 * u(rng));
    p.spin.gamma_las = std::pow(10.0, 3.0 + 1.5 * u(rng));
    p.drive.torque_coeff = std::pow(10.0, 5.0 + 1.5 * u(rng));
    p.drive.rabi_omega = constants::two_pi * (10e3 + 60e3 * u(rng));
    p.drive.detuning = constants::two_pi * (-20e6 + 40e6 * u(rng));
    p.sim.dt = 5e-8;
    const auto v = validate(p);
    const auto roots = bistability_roots(v);
    const double w2 = p.mech.omega_phi * p.mech.omega_phi;
    const double reach = *p.drive.torque_coeff / w2 * 1.01;
    const auto scan = steady_angles_scan(v, drive_of(v), -reach, reach, 100000);
    ASSERT_EQ(roots.size(), scan.size()) << "draw " << draw;
    for (std::size_t k = 0; k < roots.size(); ++k) {
      EXPECT_NEAR(roots[k].phi_root, scan[k].phi_root, 1e-8) << "draw " << draw;
      EXPECT_LT(std::abs(roots[k].residual), 1e-12);
    }
    three += roots.size() == 3;
  }
  EXPECT_GT(three, 0);
}

TEST(Bistability, WeakDrivePerturbativeRoot) {
  PhysicalParams p = bistable();
  p.drive.torque_coeff = 1.0;
  const auto v = validate(p);
  const auto roots = bistability_roots(v);
  ASSERT_EQ(roots.size(), 1u);
  const auto f = lorentzian_form(p.spin, p.drive.rabi_omega);
  const double id = drive_strength(v, p.drive.rabi_omega);
  const double approx = id / (f.kappa + p.drive.detuning * p.drive.detuning);
  EXPECT_NEAR(roots[0].phi_root, approx, 1e-3 * std::abs(approx));
}

TEST(Bistability, DegenerateInputs) {
  PhysicalParams p = bistable();
  p.drive.torque_coeff = 0.0;
  auto roots = bistability_roots(validate(p));
  ASSERT_EQ(roots.size(), 1u);
  EXPECT_EQ(roots[0].phi_root, 0.0);
  p = bistable();
  p.spin.zeeman_slope = 0.0;
  roots = bistability_roots(validate(p));
  ASSERT_EQ(roots.size(), 1u);
  EXPECT_EQ(roots[0].stability, Stability::Stable);
}

TEST(Bistability, FiniteWindowOnDetuningGrid) {
  const auto v = validate(bistable());
  std::vector<double> grid;
  for (int k = 0; k <= 400; ++k) grid.push_back(constants::two_pi * (-14e6 + 10e6 * k / 400.0));
  const auto curve = bistability_curve(v, v.drive().rabi_omega, grid);
  const auto w = curve.window();
  ASSERT_TRUE(w.has_value());
  EXPECT_LT(w->first, v.drive().detuning);
  EXPECT_GT(w->second, v.drive().detuning);
  for (const auto& b : curve.branches) EXPECT_TRUE(b.size() == 1 || b.size() == 3);
}

TEST(Bistability, GaussianRequiresScan) {
  PhysicalParams p = bistable();
  p.spin.lineshape = Lineshape::Gaussian;
  const auto v = validate(p);
  EXPECT_THROW(bistability_roots(v), ConfigError);
  EXPECT_NO_THROW(operating_angle(v, drive_of(v)));
}

TEST(Potential, HarmonicWithoutTorque) {
  PhysicalParams p = bistable();
  p.drive.torque_coeff = 0.0;
  const auto v = validate(p);
  const auto pot = effective_potential(v, drive_of(v), -0.05, 0.05, 101);
  const double k = v.mech().inertia * v.mech().omega_phi * v.mech().omega_phi;
  for (std::size_t i = 0; i < pot.phi.size(); ++i)
    EXPECT_NEAR(pot.U[i], 0.5 * k * pot.phi[i] * pot.phi[i], 1e-12 * k * 0.05 * 0.05);
  EXPECT_FALSE(pot.double_well());
  EXPECT_THROW(kramers_rates(pot, v), NoDoubleWell);
}

TEST(Potential, MatchesClosedFormAntiderivative) {
  const auto v = validate(bistable());
  const auto pot = effective_potential(v, drive_of(v), -0.02, 0.08, 501);
  double scale = 0;
  for (double u : pot.U) scale = std::max(scale, std::abs(u));
  for (std::size_t i = 0; i < pot.phi.size(); ++i) EXPECT_NEAR(pot.U[i], potential_oracle(v, pot.phi[i]), 1e-9 * scale);
}

TEST(Potential, ExtremaCoincideWithRoots) {
  const auto v = validate(bistable());
  const auto roots = bistability_roots(v);
  const auto pot = effective_potential(v, drive_of(v), -0.02, 0.08, 2001);
  ASSERT_TRUE(pot.double_well());
  EXPECT_NEAR(*pot.phi_A, roots[0].phi_root, 1e-6);
  EXPECT_NEAR(*pot.phi_C, roots[1].phi_root, 1e-6);
  EXPECT_NEAR(*pot.phi_B, roots[2].phi_root, 1e-6);
}

TEST(Potential, SlopeEqualsMinusTorque) {
  const auto v = validate(bistable());
  const auto pot = effective_potential(v, drive_of(v), -0.02, 0.08, 2001);
  const double w2 = v.mech().omega_phi * v.mech().omega_phi, I = v.mech().inertia;
  double worst = 0, scale = 0;
  for (std::size_t i = 1; i + 1 < pot.phi.size(); ++i) {
    const double fd = (pot.U[i + 1] - pot.U[i - 1]) / (pot.phi[i + 1] - pot.phi[i - 1]);
    const double torque = w2 * pot.phi[i] - v.torque() * sz_steady(v, drive_of(v), pot.phi[i]);
    worst = std::max(worst, std::abs(fd - I * torque));
    scale = std::max(scale, std::abs(I * torque));
  }
  EXPECT_LT(worst, 1e-3 * scale);
}

TEST(Kramers, ResidenceRatioArithmetic) {
  const double kT = 1.0;
  EXPECT_DOUBLE_EQ(residence_ratio(3.0, 3.0, kT), 0.5);
  EXPECT_NEAR(residence_ratio(5.0, 3.0, kT), 0.88079707797788244, 1e-15);
  double prev = 0;
  for (double d = -5; d <= 5; d += 0.5) {
    const double r = residence_ratio(3.0, 3.0 - d, kT);
    EXPECT_GE(r, prev);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
    prev = r;
  }
}

TEST(Kramers, RatesFromPotential) {
  const auto v = validate(bistable());
  const auto pot = effective_potential(v, drive_of(v), -0.02, 0.08, 2001);
  const auto k = kramers_rates(pot, v);
  const double kT = constants::k_boltzmann * v.mech().temperature;
  const double g = v.mech().gamma;
  const double pref = (std::sqrt(k.omega_C * k.omega_C + g * g / 4) - g / 2) / constants::two_pi;
  EXPECT_NEAR(k.rate_AB, k.omega_A / k.omega_C * pref * std::exp(-*pot.depth_A / kT), 1e-12 * k.rate_AB);
  EXPECT_NEAR(k.rate_BA, k.omega_B / k.omega_C * pref * std::exp(-*pot.depth_B / kT), 1e-12 * k.rate_BA);
  EXPECT_GT(*pot.depth_A, 0.0);
  EXPECT_GT(*pot.depth_B, 0.0);
  EXPECT_GT(k.rate_AB, 0.0);
}

TEST(Hysteresis, MonostableTracesCoincide) {
  PhysicalParams p = bistable();
  p.spin.gamma_las = 2000.0;
  p.drive.rabi_omega = constants::two_pi * 40e3;
  p.drive.torque_coeff = 1e4;
  p.sim.dt = 1e-5;
  const auto v = validate(p);
  const double from = constants::two_pi * -14e6, to = constants::two_pi * -4e6;
  const auto h = hysteresis_sweep(v, p.drive.rabi_omega, from, to, constants::two_pi * 2e6, 500);
  EXPECT_FALSE(h.switch_forward.has_value());
  const auto [lo, hi] = std::minmax_element(h.up.phi.begin(), h.up.phi.end());
  EXPECT_LT(h.loop_area, 1e-2 * (*hi - *lo) * (to - from));
}

TEST(Hysteresis, BistableLoopBracketsWindow) {
  const auto v = validate(bistable());
  std::vector<double> grid;
  for (int k = 0; k <= 1000; ++k) grid.push_back(constants::two_pi * (-13e6 + 6e6 * k / 1000.0));
  const auto w = bistability_curve(v, v.drive().rabi_omega, grid).window();
  ASSERT_TRUE(w.has_value());
  const auto h = hysteresis_sweep(v, v.drive().rabi_omega, constants::two_pi * -13e6, constants::two_pi * -7e6,
                                  constants::two_pi * 3e6, 3000);
  ASSERT_TRUE(h.switch_forward && h.switch_backward);
  EXPECT_GT(h.loop_area, 0.0);
  EXPECT_LE(*h.switch_backward, *h.switch_forward);
  const double step = constants::two_pi * 6e6 / 3000 * 2;
  const double near = constants::two_pi * 0.3e6;
  EXPECT_LE(*h.switch_backward, w->first + step);
  EXPECT_GE(*h.switch_forward, w->second - step);
  EXPECT_NEAR(*h.switch_backward, w->first, near);
  EXPECT_NEAR(*h.switch_forward, w->second, near);
}
