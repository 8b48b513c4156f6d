#include <gtest/gtest.h>

#include <cmath>

#include "spintorque/dynamics.hpp"
#include "spintorque/steadystate.hpp"

using namespace spintorque;

namespace {

PhysicalParams quiet_free() {
  PhysicalParams p;
  p.mech.temperature = 0.0;
  p.drive.torque_coeff = 0.0;
  p.sim.dt = 1e-5;
  p.sim.duration = 0.05;
  p.sim.record_stride = 1;
  return p;
}

}  // namespace

TEST(Dynamics, FreeDampedOscillatorMatchesAnalytic) {
  const auto v = validate(quiet_free());
  const Protocol off = Protocol::always_off();
  const double phi0 = 1e-3;
  SimControl c = v.sim();
  c.dt = 2e-6;
  c.record_stride = 5;
  const Trajectory tr = integrate_trajectory(steady_initial_state(v, off, phi0), v, off, c);
  const double w = v.mech().omega_phi, g = v.mech().gamma;
  const double wd = std::sqrt(w * w - g * g / 4);
  double worst = 0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double t = tr.times[k];
    const double exact = phi0 * std::exp(-g * t / 2) * (std::cos(wd * t) + g / (2 * wd) * std::sin(wd * t));
    worst = std::max(worst, std::abs(tr.states[k].mech.phi - exact));
  }
  EXPECT_LT(worst, 1e-3 * phi0);
}

TEST(Dynamics, SampleCountAndSpacing) {
  PhysicalParams p = quiet_free();
  p.sim.duration = 0.1;
  p.sim.record_stride = 10;
  const auto v = validate(p);
  const Trajectory tr = integrate_trajectory(steady_initial_state(v, Protocol::always_off(), 0.0), v,
                                             Protocol::always_off(), v.sim());
  EXPECT_EQ(tr.size(), 1000u);
  EXPECT_DOUBLE_EQ(tr.times[0], 0.0);
  EXPECT_NEAR(tr.times[1] - tr.times[0], 1e-4, 1e-15);
  EXPECT_DOUBLE_EQ(tr.sample_interval(), 1e-4);
}

TEST(Dynamics, DeterministicGivenSeed) {
  PhysicalParams p;
  p.drive.torque_coeff = 1.5e6;
  p.drive.rabi_omega = constants::two_pi * 30e3;
  p.drive.detuning = constants::two_pi * -10e6;
  p.sim.duration = 0.05;
  const auto v = validate(p);
  const Protocol on = Protocol::always_on();
  const auto a = integrate_trajectory(steady_initial_state(v, on, 0.0), v, on, v.sim());
  const auto b = integrate_trajectory(steady_initial_state(v, on, 0.0), v, on, v.sim());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) ASSERT_EQ(a.states[k].mech.phi, b.states[k].mech.phi);
  SimControl c = v.sim();
  c.seed = 2;
  const auto d = integrate_trajectory(steady_initial_state(v, on, 0.0), v, on, c);
  EXPECT_NE(a.states.back().mech.phi, d.states.back().mech.phi);
}

TEST(Dynamics, KickScale) {
  const MechanicalParams m;
  const LangevinKicks k(m, 1e-5, 3);
  EXPECT_NEAR(k.stddev(), std::sqrt(2 * constants::k_boltzmann * 300 * m.gamma * 1e-5 / m.inertia), 1e-18);
  MechanicalParams cold;
  cold.temperature = 0;
  EXPECT_EQ(LangevinKicks(cold, 1e-5, 3).kick(17), 0.0);
}

TEST(Dynamics, RejectsLargeStep) {
  const auto v = validate(quiet_free());
  SimControl c = v.sim();
  c.dt = 1e-3;
  EXPECT_THROW(integrate_trajectory(steady_initial_state(v, Protocol::always_off(), 0.0), v, Protocol::always_off(), c),
               ValidationError);
}

TEST(Dynamics, SettlesAtStableSteadyAngle) {
  PhysicalParams p = quiet_free();
  p.drive.torque_coeff = 1.5e6;
  p.drive.rabi_omega = constants::two_pi * 30e3;
  p.drive.detuning = constants::two_pi * -5e6;
  p.sim.duration = 1.5;
  p.sim.record_stride = 100;
  const auto v = validate(p);
  const Protocol on = Protocol::always_on();
  const auto tr = integrate_trajectory(steady_initial_state(v, on, 0.0), v, on, v.sim());
  const double expected = operating_angle(v, DriveState{p.drive.rabi_omega, p.drive.detuning});
  EXPECT_GT(expected, 0.0);
  EXPECT_NEAR(tr.states.back().mech.phi, expected, 1e-6 * std::abs(expected) + 1e-9);
}

TEST(Dynamics, StaticShiftOnResonanceWithoutSlope) {
  PhysicalParams p = quiet_free();
  p.drive.torque_coeff = 100.0;
  p.spin.zeeman_slope = 0.0;
  p.drive.rabi_omega = constants::two_pi * 30e3;
  p.sim.duration = 0.5;
  const auto v = validate(p);
  const Protocol on = Protocol::always_on();
  const auto tr = integrate_trajectory(steady_initial_state(v, on, 0.0), v, on, v.sim());
  const double sz = steady_spin(p.spin, DriveState{p.drive.rabi_omega, 0.0}, 0.0).sz();
  EXPECT_NEAR(tr.states.back().mech.phi, static_shift(100.0, sz, p.mech.omega_phi), 1e-9);
}

TEST(Dynamics, InvariantViolationOnRunaway) {
  PhysicalParams p = quiet_free();
  p.drive.torque_coeff = 1e9;
  p.spin.zeeman_slope = 0.0;
  p.drive.rabi_omega = constants::two_pi * 100e3;
  const auto v = validate(p);
  const Protocol on = Protocol::always_on();
  EXPECT_THROW(integrate_trajectory(steady_initial_state(v, on, 0.0), v, on, v.sim()), InvariantViolated);
}

TEST(Dynamics, ThermalInitialStateStatistics) {
  const auto v = validate(PhysicalParams{});
  double s2 = 0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const double x = thermal_initial_state(v, Protocol::always_off(), k).mech.phi;
    s2 += x * x;
  }
  EXPECT_NEAR(s2 / n / v.thermal_var(), 1.0, 0.04);
}

TEST(Dynamics, SingleTrajectoryEquipartition) {
  PhysicalParams p;
  p.drive.torque_coeff = 0.0;
  p.spin.t1 = 1e3;
  p.spin.gamma_las = 0.0;
  p.sim.dt = 2e-5;
  p.sim.duration = 60.0;
  const auto v = validate(p);
  const Protocol off = Protocol::always_off();
  const auto tr = integrate_trajectory(thermal_initial_state(v, off, 9), v, off, v.sim());
  double s2 = 0;
  for (const auto& s : tr.states) s2 += s.mech.phi * s.mech.phi;
  EXPECT_NEAR(s2 / tr.size() / v.thermal_var(), 1.0, 0.1);
}

TEST(Dynamics, FullBlochAndRateAgreeNoiseFree) {
  PhysicalParams p = quiet_free();
  p.drive.torque_coeff = 1.5e6;
  p.drive.rabi_omega = constants::two_pi * 30e3;
  p.drive.detuning = constants::two_pi * -10e6;
  p.sim.duration = 0.01;
  p.sim.record_stride = 100;
  const auto rate = validate(p);
  p.model = ModelKind::FullBloch;
  p.sim.dt = 4e-9;
  p.sim.record_stride = 250000;
  const auto bloch = validate(p);
  const Protocol on = Protocol::always_on();
  const auto a = integrate_trajectory(steady_initial_state(rate, on, 0.01), rate, on, rate.sim());
  const auto b = integrate_trajectory(steady_initial_state(bloch, on, 0.01), bloch, on, bloch.sim());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_NEAR(a.times[k], b.times[k], 1e-12);
    EXPECT_NEAR(a.states[k].mech.phi, b.states[k].mech.phi, 1e-3 * 0.01);
  }
}
