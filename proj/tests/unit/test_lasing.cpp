#include <gtest/gtest.h>

#include "spintorque/lasing.hpp"

using namespace spintorque;

namespace {

ValidatedParams blue() {
  PhysicalParams p;
  p.drive.torque_coeff = 1.5e6;
  p.drive.detuning = constants::two_pi * 9e6;
  p.sim.dt = 5e-6;
  return validate(p);
}

std::vector<double> rabi_grid(double max_khz) {
  std::vector<double> g;
  for (int k = 1; k <= 30; ++k) g.push_back(constants::two_pi * max_khz * 1e3 * k / 30.0);
  return g;
}

}  // namespace

TEST(Lasing, ThresholdIsZeroCrossing) {
  const auto v = blue();
  ThresholdOptions opt;
  opt.verify = false;
  const auto th = lasing_threshold(v, rabi_grid(150), 1e-3, opt);
  PhysicalParams p = v.raw();
  p.spin.t1 = 1e-3;
  const auto q = validate(p);
  EXPECT_GT(effective_dynamics(q, DriveState{0.99 * th.rabi, p.drive.detuning}).dynamics.gamma_eff, 0.0);
  EXPECT_LT(effective_dynamics(q, DriveState{1.01 * th.rabi, p.drive.detuning}).dynamics.gamma_eff, 0.0);
}

TEST(Lasing, MonotoneInRelaxationRate) {
  const auto v = blue();
  ThresholdOptions opt;
  opt.verify = false;
  double prev = 0;
  for (double inv_t1 : {500.0, 1000.0, 2000.0, 3000.0}) {
    const double th = lasing_threshold(v, rabi_grid(150), 1.0 / inv_t1, opt).rabi;
    EXPECT_GE(th, prev);
    prev = th;
  }
}

TEST(Lasing, MonotoneInDamping) {
  ThresholdOptions opt;
  opt.verify = false;
  double prev = 0;
  for (double g_hz : {8.0, 16.0, 32.0}) {
    PhysicalParams p = blue().raw();
    p.mech.gamma = constants::two_pi * g_hz;
    const double th = lasing_threshold(validate(p), rabi_grid(200), 1e-3, opt).rabi;
    EXPECT_GE(th, prev);
    prev = th;
  }
}

TEST(Lasing, LargeDampingHasNoSignChange) {
  PhysicalParams p = blue().raw();
  p.mech.gamma = constants::two_pi * 400.0;
  ThresholdOptions opt;
  opt.verify = false;
  EXPECT_THROW(lasing_threshold(validate(p), rabi_grid(150), 1e-3, opt), NoSignChange);
}

TEST(Lasing, VerifiedLimitCycle) {
  const auto th = lasing_threshold(blue(), rabi_grid(150), 1e-3);
  EXPECT_TRUE(th.verified);
  ASSERT_TRUE(th.amplitude_small_start && th.amplitude_large_start);
  EXPECT_NEAR(*th.amplitude_small_start, *th.amplitude_large_start, 0.05 * *th.amplitude_small_start);
  EXPECT_LT(*th.below_decay, 0.5);
}

TEST(Lasing, OscillationAmplitude) {
  EXPECT_DOUBLE_EQ(oscillation_amplitude({1.0, -1.0, 0.5, 3.0}), 2.0);
  EXPECT_DOUBLE_EQ(oscillation_amplitude({1.0, -1.0, 0.5, 3.0}, 2), 1.25);
  EXPECT_DOUBLE_EQ(oscillation_amplitude({}), 0.0);
}
