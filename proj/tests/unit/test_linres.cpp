#include <gtest/gtest.h>

#include <cmath>

#include "spintorque/linres.hpp"

using namespace spintorque;

namespace {

PhysicalParams fitted() {
  PhysicalParams p;
  p.drive.torque_coeff = 1.5e6;
  p.drive.rabi_omega = constants::two_pi * 30e3;
  return p;
}

DriveState at(double mhz) { return {constants::two_pi * 30e3, constants::two_pi * mhz * 1e6}; }

}  // namespace

TEST(Linres, ZeroDriveGivesZero) {
  const auto v = validate(fitted());
  const auto r = spin_response_xi(v, DriveState{0.0, constants::two_pi * -5e6}, v.mech().omega_phi, 1e-5);
  EXPECT_EQ(r.xi, cdouble(0.0, 0.0));
  const auto e = effective_from_xi(v, DriveState{}, r);
  EXPECT_DOUBLE_EQ(e.omega_eff, v.mech().omega_phi);
  EXPECT_DOUBLE_EQ(e.gamma_eff, v.mech().gamma);
}

TEST(Linres, StaticLimitMatchesSlope) {
  const auto v = validate(fitted());
  const DriveState d = at(-4.0);
  ProbeOptions opt;
  opt.center = 0.0;
  const auto r = spin_response_xi(v, d, constants::two_pi * 2.0, 1e-5, opt);
  const double h = 1e-7;
  const double slope = (sz_steady(v, d, h) - sz_steady(v, d, -h)) / (2 * h);
  EXPECT_NEAR(r.xi.real(), slope, 0.02 * std::abs(slope));
}

TEST(Linres, ImaginaryPartChangesSignAcrossResonance) {
  const auto v = validate(fitted());
  ProbeOptions opt;
  opt.center = 0.0;
  const auto red = spin_response_xi(v, at(-5.0), v.mech().omega_phi, 1e-5, opt);
  const auto blue = spin_response_xi(v, at(5.0), v.mech().omega_phi, 1e-5, opt);
  EXPECT_LT(red.xi.imag(), 0.0);
  EXPECT_GT(blue.xi.imag(), 0.0);
  EXPECT_GT(red.xi.real(), 0.0);
  EXPECT_LT(blue.xi.real(), 0.0);
}

TEST(Linres, WeakDriveAntisymmetry) {
  PhysicalParams p = fitted();
  p.drive.rabi_omega = constants::two_pi * 3e3;
  const auto v = validate(p);
  ProbeOptions opt;
  opt.center = 0.0;
  for (double mhz : {2.0, 5.0, 10.0}) {
    const DriveState r{p.drive.rabi_omega, constants::two_pi * -mhz * 1e6};
    const DriveState b{p.drive.rabi_omega, constants::two_pi * mhz * 1e6};
    const double im_r = spin_response_xi(v, r, v.mech().omega_phi, 1e-5, opt).xi.imag();
    const double im_b = spin_response_xi(v, b, v.mech().omega_phi, 1e-5, opt).xi.imag();
    EXPECT_NEAR(im_r, -im_b, 0.2 * std::abs(im_b));
  }
}

TEST(Linres, RedDetuningCools) {
  const auto v = validate(fitted());
  const auto e = effective_dynamics(v, at(-10.0));
  EXPECT_GT(e.dynamics.gamma_eff, v.mech().gamma);
  EXPECT_LT(e.dynamics.omega_eff, v.mech().omega_phi);
  EXPECT_LE(std::abs(e.response.omega - e.dynamics.omega_eff), 0.2 * e.dynamics.omega_eff);
}

TEST(Linres, BlueDetuningHeats) {
  const auto v = validate(fitted());
  const auto e = effective_dynamics(v, at(10.0));
  EXPECT_LT(e.dynamics.gamma_eff, v.mech().gamma);
  EXPECT_GT(e.dynamics.omega_eff, v.mech().omega_phi);
}

TEST(Linres, LinearityGate) {
  const auto v = validate(fitted());
  ProbeOptions opt;
  opt.center = 0.0;
  EXPECT_THROW(spin_response_xi(v, at(-3.0), v.mech().omega_phi, 0.01, opt), NonLinearResponse);
}

TEST(Linres, BlochAndRateModelsAgree) {
  PhysicalParams p = fitted();
  const auto rate = validate(p);
  p.model = ModelKind::FullBloch;
  p.sim.dt = 1e-9;
  const auto bloch = validate(p);
  ProbeOptions opt;
  opt.center = 0.0;
  const auto a = spin_response_xi(rate, at(-6.0), rate.mech().omega_phi, 1e-5, opt);
  const auto b = spin_response_xi(bloch, at(-6.0), bloch.mech().omega_phi, 1e-5, opt);
  EXPECT_NEAR(std::abs(a.xi - b.xi), 0.0, 0.01 * std::abs(a.xi));
}

TEST(Linres, SweepShape) {
  const auto v = validate(fitted());
  std::vector<double> grid;
  for (int k = -6; k <= 6; ++k) grid.push_back(constants::two_pi * 1e6 * 3.2 * k / 2.0);
  const auto rows = detuning_sweep(v, v.drive().rabi_omega, grid, 2);
  ASSERT_EQ(rows.size(), grid.size());
  std::size_t imax = 0, imin = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ASSERT_TRUE(rows[k].dynamics.has_value()) << rows[k].status;
    if (rows[k].dynamics->gamma_eff > rows[imax].dynamics->gamma_eff) imax = k;
    if (rows[k].dynamics->gamma_eff < rows[imin].dynamics->gamma_eff) imin = k;
  }
  EXPECT_LT(rows[imax].dynamics->effective_detuning, 0.0);
  EXPECT_GT(rows[imin].dynamics->effective_detuning, 0.0);
  EXPECT_GT(rows[imax].dynamics->gamma_eff, v.mech().gamma);
  EXPECT_LT(rows[imin].dynamics->gamma_eff, v.mech().gamma);
}

TEST(Linres, SweepWithoutDriveIsFlat) {
  const auto v = validate(fitted());
  const auto rows = detuning_sweep(v, 0.0, {constants::two_pi * -5e6, 0.0, constants::two_pi * 5e6});
  for (const auto& r : rows) {
    ASSERT_TRUE(r.dynamics.has_value());
    EXPECT_DOUBLE_EQ(r.dynamics->gamma_eff, v.mech().gamma);
    EXPECT_DOUBLE_EQ(r.dynamics->omega_eff, v.mech().omega_phi);
  }
}
