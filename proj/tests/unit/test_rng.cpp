#include <gtest/gtest.h>

#include <cmath>

#include "spintorque/rng.hpp"

using namespace spintorque;

// Known-answer vectors of Philox4x32-10 (Random123 distribution).
TEST(Philox, KnownAnswerZero) {
  const Philox4x32 g(0, 0);
  const auto b = g(0);
  EXPECT_EQ(b[0], 0x6627e8d5u);
  EXPECT_EQ(b[1], 0xe169c58du);
  EXPECT_EQ(b[2], 0xbc57ac4cu);
  EXPECT_EQ(b[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const Philox4x32 g(~0ull, ~0ull);
  const auto b = g(~0ull);
  EXPECT_EQ(b[0], 0x408f276du);
  EXPECT_EQ(b[1], 0x41c83b0eu);
  EXPECT_EQ(b[2], 0xa20bc7c6u);
  EXPECT_EQ(b[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const Philox4x32 g(0x299f31d0a4093822ull, 0x0370734413198a2eull);
  const auto b = g(0x85a308d3243f6a88ull);
  EXPECT_EQ(b[0], 0xd16cfe09u);
  EXPECT_EQ(b[1], 0x94fdccebu);
  EXPECT_EQ(b[2], 0x5001e420u);
  EXPECT_EQ(b[3], 0x24126ea1u);
}

TEST(Philox, StreamsDiffer) {
  EXPECT_NE(Philox4x32(7, 0)(3), Philox4x32(7, 1)(3));
  EXPECT_NE(Philox4x32(7, 0)(3), Philox4x32(8, 0)(3));
  EXPECT_EQ(Philox4x32(7, 0)(3), Philox4x32(7, 0)(3));
}

TEST(Philox, NormalMoments) {
  const Philox4x32 g(42, 0);
  const int n = 400000;
  double m = 0, m2 = 0, m4 = 0;
  for (int k = 0; k < n; ++k) {
    const double x = g.normal(k);
    m += x;
    m2 += x * x;
    m4 += x * x * x * x;
  }
  m /= n;
  m2 /= n;
  m4 /= n;
  EXPECT_NEAR(m, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(m2, 1.0, 0.01);
  EXPECT_NEAR(m4, 3.0, 0.05);
}

TEST(Philox, UniformOpenInterval) {
  const Philox4x32 g(1, 2);
  double m = 0;
  for (int k = 0; k < 100000; ++k) {
    const double u = g.uniform(k);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    m += u;
  }
  EXPECT_NEAR(m / 100000, 0.5, 0.005);
}
