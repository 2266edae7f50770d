#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "radmarket/curves.hpp"

using namespace radmarket;

TEST(Curve, Validation) {
  EXPECT_THROW(Curve(Side::Supply, 1.0, 2.0, 10.0, 0.0), CurveError);
  EXPECT_THROW(Curve(Side::Supply, 2.0, 1.0, 5.0, 5.0), CurveError);
  EXPECT_THROW(Curve(Side::Demand, 2.0, 1.0, 5.0, -1.0), CurveError);
  EXPECT_NO_THROW(Curve(Side::Demand, 2.0, 2.0, 5.0, 1.0));
}

TEST(Curve, PriceAtEndpointsAndMidpoint) {
  Curve s(Side::Supply, 3.0, 1.0, 10.0, 0.0);
  Curve d(Side::Demand, 3.0, 1.0, 10.0, 0.0);
  EXPECT_DOUBLE_EQ(s.price_at(0.0), 1.0);
  EXPECT_DOUBLE_EQ(d.price_at(10.0), 1.0);
  EXPECT_DOUBLE_EQ(s.price_at(5.0), 2.0);
  EXPECT_DOUBLE_EQ(d.price_at(0.0), 3.0);
  try {
    s.price_at(10.5);
    FAIL();
  } catch (const CurveError& e) {
    EXPECT_EQ(e.code(), CurveErrc::QuantityOutOfRange);
  }
}

TEST(Curve, ExtendedBelowMinimum) {
  Curve s(Side::Supply, 3.0, 1.0, 10.0, 2.0);
  EXPECT_DOUBLE_EQ(s.extended_price(0.5), 1.0);
  EXPECT_THROW(s.price_at(0.5), CurveError);
  EXPECT_DOUBLE_EQ(s.integral(2.0), 2.0);
  EXPECT_TRUE(s.admissible(0.0));
  EXPECT_FALSE(s.admissible(1.0));
  EXPECT_TRUE(s.admissible(2.0));
}

TEST(Curve, Surplus) {
  Curve s(Side::Supply, 3.0, 1.0, 10.0, 0.0);
  Curve d(Side::Demand, 3.0, 1.0, 10.0, 0.0);
  EXPECT_DOUBLE_EQ(d.surplus(0.0, 7.0), 0.0);
  EXPECT_DOUBLE_EQ(s.surplus(0.0, -2.0), 0.0);
  EXPECT_DOUBLE_EQ(d.integral(5.0), 12.5);
  EXPECT_DOUBLE_EQ(d.surplus(5.0, 2.0), 2.5);
  EXPECT_DOUBLE_EQ(s.surplus(5.0, 2.0), 2.5);
}

TEST(Curve, MonotoneAndOwnPriceSurplusNonNegative) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    double p_min = 10.0 * u(rng), p_max = p_min + 5.0 * u(rng);
    double q_min = 3.0 * u(rng), q_max = q_min + 0.1 + 10.0 * u(rng);
    for (Side side : {Side::Supply, Side::Demand}) {
      Curve c(side, p_max, p_min, q_max, q_min);
      double prev = c.price_at(q_min);
      for (int k = 1; k <= 20; ++k) {
        double q = q_min + (q_max - q_min) * k / 20.0;
        double p = c.price_at(q);
        if (side == Side::Supply) EXPECT_GE(p, prev - 1e-12);
        else EXPECT_LE(p, prev + 1e-12);
        EXPECT_GE(c.surplus(q, p), -1e-9);
        prev = p;
      }
      EXPECT_NEAR(c.price_at(q_min), side == Side::Supply ? p_min : p_max, 1e-12);
      EXPECT_NEAR(c.price_at(q_max), side == Side::Supply ? p_max : p_min, 1e-12);
    }
  }
}

TEST(Aggregate, SinglePair) {
  std::vector<Curve> s{Curve(Side::Supply, 3.0, 1.0, 10.0, 0.0)};
  std::vector<Curve> d{Curve(Side::Demand, 3.0, 1.0, 10.0, 0.0)};
  auto x = aggregate_intersection(s, d);
  EXPECT_NEAR(x.price, 2.0, 1e-9);
  EXPECT_NEAR(x.quantity, 5.0, 1e-9);
}

TEST(Aggregate, SymmetryTwoSuppliesVsDoubledDemand) {
  std::vector<Curve> s{Curve(Side::Supply, 3.0, 1.0, 10.0, 0.0), Curve(Side::Supply, 3.0, 1.0, 10.0, 0.0)};
  std::vector<Curve> d{Curve(Side::Demand, 3.0, 1.0, 20.0, 0.0)};
  auto x = aggregate_intersection(s, d);
  EXPECT_NEAR(x.price, 2.0, 1e-9);
  EXPECT_NEAR(x.quantity, 10.0, 1e-9);
}

TEST(Aggregate, FlatFeederPinsPrice) {
  std::vector<Curve> s{Curve(Side::Supply, 4.3, 4.3, 1000.0, 0.0)};
  std::vector<Curve> d{Curve(Side::Demand, 100.0, 99.9, 10.0, 9.9), Curve(Side::Demand, 8.0, 2.0, 6.0, 0.0)};
  auto x = aggregate_intersection(s, d);
  EXPECT_EQ(x.price, 4.3);
}

TEST(Aggregate, MatchesLinearSystem) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 500 && checked < 100; ++trial) {
    double sp0 = 5.0 * u(rng), sp1 = sp0 + 0.5 + 5.0 * u(rng), sq = 1.0 + 10.0 * u(rng);
    double dp1 = 5.0 * u(rng), dp0 = dp1 + 0.5 + 8.0 * u(rng), dq = 1.0 + 10.0 * u(rng);
    // Supply p = sp0 + (sp1-sp0) q/sq ; demand p = dp0 - (dp0-dp1) q/dq.
    double a = (sp1 - sp0) / sq, b = (dp0 - dp1) / dq;
    double q = (dp0 - sp0) / (a + b);
    if (!(q > 0.0 && q < sq && q < dq)) continue;
    double p = sp0 + a * q;
    std::vector<Curve> s{Curve(Side::Supply, sp1, sp0, sq, 0.0)};
    std::vector<Curve> d{Curve(Side::Demand, dp0, dp1, dq, 0.0)};
    auto x = aggregate_intersection(s, d);
    EXPECT_NEAR(x.price, p, 1e-9);
    EXPECT_NEAR(x.quantity, q, 1e-9);
    ++checked;
  }
  EXPECT_GE(checked, 50);
}

TEST(Aggregate, NoCrossing) {
  std::vector<Curve> s{Curve(Side::Supply, 9.0, 8.0, 10.0, 0.0)};
  std::vector<Curve> d{Curve(Side::Demand, 3.0, 1.0, 10.0, 0.0)};
  try {
    aggregate_intersection(s, d);
    FAIL();
  } catch (const CurveError& e) {
    EXPECT_EQ(e.code(), CurveErrc::NoIntersection);
  }
  EXPECT_THROW(aggregate_intersection({}, d), std::invalid_argument);
}
