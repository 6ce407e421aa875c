#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "marsala/special_functions.hpp"
#include "oracles.hpp"

using namespace marsala;

TEST(SineIntegral, MatchesQuadrature) {
  for (double x : {1e-6, 0.01, 0.3, 0.7853981633974483, 1.0, 1.5707963267948966, 3.0, 3.999, 4.001, 6.0, 10.0, 25.0}) {
    EXPECT_NEAR(sine_integral(x), oracle::si(x), 1e-13 * std::max(1.0, std::abs(oracle::si(x)))) << "x=" << x;
  }
}

TEST(SineIntegral, OddAndLimits) {
  EXPECT_EQ(sine_integral(0.0), 0.0);
  EXPECT_DOUBLE_EQ(sine_integral(-2.5), -sine_integral(2.5));
  EXPECT_NEAR(sine_integral(1e4), std::numbers::pi / 2, 1e-4);
}

TEST(CosineIntegral, MatchesQuadrature) {
  for (double x : {0.05, 0.5, 1.0, 2.0, 3.9, 4.1, 7.0, 15.0}) {
    EXPECT_NEAR(cosine_integral(x), oracle::ci(x), 1e-12) << "x=" << x;
    EXPECT_NEAR(cosine_integral_entire(x), oracle::cin(x), 1e-12) << "x=" << x;
  }
}

TEST(CosineIntegral, DomainAndConsistency) {
  EXPECT_THROW(cosine_integral(0.0), std::domain_error);
  EXPECT_THROW(cosine_integral(-1.0), std::domain_error);
  for (double x : {0.3, 2.0, 9.0})
    EXPECT_NEAR(cosine_integral(x), std::numbers::egamma + std::log(x) - cosine_integral_entire(x), 1e-13);
  EXPECT_EQ(cosine_integral_entire(0.0), 0.0);
}
