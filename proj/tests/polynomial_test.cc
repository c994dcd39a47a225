#include "affineglue/polynomial.h"

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "affineglue/errors.h"
#include "testing/oracles.h"

namespace affineglue {
namespace {

using testing::BisectionRoots;
using testing::FromRoots;

TEST(RealRoots, FactoredSixRealRoots) {
  // (x^2 - 1)(x^2 - 4)(x^2 - 9)
  const Degree6Polynomial p = FromRoots({-3, -2, -1, 1, 2, 3}, {}, 1.0);
  const std::vector<double> roots = RealRoots(p);
  const std::vector<double> expected = {-3, -2, -1, 1, 2, 3};
  ASSERT_EQ(roots.size(), expected.size());
  for (size_t i = 0; i < roots.size(); ++i) EXPECT_NEAR(roots[i], expected[i], 1e-10);
}

TEST(RealRoots, NoRealRoots) {
  Degree6Polynomial p;
  p.coeffs = {1, 0, 0, 0, 0, 0, 1};
  try {
    RealRoots(p);
    FAIL() << "expected NoRealRoots";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNoRealRoots);
  }
}

TEST(RealRoots, ZeroPolynomial) {
  EXPECT_THROW(RealRoots(Degree6Polynomial{}), Error);
}

TEST(RealRoots, LowerDegreeAndZeroRoots) {
  // x^2 (x - 2): leading coefficients vanish and two roots sit at zero.
  Degree6Polynomial p;
  p.coeffs = {0, 0, -2, 1, 0, 0, 0};
  const auto roots = RealRoots(p);
  ASSERT_EQ(roots.size(), 2u);
  EXPECT_NEAR(roots[0], 0.0, 1e-12);
  EXPECT_NEAR(roots[1], 2.0, 1e-12);
}

TEST(RealRoots, ResidualBound) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    Degree6Polynomial p;
    for (double& c : p.coeffs) c = u(rng);
    std::vector<double> roots;
    try {
      roots = RealRoots(p);
    } catch (const Error&) {
      continue;
    }
    EXPECT_LE(roots.size(), 6u);
    EXPECT_TRUE(std::is_sorted(roots.begin(), roots.end()));
    for (const double r : roots) {
      // Backward-error scale: sum |c_i| |r|^i.
      double scale = 0.0;
      for (int i = 0; i <= 6; ++i) scale += std::abs(p.coeffs[i]) * std::pow(std::abs(r), i);
      EXPECT_LT(std::abs(p.Evaluate(r)), 1e-9 * scale) << r;
    }
  }
}

TEST(RealRoots, MatchesBisectionOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> root_dist(-4.0, 4.0);
  std::uniform_int_distribution<int> num_real(0, 3);
  int compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int pairs = num_real(rng);
    std::vector<double> real;
    // Separated roots keep every root a simple sign change for the oracle.
    while (static_cast<int>(real.size()) < 6 - 2 * pairs) {
      const double r = root_dist(rng);
      bool separated = true;
      for (const double s : real) separated &= std::abs(s - r) > 0.05;
      if (separated) real.push_back(r);
    }
    std::vector<std::pair<double, double>> quadratics;
    for (int i = 0; i < pairs; ++i) {
      const double b = root_dist(rng);
      quadratics.emplace_back(b, b * b / 4.0 + std::uniform_real_distribution<double>(0.5, 4.0)(rng));
    }
    const Degree6Polynomial p =
        FromRoots(real, quadratics, std::uniform_real_distribution<double>(0.5, 2.0)(rng));
    const std::vector<double> oracle = BisectionRoots(p, 5.0);
    std::sort(real.begin(), real.end());
    ASSERT_EQ(oracle.size(), real.size()) << "oracle setup, trial " << trial;
    if (real.empty()) {
      EXPECT_THROW(RealRoots(p), Error);
      continue;
    }
    const std::vector<double> roots = RealRoots(p);
    ASSERT_EQ(roots.size(), oracle.size()) << "trial " << trial;
    for (size_t i = 0; i < roots.size(); ++i) {
      EXPECT_NEAR(roots[i], oracle[i], 1e-8 * std::max(1.0, std::abs(oracle[i])))
          << "trial " << trial;
    }
    ++compared;
  }
  EXPECT_GT(compared, 700);
}

TEST(Degree6Polynomial, DerivativeMatchesFiniteDifference) {
  Degree6Polynomial p;
  p.coeffs = {0.3, -1.2, 0.7, 2.0, -0.4, 0.1, 0.05};
  for (double x = -2.0; x <= 2.0; x += 0.25) {
    const double h = 1e-6;
    const double fd = (p.Evaluate(x + h) - p.Evaluate(x - h)) / (2 * h);
    EXPECT_NEAR(p.Derivative(x), fd, 1e-6);
  }
}

}  // namespace
}  // namespace affineglue
