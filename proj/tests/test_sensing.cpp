#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "linecover/sensing.hpp"

using namespace linecover;

namespace {

const SensorSpec kSpec{0.95, 0.15};

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// Central difference of pi in coordinate c (0 = x, 1 = y) of sensor j.
double fd_pi(const ReprPoint& l, SensorNetwork net, std::size_t j, int c, double h) {
  auto shifted = [&](double s) {
    SensorNetwork n = net;
    (c == 0 ? n.positions[j].x : n.positions[j].y) += s;
    return failure_prob(l, n, kSpec);
  };
  return (shifted(h) - shifted(-h)) / (2 * h);
}

struct Config {
  ReprPoint line;
  SensorNetwork net;
};

// Sensors scattered within a kilometre of the line so every term matters.
Config random_config(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> ang(0.0, kPi), off(-8.0, 8.0), t(-5.0, 5.0), d(-0.6, 0.6);
  Config c;
  c.line = {ang(rng), off(rng)};
  const Position foot{c.line.p * std::cos(c.line.alpha), c.line.p * std::sin(c.line.alpha)};
  for (std::size_t k = 0; k < m; ++k) {
    const double s = t(rng), e = d(rng);
    c.net.positions.push_back({foot.x - s * std::sin(c.line.alpha) + e * std::cos(c.line.alpha),
                               foot.y + s * std::cos(c.line.alpha) + e * std::sin(c.line.alpha)});
  }
  return c;
}

}  // namespace

TEST(GammaInertial, Examples) {
  EXPECT_DOUBLE_EQ(gamma_inertial({2, 3}, {2, 3}, kSpec), 0.95);
  const double g = gamma_inertial({1, 0}, {0, 0}, kSpec);
  EXPECT_NEAR(g, 0.95 * std::exp(-1 / 0.15), 1e-18);
  EXPECT_NEAR(g, 1.21e-3, 5e-6);
  EXPECT_EQ(gamma_inertial({1e3, 0}, {0, 0}, kSpec), 0.0);
  EXPECT_DOUBLE_EQ(gamma_inertial({0.3, -0.2}, {1, 1}, kSpec), gamma_inertial({1, 1}, {0.3, -0.2}, kSpec));
}

TEST(GammaRepr, Examples) {
  EXPECT_DOUBLE_EQ(gamma_repr({kPi / 2, 3}, {5, 3}, kSpec), 0.95);
  EXPECT_NEAR(gamma_repr({kPi / 2, 3}, {0, 1}, kSpec), 0.95 * std::exp(-4 / 0.15), 1e-25);
  EXPECT_DOUBLE_EQ(gamma_repr({0, 3}, {3, 100}, kSpec), 0.95);
}

TEST(GammaRepr, InvariantUnderCanonicalization) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ang(-10, 10), off(-3, 3), pos(-3, 3);
  for (int k = 0; k < 1000; ++k) {
    const ReprPoint raw{ang(rng), off(rng)};
    const Position a{pos(rng), pos(rng)};
    ASSERT_NEAR(gamma_repr(raw, a, kSpec), gamma_repr(canonicalize(raw), a, kSpec), 1e-12);
  }
}

TEST(FailureProb, Examples) {
  const ReprPoint l{kPi / 2, 3};
  EXPECT_EQ(failure_prob(l, SensorNetwork{}, kSpec), 1.0);
  EXPECT_NEAR(failure_prob(l, SensorNetwork{{{0, 3}}}, kSpec), 0.05, 1e-15);
  EXPECT_NEAR(failure_prob(l, SensorNetwork{{{0, 3}, {4, 3}}}, kSpec), 0.0025, 1e-15);
}

TEST(FailureProb, PerfectSensorReachesZero) {
  const SensorSpec perfect{1.0, 0.15};
  EXPECT_EQ(failure_prob({0, 1}, SensorNetwork{{{1, 5}}}, perfect), 0.0);
  EXPECT_THROW((SensorSpec{1.5, 0.15}.validate()), InputError);
  EXPECT_THROW((SensorSpec{0.5, 0.0}.validate()), InputError);
}

TEST(FailureProb, OrderInvariantAndMonotone) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 500; ++k) {
    auto c = random_config(rng, 5);
    double prev = 1.0;
    SensorNetwork grow;
    for (const auto& a : c.net.positions) {
      grow.positions.push_back(a);
      const double pi = failure_prob(c.line, grow, kSpec);
      ASSERT_LE(pi, prev);
      ASSERT_GE(pi, 0.0);
      prev = pi;
    }
    std::shuffle(c.net.positions.begin(), c.net.positions.end(), rng);
    ASSERT_NEAR(failure_prob(c.line, c.net, kSpec), prev, 1e-15);
  }
}

TEST(GradFailure, ZeroOnTheLine) {
  const SensorNetwork net{{{2, 3}, {0, 0.5}}};
  EXPECT_EQ(grad_failure({kPi / 2, 3}, net, kSpec, 0), Eigen::Vector2d::Zero());
}

TEST(GradFailure, IsolatedSensorReducesToKernelGradient) {
  const ReprPoint l{0.4, 1.0};
  const SensorNetwork net{{{1.0, 0.2}, {50, 50}}};
  const Eigen::Vector2d g = grad_failure(l, net, kSpec, 0);
  const double d = l.p - (std::cos(0.4) * 1.0 + std::sin(0.4) * 0.2);
  const double gam = 0.95 * std::exp(-d * d / 0.15);
  const Eigen::Vector2d ref = -gam * (2 * d / 0.15) * Eigen::Vector2d(std::cos(0.4), std::sin(0.4));
  EXPECT_NEAR((g - ref).norm(), 0.0, 1e-15);
}

TEST(GradFailure, MatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const double h = 1e-5;
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_config(rng, 1 + trial % 4);
    Eigen::VectorXd analytic(2 * c.net.size()), fd(2 * c.net.size());
    for (std::size_t j = 0; j < c.net.size(); ++j) {
      analytic.segment<2>(2 * j) = grad_failure(c.line, c.net, kSpec, j);
      fd(2 * j) = fd_pi(c.line, c.net, j, 0, h);
      fd(2 * j + 1) = fd_pi(c.line, c.net, j, 1, h);
    }
    ASSERT_LE(max_abs(analytic - fd), 1e-6 * std::max(max_abs(fd), 1e-3));
  }
}

TEST(HessianFailure, MatchesFiniteDifferencesOfGradient) {
  std::mt19937_64 rng(5);
  const double h = 1e-5;
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_config(rng, 1 + trial % 4);
    const std::size_t m = c.net.size();
    Eigen::MatrixXd analytic(2 * m, 2 * m), fd(2 * m, 2 * m);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < m; ++k) analytic.block<2, 2>(2 * j, 2 * k) = hessian_failure(c.line, c.net, kSpec, j, k);
    for (std::size_t k = 0; k < m; ++k)
      for (int coord = 0; coord < 2; ++coord) {
        SensorNetwork up = c.net, down = c.net;
        (coord == 0 ? up.positions[k].x : up.positions[k].y) += h;
        (coord == 0 ? down.positions[k].x : down.positions[k].y) -= h;
        for (std::size_t j = 0; j < m; ++j) {
          const Eigen::Vector2d col =
              (grad_failure(c.line, up, kSpec, j) - grad_failure(c.line, down, kSpec, j)) / (2 * h);
          fd.block<2, 1>(2 * j, 2 * k + coord) = col;
        }
      }
    ASSERT_LE(max_abs(analytic - fd), 1e-5 * std::max(max_abs(fd), 1e-3));
    ASSERT_LE(max_abs(analytic - analytic.transpose()), 1e-15 * std::max(max_abs(analytic), 1.0));
  }
}

TEST(HessianFailure, VanishesForInvisibleSensors) {
  const ReprPoint l{1.0, 0.0};
  const SensorNetwork far{{{40, -30}}};
  EXPECT_LE(hessian_failure(l, far, kSpec, 0, 0).norm(), 1e-30);
  EXPECT_EQ(hessian_failure(l, SensorNetwork{{{40, -40}, {-40, 40}}}, kSpec, 0, 1), Eigen::Matrix2d::Zero());
}

TEST(HessianFailure, CrossBlocksTranspose) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_config(rng, 3);
    const Eigen::Matrix2d a = hessian_failure(c.line, c.net, kSpec, 0, 2);
    const Eigen::Matrix2d b = hessian_failure(c.line, c.net, kSpec, 2, 0);
    ASSERT_LE((a - b.transpose()).norm(), 1e-15);
  }
}

TEST(Consistency, ReprMatchesInertialAtFoot) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> slope_angle(-kPi / 2, kPi / 2), off(-10, 10), pos(-10, 10);
  std::uniform_real_distribution<double> tiny(-1e-6, 1e-6);
  for (int k = 0; k < 10000; ++k) {
    ReprPoint l;
    switch (k % 4) {
      case 0: l = vertical_line(off(rng)); break;
      case 1: l = canonicalize(tiny(rng), off(rng)); break;
      case 2: l = {kPi / 2 + tiny(rng), off(rng)}; break;
      default: l = line_from_slope_intercept(std::tan(slope_angle(rng)), off(rng)); break;
    }
    const Position a{pos(rng) * 0.1, pos(rng) * 0.1};
    const Position zeta = foot_of_perpendicular(a, l);
    ASSERT_NEAR(gamma_repr(l, a, kSpec), gamma_inertial(zeta, a, kSpec), 1e-12);
  }
}
