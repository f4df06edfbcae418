#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <random>

#include "blurvo/blursim.hpp"
#include "blurvo/lie.hpp"

using namespace blurvo;

namespace {

constexpr double kPi = std::numbers::pi;

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); }

Vec3 random_direction(std::mt19937_64& rng) {
  for (;;) {
    Vec3 v(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    if (v.norm() > 0.1 && v.norm() <= 1.0) return v.normalized();
  }
}

Twist random_twist(std::mt19937_64& rng, double angle, double trans) {
  return {random_direction(rng) * angle, random_direction(rng) * uniform(rng, 0.0, trans)};
}

// 4x4 matrix form of a twist, exponentiated by Eigen's general matrix exponential.
Eigen::Matrix4d oracle_exp(const Twist& xi) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m.topLeftCorner<3, 3>() = hat(xi.omega);
  m.topRightCorner<3, 1>() = xi.v;
  return m.exp();
}

// Local coordinates of B relative to A under left perturbation: log(B A^-1).
Vec6 left_delta(const Pose& B, const Pose& A) { return se3_log(B * A.inverse()).vec(); }

}  // namespace

TEST(Lie, ZeroTwistIsIdentity) {
  const Pose p = se3_exp(Twist());
  EXPECT_EQ(p.translation(), Vec3::Zero());
  EXPECT_DOUBLE_EQ(p.angle(), 0.0);
}

TEST(Lie, QuarterTurnAboutZ) {
  const Pose p = se3_exp(Twist(Vec3(0, 0, kPi / 2), Vec3::Zero()));
  EXPECT_NEAR((p * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
  EXPECT_EQ(p.translation(), Vec3::Zero());

  const Twist back = se3_log(p);
  EXPECT_NEAR((back.omega - Vec3(0, 0, kPi / 2)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(back.v.norm(), 0.0, 1e-15);
}

TEST(Lie, IdentityLogIsZero) {
  EXPECT_EQ(se3_log(Pose()).vec(), Vec6::Zero());
}

TEST(Lie, ExpMatchesMatrixExponential) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 200; ++k) {
    const Twist xi = random_twist(rng, uniform(rng, 0.0, 3.0), 2.0);
    EXPECT_LT((se3_exp(xi).matrix() - oracle_exp(xi)).norm(), 1e-10);
  }
}

TEST(Lie, ExpLogRoundTripAtSpecifiedAngles) {
  std::mt19937_64 rng(12);
  for (const double angle : {0.7, 1.2}) {
    const Twist xi = random_twist(rng, angle, 1.0);
    EXPECT_LT((se3_log(se3_exp(xi)).vec() - xi.vec()).norm(), 1e-9);
  }
}

TEST(Lie, ExpLogRoundTripProperty) {
  std::mt19937_64 rng(13);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const Twist xi = random_twist(rng, uniform(rng, 0.0, 3.0), 2.0);
    worst = std::max(worst, (se3_log(se3_exp(xi)).vec() - xi.vec()).norm());
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Lie, SmallAngleBranchIsContinuous) {
  for (const double a : {1e-12, 1e-9, 1e-8, 2e-8, 1e-6}) {
    const Twist xi(Vec3(a, -a, 0.5 * a), Vec3(0.1, 0.2, -0.3));
    EXPECT_LT((se3_exp(xi).matrix() - oracle_exp(xi)).norm(), 1e-14) << a;
    EXPECT_LT((se3_log(se3_exp(xi)).vec() - xi.vec()).norm(), 1e-14) << a;
  }
}

TEST(Lie, LeftJacobianInverseAcrossAngleScales) {
  std::mt19937_64 rng(21);
  for (double a = 1e-7; a < 2.0; a *= 1.37) {
    const Vec3 w = random_direction(rng) * a;
    EXPECT_LT((so3_left_jacobian(w) * so3_left_jacobian_inverse(w) - Mat3::Identity()).norm(), 1e-13) << a;
    const Twist xi(w, Vec3(0.7, -0.4, 1.1));
    EXPECT_LT((se3_log(se3_exp(xi)).vec() - xi.vec()).norm(), 1e-13) << a;
  }
}

TEST(Lie, LogNearPiThrows) {
  const Pose p = se3_exp(Twist(Vec3(0, 0, kPi - 1e-7), Vec3::Zero()));
  try {
    se3_log(p);
    FAIL() << "expected AngleNearPi";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AngleNearPi);
  }
}

TEST(Lie, QuaternionStaysNormalisedAndInverseComposes) {
  std::mt19937_64 rng(14);
  Pose acc;
  for (int k = 0; k < 1000; ++k) {
    const Pose p = se3_exp(random_twist(rng, uniform(rng, 0.0, 3.0), 1.0));
    acc = acc * p;
    EXPECT_NEAR(acc.quat().norm(), 1.0, 1e-9);
    const auto [ra, ta] = pose_distance(p * p.inverse(), Pose());
    EXPECT_LT(ra, 1e-9);
    EXPECT_LT(ta, 1e-9);
  }
}

TEST(Interpolate, Endpoints) {
  const Pose a = se3_exp(Twist(Vec3(0.1, 0.2, 0.3), Vec3(1, 2, 3)));
  const Pose b = se3_exp(Twist(Vec3(-0.2, 0.1, 0.5), Vec3(1.5, 2, 2.5)));
  const LocalTrajectory t(a, b, 0.02);
  EXPECT_TRUE(bitwise_equal(interpolate(t, 0.0), a));
  const auto [ra, ta] = pose_distance(interpolate(t, 0.02), b);
  EXPECT_LT(ra, 1e-9);
  EXPECT_LT(ta, 1e-9);
}

TEST(Interpolate, ConstantTrajectory) {
  const Pose p = se3_exp(Twist(Vec3(0.3, -0.1, 0.2), Vec3(0.5, 0, 1)));
  const LocalTrajectory t(p, p, 0.05);
  for (const double s : {0.0, 0.013, 0.025, 0.05}) EXPECT_TRUE(bitwise_equal(interpolate(t, s), p));
}

TEST(Interpolate, HalfwayHalvesRotation) {
  const Pose end = se3_exp(Twist(Vec3(0, 0, kPi / 2), Vec3::Zero()));
  const Pose mid = interpolate(LocalTrajectory(Pose(), end, 1.0), 0.5);
  EXPECT_NEAR(mid.angle(), kPi / 4, 1e-12);
  EXPECT_NEAR((mid * Vec3(1, 0, 0) - Vec3(std::cos(kPi / 4), std::sin(kPi / 4), 0)).norm(), 0.0, 1e-12);
}

TEST(Interpolate, OutsideExposureThrows) {
  const LocalTrajectory t(Pose(), se3_exp(Twist(Vec3(0, 0, 0.1), Vec3(0.1, 0, 0))), 0.02);
  EXPECT_THROW(interpolate(t, -1e-9), Error);
  EXPECT_THROW(interpolate(t, 0.0200001), Error);
  const LocalTrajectory zero(Pose(), Pose(), 0.0);
  EXPECT_TRUE(bitwise_equal(zero.pose_at(0.0), Pose()));
  EXPECT_THROW(zero.pose_at(0.001), Error);
}

TEST(Interpolate, FractionMatchesTime) {
  std::mt19937_64 rng(15);
  const Pose a = se3_exp(random_twist(rng, 1.0, 1.0));
  const Pose b = se3_exp(random_twist(rng, 0.8, 0.5)) * a;
  const LocalTrajectory t(a, b, 0.04);
  for (const double s : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
    const auto [ra, ta] = pose_distance(interpolate_fraction(a, b, s), interpolate(t, s * 0.04));
    EXPECT_LT(ra, 1e-12);
    EXPECT_LT(ta, 1e-12);
  }
  EXPECT_THROW(interpolate_fraction(a, b, 1.0 + 1e-12), Error);
  EXPECT_THROW(interpolate_fraction(a, b, -1e-12), Error);
}

TEST(Interpolate, ScrewLinearity) {
  std::mt19937_64 rng(16);
  for (int k = 0; k < 50; ++k) {
    const Pose a = se3_exp(random_twist(rng, 1.5, 1.0));
    const Pose b = se3_exp(random_twist(rng, 1.2, 0.7)) * a;
    const Pose half = interpolate_fraction(a, b, 0.5);
    const auto [ra, ta] = pose_distance(interpolate_fraction(a, half, 0.5), interpolate_fraction(a, b, 0.25));
    EXPECT_LT(ra, 1e-9);
    EXPECT_LT(ta, 1e-9);
  }
}

TEST(Interpolate, MatchesMatrixExponentialOracle) {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 50; ++k) {
    const Pose a = se3_exp(random_twist(rng, 1.0, 1.0));
    const Pose b = se3_exp(random_twist(rng, 1.0, 0.5)) * a;
    const Eigen::Matrix4d rel = (a.inverse() * b).matrix();
    const double s = uniform(rng, 0.0, 1.0);
    const Eigen::Matrix4d expected = a.matrix() * (s * rel.log()).exp();
    EXPECT_LT((interpolate_fraction(a, b, s).matrix() - expected).norm(), 1e-10);
  }
}

TEST(Interpolate, LeftInvariance) {
  std::mt19937_64 rng(18);
  for (int k = 0; k < 200; ++k) {
    const Pose G = se3_exp(random_twist(rng, uniform(rng, 0, 3), 5.0));
    const Pose a = se3_exp(random_twist(rng, uniform(rng, 0, 3), 1.0));
    const Pose b = se3_exp(random_twist(rng, uniform(rng, 0, 2), 0.5)) * a;
    const double s = uniform(rng, 0, 1);
    const auto [ra, ta] = pose_distance(interpolate_fraction(G * a, G * b, s), G * interpolate_fraction(a, b, s));
    EXPECT_LT(ra, 1e-9);
    EXPECT_LT(ta, 1e-9);
  }
}

TEST(InterpJacobians, EndpointValues) {
  const Pose a = se3_exp(Twist(Vec3(0.1, 0.2, 0.3), Vec3(1, 2, 3)));
  const Pose b = se3_exp(Twist(Vec3(-0.2, 0.1, 0.5), Vec3(1.5, 2, 2.5)));
  const LocalTrajectory t(a, b, 0.02);
  auto [Js0, Je0] = interp_jacobians(t, 0.0);
  EXPECT_EQ(Js0, Mat6::Identity());
  EXPECT_EQ(Je0, Mat6::Zero());
  auto [Js1, Je1] = interp_jacobians(t, 1.0);
  EXPECT_EQ(Js1, Mat6::Zero());
  EXPECT_EQ(Je1, Mat6::Identity());
}

// Central differences on 1,000 random instances, step 1e-6, relative error
// per entry normalised by max(|numeric entry|, 1).
TEST(InterpJacobians, MatchFiniteDifferences) {
  std::mt19937_64 rng(19);
  const double h = 1e-6;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Pose a = se3_exp(random_twist(rng, uniform(rng, 0, 3), 1.0));
    const Pose b = se3_exp(random_twist(rng, uniform(rng, 0, 2), 0.5)) * a;
    const double s = k == 0 ? 0.37 : uniform(rng, 0.0, 1.0);
    const LocalTrajectory t(a, b, 1.0);
    const Pose Ts = t.at_fraction(s);
    const auto [Js, Je] = interp_jacobians(t, s);
    for (int j = 0; j < 6; ++j) {
      Vec6 d = Vec6::Zero();
      d[j] = h;
      const Pose P = se3_exp(Twist(d)), M = se3_exp(Twist(Vec6(-d)));
      const Vec6 ns = (left_delta(interpolate_fraction(P * a, b, s), Ts) -
                       left_delta(interpolate_fraction(M * a, b, s), Ts)) / (2 * h);
      const Vec6 ne = (left_delta(interpolate_fraction(a, P * b, s), Ts) -
                       left_delta(interpolate_fraction(a, M * b, s), Ts)) / (2 * h);
      for (int i = 0; i < 6; ++i) {
        worst = std::max(worst, std::abs(Js(i, j) - ns[i]) / std::max(std::abs(ns[i]), 1.0));
        worst = std::max(worst, std::abs(Je(i, j) - ne[i]) / std::max(std::abs(ne[i]), 1.0));
      }
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(InterpJacobians, SmallRelativeMotion) {
  // Nearly coincident endpoints exercise the series branches.
  const Pose a = se3_exp(Twist(Vec3(0.3, 0.1, -0.2), Vec3(0.2, 0.1, 0.5)));
  const Pose b = se3_exp(Twist(Vec3(1e-9, 0, 2e-9), Vec3(1e-7, 0, 0))) * a;
  const LocalTrajectory t(a, b, 1.0);
  const auto [Js, Je] = interp_jacobians(t, 0.5);
  EXPECT_LT((Js - 0.5 * Mat6::Identity()).norm(), 1e-6);
  EXPECT_LT((Je - 0.5 * Mat6::Identity()).norm(), 1e-6);
}

TEST(LieJacobians, LeftJacobianMatchesFiniteDifferences) {
  // exp(xi + d) ~ exp(Jl(xi) d) exp(xi)
  std::mt19937_64 rng(20);
  const double h = 1e-6;
  for (int k = 0; k < 200; ++k) {
    const Twist xi = random_twist(rng, uniform(rng, 0, 3), 1.0);
    const Mat6 J = se3_left_jacobian(xi);
    const Pose E = se3_exp(xi);
    Mat6 num;
    for (int j = 0; j < 6; ++j) {
      Vec6 d = Vec6::Zero();
      d[j] = h;
      num.col(j) = (left_delta(se3_exp(Twist(Vec6(xi.vec() + d))), E) -
                    left_delta(se3_exp(Twist(Vec6(xi.vec() - d))), E)) / (2 * h);
    }
    EXPECT_LT((J - num).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((se3_left_jacobian_inverse(xi) * J - Mat6::Identity()).norm(), 1e-9);
  }
}

TEST(LieJacobians, AdjointMovesPerturbations) {
  // exp(Ad_T d) T == T exp(d)
  std::mt19937_64 rng(21);
  for (int k = 0; k < 100; ++k) {
    const Pose T = se3_exp(random_twist(rng, uniform(rng, 0, 3), 2.0));
    const Twist d = random_twist(rng, 0.3, 0.3);
    const auto [ra, ta] = pose_distance(se3_exp(Twist(Vec6(adjoint(T) * d.vec()))) * T, T * se3_exp(d));
    EXPECT_LT(ra, 1e-12);
    EXPECT_LT(ta, 1e-12);
  }
}
