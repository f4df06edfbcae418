#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "blurvo/blursim.hpp"
#include "blurvo/camera.hpp"

using namespace blurvo;

namespace {

const PinholeCamera kCam{500.0, 480.0, 320.0, 240.0, 640, 480};

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); }

Pose random_pose(std::mt19937_64& rng, double max_angle, double max_trans) {
  Vec3 axis(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  axis.normalize();
  const Vec3 t(uniform(rng, -max_trans, max_trans), uniform(rng, -max_trans, max_trans),
               uniform(rng, -max_trans, max_trans));
  return Pose(Quat(Eigen::AngleAxisd(uniform(rng, 0, max_angle), axis)), t);
}

Vec2 interior_pixel(std::mt19937_64& rng) { return {uniform(rng, 1, 638), uniform(rng, 1, 478)}; }

// Ray p(s) = R (s dir) + t with dir the unnormalised pixel direction; solve
// p(s).z = d and project.
std::optional<Vec2> oracle_transfer(const PinholeCamera& cam, const Vec2& x, double d, const Pose& T) {
  const Vec3 dir((x.x() - cam.cx) / cam.fx, (x.y() - cam.cy) / cam.fy, 1.0);
  const Mat3 R = T.quat().toRotationMatrix();
  const Vec3 Rd = R * dir;
  if (std::abs(Rd.z()) < 1e-12) return std::nullopt;
  const double s = (d - T.translation().z()) / Rd.z();
  if (s <= 0) return std::nullopt;
  const Vec3 p = s * Rd + T.translation();
  return Vec2(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);
}

template <class F>
void expect_error(ErrorCode code, F&& f) {
  try {
    f();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Camera, ProjectExamples) {
  const Vec2 c = project(kCam, Vec3(0, 0, 1));
  EXPECT_EQ(c, Vec2(320, 240));
  const PinholeCamera cam{500, 500, 320, 240, 640, 480};
  EXPECT_EQ(project(cam, Vec3(1, 0, 1)), Vec2(820, 240));
  expect_error(ErrorCode::BehindCamera, [] { project(kCam, Vec3(0, 0, 1e-6)); });
  expect_error(ErrorCode::BehindCamera, [] { project(kCam, Vec3(1, 1, -2)); });
}

TEST(Camera, BackprojectExamples) {
  EXPECT_EQ(backproject_depth(kCam, Vec2(320, 240), 3.0), Vec3(0, 0, 3));
  EXPECT_EQ(backproject_depth(kCam, Vec2(820, 240), 1.0), Vec3(1, 0, 1));
  EXPECT_EQ(backproject_unit(kCam, Vec2(320, 240)), Vec3(0, 0, 1));
  expect_error(ErrorCode::NonPositiveDepth, [] { backproject_depth(kCam, Vec2(1, 1), 0.0); });
}

TEST(Camera, BackprojectRoundTripAndCollinearity) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 1000; ++k) {
    const Vec2 x = interior_pixel(rng);
    const double d = uniform(rng, 0.1, 10);
    const Vec3 p = backproject_depth(kCam, x, d);
    EXPECT_EQ(p.z(), d);
    EXPECT_LT((project(kCam, backproject_depth(kCam, x, 2.5)) - x).norm(), 1e-9);
    EXPECT_LT((project(kCam, p) - x).norm(), 1e-9);
    const Vec3 u = backproject_unit(kCam, x);
    EXPECT_NEAR(u.norm(), 1.0, 1e-12);
    EXPECT_LT(u.cross(p / p.norm()).norm(), 1e-9);
  }
}

TEST(Camera, LevelIntrinsicsKeepPixelCentres) {
  const PinholeCamera c1 = kCam.at_level(1);
  EXPECT_EQ(c1.fx, 250.0);
  EXPECT_EQ(c1.cx, (320.0 + 0.5) / 2 - 0.5);
  EXPECT_EQ(c1.width, 320);
  // A level-0 block of 2x2 pixels maps onto one level-1 pixel centre.
  const Vec3 p(0.1, -0.2, 1.3);
  const Vec2 x0 = project(kCam, p), x1 = project(c1, p);
  EXPECT_NEAR(x1.x(), (x0.x() + 0.5) / 2 - 0.5, 1e-12);
  EXPECT_NEAR(x1.y(), (x0.y() + 0.5) / 2 - 0.5, 1e-12);
}

TEST(Camera, IntrinsicsFile) {
  const PinholeCamera c = parse_camera("500 480 319.5 239.5 640 480");
  EXPECT_EQ(c, (PinholeCamera{500, 480, 319.5, 239.5, 640, 480}));
  EXPECT_EQ(parse_camera(format_camera(kCam)), kCam);
  EXPECT_THROW(parse_camera("500 480 319.5"), Error);
  EXPECT_THROW(parse_camera("-1 480 319.5 239.5 640 480"), Error);
  EXPECT_THROW(parse_camera("500 480 319.5 239.5 640 480 7"), Error);
}

TEST(Transfer, IdentityKeepsPixel) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    const Vec2 x = interior_pixel(rng);
    EXPECT_LT((transfer_via_plane(kCam, {x, uniform(rng, 0.2, 20), Pose()}) - x).norm(), 1e-9);
  }
}

TEST(Transfer, AxialPullBack) {
  const double d = 2.0;
  const Pose T(Quat::Identity(), Vec3(0, 0, -d / 2));
  const auto r = try_transfer_via_plane(kCam, Vec2(320, 240), d, T);
  ASSERT_TRUE(r.value);
  EXPECT_LT((r.value->pixel - Vec2(320, 240)).norm(), 1e-12);
  EXPECT_NEAR(r.value->point_ref.z(), d, 1e-12);
}

TEST(Transfer, MatchesRayPlaneOracle) {
  std::mt19937_64 rng(3);
  int checked = 0;
  for (int k = 0; k < 10000; ++k) {
    const Pose T = random_pose(rng, 10.0 * std::numbers::pi / 180, 0.2);
    const Vec2 x = interior_pixel(rng);
    const double d = k < 5000 ? 2.0 : uniform(rng, 0.5, 5.0);
    const auto r = try_transfer_via_plane(kCam, x, d, T);
    const auto o = oracle_transfer(kCam, x, d, T);
    ASSERT_EQ(r.value.has_value(), o.has_value());
    if (!o) continue;
    ++checked;
    EXPECT_LT((r.value->pixel - *o).norm(), 1e-9);
    EXPECT_NEAR(r.value->point_ref.z(), d, 1e-9);
  }
  EXPECT_GT(checked, 9900);
}

TEST(Transfer, InverseReturnsToPixel) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 1000; ++k) {
    const Pose T = random_pose(rng, 0.2, 0.2);
    const Vec2 x = interior_pixel(rng);
    const double d = uniform(rng, 1.0, 4.0);
    const auto r = try_transfer_via_plane(kCam, x, d, T);
    if (!r.value) continue;
    const Vec2 back = project(kCam, T.inverse() * backproject_depth(kCam, r.value->pixel, d));
    EXPECT_LT((back - x).norm(), 1e-6);
  }
}

TEST(Transfer, Errors) {
  expect_error(ErrorCode::NonPositiveDepth, [] { transfer_via_plane(kCam, {Vec2(100, 100), 0.0, Pose()}); });
  // Camera beyond the plane, looking further away from it.
  expect_error(ErrorCode::IntersectionBehindCamera,
               [] { transfer_via_plane(kCam, {Vec2(320, 240), 1.0, Pose(Quat::Identity(), Vec3(0, 0, 2))}); });
  // Optical axis turned parallel to the plane.
  const Pose side(Quat(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitY())), Vec3::Zero());
  expect_error(ErrorCode::RayParallelToPlane, [&] { transfer_via_plane(kCam, {Vec2(320, 240), 1.0, side}); });
}

TEST(TransferJacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const double h = 1e-6;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Pose T = k == 0 ? Pose() : random_pose(rng, 0.15, 0.15);
    const Vec2 x = interior_pixel(rng);
    const double d = uniform(rng, 1.0, 4.0);
    if (!try_transfer_via_plane(kCam, x, d, T).value) continue;
    const Mat26 J = transfer_jacobian(kCam, {x, d, T});
    for (int j = 0; j < 6; ++j) {
      Vec6 dv = Vec6::Zero();
      dv[j] = h;
      const Vec2 p = transfer_via_plane(kCam, {x, d, se3_exp(Twist(dv)) * T});
      const Vec2 m = transfer_via_plane(kCam, {x, d, se3_exp(Twist(Vec6(-dv))) * T});
      const Vec2 num = (p - m) / (2 * h);
      for (int i = 0; i < 2; ++i) {
        worst = std::max(worst, std::abs(J(i, j) - num[i]) / std::max(std::abs(num[i]), 1.0));
      }
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(TransferJacobian, InPlaneTranslationAtPrincipalPoint) {
  const PinholeCamera cam{500, 500, 320, 240, 640, 480};
  const Mat26 J = transfer_jacobian(cam, {Vec2(320, 240), 1.0, Pose()});
  // Moving the virtual camera by +x along the plane shifts the reference
  // point by +x, which projects fx/d pixels to the right.
  EXPECT_NEAR(J(0, 3), 500.0, 1e-9);
  EXPECT_NEAR(J(1, 3), 0.0, 1e-9);
  // Motion along the normal leaves the axial point fixed.
  EXPECT_NEAR(J(0, 5), 0.0, 1e-9);
  EXPECT_NEAR(J(1, 5), 0.0, 1e-9);
}

TEST(TransferJacobian, FirstOrderPrediction) {
  std::mt19937_64 rng(6);
  const Pose T = random_pose(rng, 0.1, 0.1);
  const Vec2 x(250, 300);
  const double d = 2.0;
  const Vec2 x0 = transfer_via_plane(kCam, {x, d, T});
  const Mat26 J = transfer_jacobian(kCam, {x, d, T});
  Vec6 dir;
  dir << 0.3, -0.2, 0.5, 0.4, 0.1, -0.6;
  double prev = 1e300;
  for (const double eps : {1e-2, 1e-3, 1e-4}) {
    const Vec2 x1 = transfer_via_plane(kCam, {x, d, se3_exp(Twist(Vec6(eps * dir))) * T});
    const double err = (x1 - x0 - J * (eps * dir)).norm();
    EXPECT_LT(err, prev * 0.2);
    prev = err;
  }
}
