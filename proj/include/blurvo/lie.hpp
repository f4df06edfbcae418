#pragma once

// SE(3)/SO(3) kernels and constant-twist interpolation between two poses.
//
// Conventions:
//  * A twist is ordered [omega; v] (rotation first) when flattened to 6-vector.
//  * Perturbations are left-multiplicative: T' = exp(delta) * T.
//  * Every Jacobian in this header maps a left perturbation to a left
//    perturbation of the output pose.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <utility>

#include "blurvo/error.hpp"

namespace blurvo {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Quat = Eigen::Quaterniond;

inline constexpr double kSmallAngle = 1e-8;

inline Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

/// se(3) element. Rotation part in radians, translation part in meters.
struct Twist {
  Vec3 omega = Vec3::Zero();
  Vec3 v = Vec3::Zero();

  Twist() = default;
  Twist(const Vec3& omega_, const Vec3& v_) : omega(omega_), v(v_) {}
  explicit Twist(const Vec6& xi) : omega(xi.head<3>()), v(xi.tail<3>()) {}

  Vec6 vec() const {
    Vec6 out;
    out << omega, v;
    return out;
  }
  Twist operator*(double s) const { return {omega * s, v * s}; }
  Twist operator-() const { return {-omega, -v}; }
  double norm() const { return std::sqrt(omega.squaredNorm() + v.squaredNorm()); }
};

/// Rigid transform stored as unit quaternion plus translation. The rotation
/// matrix is derived once at construction; instances are immutable.
class Pose {
 public:
  Pose() : q_(Quat::Identity()), t_(Vec3::Zero()), R_(Mat3::Identity()) {}
  Pose(const Quat& q, const Vec3& t) : q_(q.normalized()), t_(t), R_(q_.toRotationMatrix()) {}
  Pose(const Mat3& R, const Vec3& t) : Pose(Quat(R), t) {}

  static Pose identity() { return {}; }

  const Quat& quat() const { return q_; }
  const Vec3& translation() const { return t_; }
  const Mat3& rotation() const { return R_; }

  Pose operator*(const Pose& o) const { return {q_ * o.q_, R_ * o.t_ + t_}; }
  Vec3 operator*(const Vec3& p) const { return R_ * p + t_; }

  Pose inverse() const {
    const Quat qi = q_.conjugate();
    return {qi, -(qi.toRotationMatrix() * t_)};
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = R_;
    m.topRightCorner<3, 1>() = t_;
    return m;
  }

  /// Rotation angle in [0, pi].
  double angle() const {
    const double vn = q_.vec().norm();
    return 2.0 * std::atan2(vn, std::abs(q_.w()));
  }

 private:
  Quat q_;
  Vec3 t_;
  Mat3 R_;
};

namespace detail {

// (1 - cos t) / t^2 and (t - sin t) / t^3, stable for small t.
inline double coeff_b(double theta) {
  if (theta < 1e-4) return 0.5 - theta * theta / 24.0;
  const double s = std::sin(0.5 * theta);
  return 2.0 * s * s / (theta * theta);
}

inline double coeff_c(double theta) {
  if (theta < 1e-2) {
    const double t2 = theta * theta;
    return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  }
  return (theta - std::sin(theta)) / (theta * theta * theta);
}

}  // namespace detail

inline Quat so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta < kSmallAngle) {
    return Quat(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z()).normalized();
  }
  const double half = 0.5 * theta;
  const Vec3 axis = omega / theta;
  const double s = std::sin(half);
  return Quat(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
}

/// Principal-branch rotation vector of a unit quaternion.
inline Vec3 so3_log(const Quat& q_in) {
  Quat q = q_in;
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double vn = q.vec().norm();
  const double theta = 2.0 * std::atan2(vn, q.w());
  if (theta >= std::numbers::pi - 1e-6) {
    throw Error(ErrorCode::AngleNearPi, "rotation angle " + std::to_string(theta));
  }
  if (vn < 0.5 * kSmallAngle) {
    // atan(x)/x ~ 1 - x^2/3 with x = vn / w.
    return (2.0 / q.w()) * (1.0 - vn * vn / (3.0 * q.w() * q.w())) * q.vec();
  }
  return (theta / vn) * q.vec();
}

/// Left Jacobian of SO(3) (the V matrix of the SE(3) exponential).
inline Mat3 so3_left_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 W = hat(omega);
  if (theta < kSmallAngle) return Mat3::Identity() + 0.5 * W + (1.0 / 6.0) * W * W;
  return Mat3::Identity() + detail::coeff_b(theta) * W + detail::coeff_c(theta) * W * W;
}

inline Mat3 so3_left_jacobian_inverse(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 W = hat(omega);
  const double t2 = theta * theta;
  if (theta < 1e-2) {
    return Mat3::Identity() - 0.5 * W + (1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0) * W * W;
  }
  // (1 - (t/2) cot(t/2)) / t^2; the half-angle form avoids 1 - cos t.
  const double half = 0.5 * theta;
  const double k = (1.0 - half * std::cos(half) / std::sin(half)) / t2;
  return Mat3::Identity() - 0.5 * W + k * W * W;
}

inline Pose se3_exp(const Twist& xi) {
  return {so3_exp(xi.omega), so3_left_jacobian(xi.omega) * xi.v};
}

inline Twist se3_log(const Pose& p) {
  const Vec3 omega = so3_log(p.quat());
  return {omega, so3_left_jacobian_inverse(omega) * p.translation()};
}

/// Adjoint in [omega; v] ordering: exp(Ad_T xi) = T exp(xi) T^-1.
inline Mat6 adjoint(const Pose& T) {
  Mat6 A = Mat6::Zero();
  const Mat3& R = T.rotation();
  A.topLeftCorner<3, 3>() = R;
  A.bottomRightCorner<3, 3>() = R;
  A.bottomLeftCorner<3, 3>() = hat(T.translation()) * R;
  return A;
}

inline Mat6 se3_ad(const Twist& xi) {
  Mat6 a = Mat6::Zero();
  a.topLeftCorner<3, 3>() = hat(xi.omega);
  a.bottomRightCorner<3, 3>() = hat(xi.omega);
  a.bottomLeftCorner<3, 3>() = hat(xi.v);
  return a;
}

/// Left Jacobian of SE(3): exp(xi + d) ~ exp(J_l(xi) d) exp(xi).
inline Mat6 se3_left_jacobian(const Twist& xi) {
  const double theta = xi.omega.norm();
  if (theta < 1e-2) {
    // sum_k ad^k / (k+1)!
    const Mat6 ad = se3_ad(xi);
    Mat6 term = Mat6::Identity();
    Mat6 J = Mat6::Identity();
    for (int k = 1; k < 16; ++k) {
      term = term * ad / static_cast<double>(k + 1);
      J += term;
    }
    return J;
  }
  const Mat3 Jso3 = so3_left_jacobian(xi.omega);
  const Mat3 P = hat(xi.omega);
  const Mat3 Rh = hat(xi.v);
  const double t2 = theta * theta;
  const double t4 = t2 * t2;
  const double t5 = t4 * theta;
  const double st = std::sin(theta), ct = std::cos(theta);
  const double a = (theta - st) / (t2 * theta);
  const double b = (t2 + 2.0 * ct - 2.0) / (2.0 * t4);
  const double c = (2.0 * theta - 3.0 * st + theta * ct) / (2.0 * t5);
  const Mat3 PR = P * Rh;
  const Mat3 RP = Rh * P;
  const Mat3 PRP = PR * P;
  const Mat3 Q = 0.5 * Rh + a * (PR + RP + PRP) + b * (P * PR + RP * P - 3.0 * PRP) +
                 c * (PRP * P + P * PRP);
  Mat6 J = Mat6::Zero();
  J.topLeftCorner<3, 3>() = Jso3;
  J.bottomRightCorner<3, 3>() = Jso3;
  J.bottomLeftCorner<3, 3>() = Q;
  return J;
}

inline Mat6 se3_left_jacobian_inverse(const Twist& xi) {
  const Mat6 J = se3_left_jacobian(xi);
  const Mat3 Ji = so3_left_jacobian_inverse(xi.omega);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = Ji;
  out.bottomRightCorner<3, 3>() = Ji;
  out.bottomLeftCorner<3, 3>() = -Ji * J.bottomLeftCorner<3, 3>() * Ji;
  return out;
}

/// Right Jacobian: exp(xi + d) ~ exp(xi) exp(J_r(xi) d).
inline Mat6 se3_right_jacobian(const Twist& xi) { return se3_left_jacobian(-xi); }
inline Mat6 se3_right_jacobian_inverse(const Twist& xi) { return se3_left_jacobian_inverse(-xi); }

inline bool bitwise_equal(const Pose& a, const Pose& b) {
  return a.quat().coeffs() == b.quat().coeffs() && a.translation() == b.translation();
}

/// Constant-twist motion between two poses over an exposure interval.
class LocalTrajectory {
 public:
  LocalTrajectory() = default;
  LocalTrajectory(const Pose& start, const Pose& end, double exposure)
      : start_(start), end_(end), exposure_(exposure) {
    if (!(exposure >= 0.0)) throw Error(ErrorCode::BadParams, "negative exposure");
    tied_ = bitwise_equal(start, end);
    if (!tied_) rel_ = se3_log(start.inverse() * end);
  }

  /// Both endpoints at the same pose (zero motion).
  static LocalTrajectory stationary(const Pose& p, double exposure) { return {p, p, exposure}; }

  const Pose& start() const { return start_; }
  const Pose& end() const { return end_; }
  double exposure() const { return exposure_; }
  /// log(start^-1 * end), computed once.
  const Twist& relative_twist() const { return rel_; }

  /// Pose at fraction s in [0, 1] of the way from start to end.
  Pose at_fraction(double s) const {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::FractionOutOfRange, std::to_string(s));
    if (s == 0.0) return start_;
    if (s == 1.0 || tied_) return s == 1.0 ? end_ : start_;
    return start_ * se3_exp(rel_ * s);
  }

  /// Pose at time t in [0, exposure] seconds after exposure start.
  Pose pose_at(double t) const {
    if (exposure_ == 0.0) {
      if (t != 0.0) throw Error(ErrorCode::OutOfExposure, "zero exposure admits only t = 0");
      return start_;
    }
    if (!(t >= 0.0 && t <= exposure_)) throw Error(ErrorCode::OutOfExposure, std::to_string(t));
    return at_fraction(t / exposure_);
  }

  Pose mid() const { return at_fraction(0.5); }

  /// Jacobians of the pose at fraction s w.r.t. left perturbations of start
  /// and end.
  std::pair<Mat6, Mat6> jacobians(double s) const {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::FractionOutOfRange, std::to_string(s));
    if (s == 0.0) return {Mat6::Identity(), Mat6::Zero()};
    if (s == 1.0) return {Mat6::Zero(), Mat6::Identity()};
    const Twist sxi = rel_ * s;
    const Pose Ts = start_ * se3_exp(sxi);
    const Mat6 J_end = adjoint(Ts) * (s * se3_right_jacobian(sxi)) *
                       se3_right_jacobian_inverse(rel_) * adjoint(end_.inverse());
    const Mat6 J_start = Mat6::Identity() - adjoint(start_) * (s * se3_left_jacobian(sxi)) *
                                                se3_left_jacobian_inverse(rel_) *
                                                adjoint(start_.inverse());
    return {J_start, J_end};
  }

 private:
  Pose start_;
  Pose end_;
  double exposure_ = 0.0;
  Twist rel_;
  bool tied_ = true;
};

inline Pose interpolate(const LocalTrajectory& traj, double t) {
  if (!(traj.exposure() > 0.0)) throw Error(ErrorCode::OutOfExposure, "exposure must be positive");
  return traj.pose_at(t);
}

inline Pose interpolate_fraction(const Pose& start, const Pose& end, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::FractionOutOfRange, std::to_string(s));
  return LocalTrajectory(start, end, 0.0).at_fraction(s);
}

inline std::pair<Mat6, Mat6> interp_jacobians(const LocalTrajectory& traj, double s) {
  return traj.jacobians(s);
}

/// Distance between poses as (rotation angle rad, translation norm m).
inline std::pair<double, double> pose_distance(const Pose& a, const Pose& b) {
  const Pose d = a.inverse() * b;
  return {d.angle(), (a.translation() - b.translation()).norm()};
}

}  // namespace blurvo
