#pragma once

// Pinhole projection and point transfer through a plane that is
// fronto-parallel to the reference camera.

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "blurvo/error.hpp"
#include "blurvo/lie.hpp"

namespace blurvo {

using Mat26 = Eigen::Matrix<double, 2, 6>;

struct PinholeCamera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Intrinsics for pyramid level `level` of a 2x2 box pyramid. Pixel
  /// centers stay aligned: c_L = (c + 0.5) / 2^L - 0.5.
  PinholeCamera at_level(int level) const {
    PinholeCamera c = *this;
    for (int l = 0; l < level; ++l) {
      c.fx *= 0.5;
      c.fy *= 0.5;
      c.cx = (c.cx + 0.5) * 0.5 - 0.5;
      c.cy = (c.cy + 0.5) * 0.5 - 0.5;
      c.width /= 2;
      c.height /= 2;
    }
    return c;
  }

  bool operator==(const PinholeCamera&) const = default;
};

inline constexpr double kMinProjectDepth = 1e-6;
inline constexpr double kMinPlaneLambda = 1e-9;

inline std::optional<Vec2> try_project(const PinholeCamera& cam, const Vec3& p) {
  if (!(p.z() > kMinProjectDepth)) return std::nullopt;
  return Vec2(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);
}

inline Vec2 project(const PinholeCamera& cam, const Vec3& p) {
  const auto x = try_project(cam, p);
  if (!x) throw Error(ErrorCode::BehindCamera, "z = " + std::to_string(p.z()));
  return *x;
}

inline Vec3 backproject_depth(const PinholeCamera& cam, const Vec2& x, double d) {
  if (!(d > 0.0)) throw Error(ErrorCode::NonPositiveDepth, std::to_string(d));
  return {(x.x() - cam.cx) / cam.fx * d, (x.y() - cam.cy) / cam.fy * d, d};
}

inline Vec3 backproject_unit(const PinholeCamera& cam, const Vec2& x) {
  return Vec3((x.x() - cam.cx) / cam.fx, (x.y() - cam.cy) / cam.fy, 1.0).normalized();
}

/// A pixel of virtual image i, the reference plane depth and the pose that
/// maps virtual-camera coordinates into the reference camera frame.
struct PlaneTransferQuery {
  Vec2 pixel;
  double depth;
  Pose pose;
};

/// Successful transfer together with the intermediate quantities the
/// Jacobian needs.
struct PlaneTransfer {
  Vec2 pixel;        // in the reference image
  Vec3 point_ref;    // plane intersection, reference frame (z == depth)
  Vec3 ray_ref;      // viewing ray rotated into the reference frame
};

struct TransferOutcome {
  std::optional<PlaneTransfer> value;
  ErrorCode error = ErrorCode::BadParams;
};

/// Ray/plane intersection using the quaternion components of the pose
/// directly: lambda is the z-row of R applied to the unit ray `ray`
/// (backproject_unit of the virtual-image pixel).
inline TransferOutcome try_transfer_ray(const PinholeCamera& cam, const Vec3& ray, double depth, const Pose& T) {
  if (!(depth > 0.0)) return {std::nullopt, ErrorCode::NonPositiveDepth};
  const Quat& q = T.quat();
  const double qw = q.w(), qx = q.x(), qy = q.y(), qz = q.z();
  const double q0 = qx * qz - qw * qy;
  const double q1 = qx * qw + qy * qz;
  const double q2 = qw * qw - qx * qx - qy * qy + qz * qz;
  const double lambda = 2.0 * ray.x() * q0 + 2.0 * ray.y() * q1 + ray.z() * q2;
  if (std::abs(lambda) <= kMinPlaneLambda) return {std::nullopt, ErrorCode::RayParallelToPlane};
  const double scale = (depth - T.translation().z()) / lambda;
  if (!(scale > 0.0)) return {std::nullopt, ErrorCode::IntersectionBehindCamera};
  const Vec3 p3d = scale * ray;
  const Vec3 P = T * p3d;
  const auto px = try_project(cam, P);
  if (!px) return {std::nullopt, ErrorCode::BehindCamera};
  return {PlaneTransfer{*px, P, T.rotation() * ray}, ErrorCode::BadParams};
}

inline TransferOutcome try_transfer_via_plane(const PinholeCamera& cam, const Vec2& pixel,
                                              double depth, const Pose& T) {
  return try_transfer_ray(cam, backproject_unit(cam, pixel), depth, T);
}

inline Vec2 transfer_via_plane(const PinholeCamera& cam, const PlaneTransferQuery& q) {
  const auto r = try_transfer_via_plane(cam, q.pixel, q.depth, q.pose);
  if (!r.value) throw Error(r.error, "plane transfer failed");
  return r.value->pixel;
}

/// d(transferred pixel) / d(left twist perturbation of the pose), [omega; v]
/// column order. Moving the pose slides the plane intersection along the
/// plane: dP = M (dv - [P]x domega) with M = I - w e3^T / w_z.
inline Mat26 transfer_jacobian(const PinholeCamera& cam, const PlaneTransfer& t) {
  const Vec3& P = t.point_ref;
  const Vec3& w = t.ray_ref;
  Eigen::Matrix<double, 2, 3> dproj;
  const double iz = 1.0 / P.z();
  dproj << cam.fx * iz, 0.0, -cam.fx * P.x() * iz * iz,
           0.0, cam.fy * iz, -cam.fy * P.y() * iz * iz;
  Mat3 M = Mat3::Identity();
  M.col(2) -= w / w.z();
  const Eigen::Matrix<double, 2, 3> A = dproj * M;
  Mat26 J;
  J.leftCols<3>() = -A * hat(P);
  J.rightCols<3>() = A;
  return J;
}

inline Mat26 transfer_jacobian(const PinholeCamera& cam, const PlaneTransferQuery& q) {
  const auto r = try_transfer_via_plane(cam, q.pixel, q.depth, q.pose);
  if (!r.value) throw Error(r.error, "plane transfer failed");
  return transfer_jacobian(cam, *r.value);
}

// ---------------------------------------------------------------------------
// Intrinsics file: one line "fx fy cx cy width height".

inline PinholeCamera parse_camera(const std::string& line) {
  std::istringstream in(line);
  PinholeCamera c;
  if (!(in >> c.fx >> c.fy >> c.cx >> c.cy >> c.width >> c.height)) {
    throw Error(ErrorCode::ParseError, "camera line '" + line + "'");
  }
  std::string extra;
  if (in >> extra) throw Error(ErrorCode::ParseError, "trailing data in camera line");
  if (!(c.fx > 0.0 && c.fy > 0.0) || c.width <= 0 || c.height <= 0) {
    throw Error(ErrorCode::BadParams, "camera intrinsics out of range");
  }
  return c;
}

inline PinholeCamera load_camera(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    return parse_camera(line);
  }
  throw Error(ErrorCode::ParseError, "empty camera file " + path.string());
}

inline std::string format_camera(const PinholeCamera& c) {
  std::ostringstream out;
  out.precision(17);
  out << c.fx << ' ' << c.fy << ' ' << c.cx << ' ' << c.cy << ' ' << c.width << ' ' << c.height;
  return out.str();
}

inline void save_camera(const std::filesystem::path& path, const PinholeCamera& c) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << format_camera(c) << '\n';
}

}  // namespace blurvo
