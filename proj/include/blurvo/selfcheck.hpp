#pragma once

// Numerical self-checks: analytic Jacobians against central differences and
// closed-form kernels against independent formulations, on seeded random
// instances. Used by the `selfcheck` command and the test suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "blurvo/blursim.hpp"
#include "blurvo/camera.hpp"
#include "blurvo/image.hpp"
#include "blurvo/lie.hpp"
#include "blurvo/tracker.hpp"

namespace blurvo {

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  int cases = 0;

  bool passed() const { return cases > 0 && std::isfinite(max_error) && max_error <= tolerance; }
};

struct SelfcheckOptions {
  uint64_t seed = 42;
  /// Analytic blocks whose sign is flipped before comparison (negative control).
  std::set<std::string> inject_fault;
};

/// Names of the Jacobian blocks that can be fault-injected.
inline std::vector<std::string> jacobian_block_names() {
  return {"interp_J_start", "interp_J_end", "transfer_J_rot", "transfer_J_trans", "residual_J_start",
          "residual_J_end"};
}

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); }

inline Vec3 random_unit(std::mt19937_64& rng) {
  Vec3 v;
  do {
    v = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  } while (v.norm() < 0.1 || v.norm() > 1.0);
  return v.normalized();
}

inline Twist random_twist(std::mt19937_64& rng, double max_angle, double max_trans) {
  return Twist(random_unit(rng) * uniform(rng, 0.0, max_angle), random_unit(rng) * uniform(rng, 0.0, max_trans));
}

/// Frobenius relative error, normalised by max(|numeric|, 1).
template <class A, class B>
double rel_error(const A& analytic, const B& numeric) {
  return (analytic - numeric).norm() / std::max(numeric.norm(), 1.0);
}

inline double sign_for(const SelfcheckOptions& o, const std::string& block) {
  return o.inject_fault.count(block) ? -1.0 : 1.0;
}

}  // namespace detail

inline CheckResult check_exp_log(const SelfcheckOptions& o, int cases = 1000) {
  std::mt19937_64 rng(o.seed);
  CheckResult r{"lie_exp_log_roundtrip", 0.0, 1e-8, cases};
  for (int k = 0; k < cases; ++k) {
    const Twist xi = detail::random_twist(rng, 3.0, 2.0);
    r.max_error = std::max(r.max_error, (se3_log(se3_exp(xi)).vec() - xi.vec()).norm());
  }
  return r;
}

inline CheckResult check_interp_endpoints(const SelfcheckOptions& o, int cases = 200) {
  std::mt19937_64 rng(o.seed + 1);
  CheckResult r{"interp_endpoints", 0.0, 1e-9, cases};
  for (int k = 0; k < cases; ++k) {
    const Pose a = se3_exp(detail::random_twist(rng, 2.0, 1.0));
    const Pose b = se3_exp(detail::random_twist(rng, 0.5, 0.2)) * a;
    const LocalTrajectory t(a, b, 0.02);
    const Pose p0 = t.pose_at(0.0);
    if (!bitwise_equal(p0, a)) r.max_error = std::numeric_limits<double>::infinity();
    const auto [ra, ta] = pose_distance(t.pose_at(0.02), b);
    r.max_error = std::max({r.max_error, ra, ta});
  }
  return r;
}

inline CheckResult check_interp_jacobian(const SelfcheckOptions& o, bool end_block, int cases = 200) {
  const std::string name = end_block ? "interp_J_end" : "interp_J_start";
  std::mt19937_64 rng(o.seed + (end_block ? 3 : 2));
  CheckResult r{name, 0.0, 1e-4, cases};
  const double h = 1e-6;
  for (int k = 0; k < cases; ++k) {
    const Pose a = se3_exp(detail::random_twist(rng, 2.0, 1.0));
    const Pose b = se3_exp(detail::random_twist(rng, 1.0, 0.5)) * a;
    const double s = detail::uniform(rng, 0.05, 0.95);
    const LocalTrajectory t(a, b, 1.0);
    const Pose Ts = t.at_fraction(s);
    const auto [Js, Je] = t.jacobians(s);
    Mat6 num;
    for (int j = 0; j < 6; ++j) {
      Vec6 d = Vec6::Zero();
      d[j] = h;
      auto moved = [&](double sign) {
        const Pose pert = se3_exp(Twist(Vec6(sign * d)));
        const LocalTrajectory tp = end_block ? LocalTrajectory(a, pert * b, 1.0) : LocalTrajectory(pert * a, b, 1.0);
        return se3_log(tp.at_fraction(s) * Ts.inverse()).vec();
      };
      num.col(j) = (moved(1.0) - moved(-1.0)) / (2.0 * h);
    }
    const Mat6 ana = detail::sign_for(o, name) * (end_block ? Je : Js);
    r.max_error = std::max(r.max_error, detail::rel_error(ana, num));
  }
  return r;
}

/// Quaternion-form plane transfer against a rotation-matrix ray/plane
/// intersection written independently here.
inline CheckResult check_transfer_oracle(const SelfcheckOptions& o, int cases = 500) {
  std::mt19937_64 rng(o.seed + 4);
  const PinholeCamera cam{300.0, 310.0, 160.0, 120.0, 320, 240};
  CheckResult r{"transfer_ray_plane_oracle", 0.0, 1e-9, 0};
  for (int k = 0; k < cases; ++k) {
    const Pose T = se3_exp(detail::random_twist(rng, 0.3, 0.2));
    const Vec2 x(detail::uniform(rng, 0, 319), detail::uniform(rng, 0, 239));
    const double d = detail::uniform(rng, 0.8, 3.0);
    const auto got = try_transfer_via_plane(cam, x, d, T);
    const Mat3 R = T.matrix().topLeftCorner<3, 3>();
    const Vec3 t = T.matrix().topRightCorner<3, 1>();
    const Vec3 dir((x.x() - cam.cx) / cam.fx, (x.y() - cam.cy) / cam.fy, 1.0);
    const Vec3 w = R * dir;
    const double s = (d - t.z()) / w.z();
    const Vec3 P = t + s * w;
    if (!got.value || !(s > 0.0)) continue;
    const Vec2 ref(cam.fx * P.x() / P.z() + cam.cx, cam.fy * P.y() / P.z() + cam.cy);
    r.max_error = std::max(r.max_error, (got.value->pixel - ref).norm());
    ++r.cases;
  }
  return r;
}

inline CheckResult check_transfer_jacobian(const SelfcheckOptions& o, bool translation_block, int cases = 300) {
  const std::string name = translation_block ? "transfer_J_trans" : "transfer_J_rot";
  std::mt19937_64 rng(o.seed + (translation_block ? 6 : 5));
  const PinholeCamera cam{300.0, 310.0, 160.0, 120.0, 320, 240};
  CheckResult r{name, 0.0, 1e-4, 0};
  const double h = 1e-6;
  for (int k = 0; k < cases; ++k) {
    const Pose T = se3_exp(detail::random_twist(rng, 0.3, 0.2));
    const Vec2 x(detail::uniform(rng, 0, 319), detail::uniform(rng, 0, 239));
    const double d = detail::uniform(rng, 0.8, 3.0);
    const auto base = try_transfer_via_plane(cam, x, d, T);
    if (!base.value) continue;
    const Mat26 J = transfer_jacobian(cam, *base.value);
    Eigen::Matrix<double, 2, 3> num;
    bool ok = true;
    for (int j = 0; j < 3; ++j) {
      Vec6 dv = Vec6::Zero();
      dv[j + (translation_block ? 3 : 0)] = h;
      const auto p = try_transfer_via_plane(cam, x, d, se3_exp(Twist(dv)) * T);
      const auto m = try_transfer_via_plane(cam, x, d, se3_exp(Twist(Vec6(-dv))) * T);
      if (!p.value || !m.value) {
        ok = false;
        break;
      }
      num.col(j) = (p.value->pixel - m.value->pixel) / (2.0 * h);
    }
    if (!ok) continue;
    const Eigen::Matrix<double, 2, 3> ana =
        detail::sign_for(o, name) * (translation_block ? J.rightCols<3>() : J.leftCols<3>());
    // Pixel-scale Jacobians: normalise by the numeric magnitude only.
    r.max_error = std::max(r.max_error, (ana - num).norm() / std::max(num.norm(), 1e-3));
    ++r.cases;
  }
  return r;
}

inline CheckResult check_bilinear_gradient(const SelfcheckOptions& o, int cases = 500) {
  std::mt19937_64 rng(o.seed + 7);
  const GrayImage img = make_noise_texture(32, 32, o.seed + 7);
  CheckResult r{"bilinear_gradient", 0.0, 1e-6, 0};
  const double h = 1e-7;
  for (int k = 0; k < cases; ++k) {
    const double u = detail::uniform(rng, 1.0, 30.0), v = detail::uniform(rng, 1.0, 30.0);
    const double fu = u - std::floor(u), fv = v - std::floor(v);
    if (std::min({fu, 1.0 - fu, fv, 1.0 - fv}) < 1e-4) continue;
    const auto s = try_sample_with_gradient(img, u, v);
    const Vec2 num((*try_sample(img, u + h, v) - *try_sample(img, u - h, v)) / (2 * h),
                   (*try_sample(img, u, v + h) - *try_sample(img, u, v - h)) / (2 * h));
    r.max_error = std::max(r.max_error, (s->gradient - num).norm());
    ++r.cases;
  }
  return r;
}

/// Small blurred-tracking problem shared by the residual checks.
struct ResidualFixture {
  PinholeCamera cam{150.0, 150.0, 79.5, 59.5, 160, 120};
  TrackerConfig cfg;
  Keyframe kf;
  ImagePyramid current;

  explicit ResidualFixture(uint64_t seed) {
    cfg.pyramid_levels = 1;
    cfg.keypoint_count = 64;
    cfg.keypoint_margin = 2;
    const LocalTrajectory traj(Pose(), Pose(), 0.0);
    const std::vector<FrameSpec> frames{{0.0, traj}};
    PlanarScene scene = covering_scene(cam, frames, 1.5, 0.004, seed, 2.0, 64);
    const SharpRender sharp = render_sharp_full(scene, cam, Pose());
    kf = make_keyframe(sharp.image, sharp.depth, cam, Pose(), cfg);
    current = build_pyramid(sharp.image, 1, 1);
  }
};

inline CheckResult check_residual_jacobian(const SelfcheckOptions& o, bool end_block, int cases = 200) {
  const std::string name = end_block ? "residual_J_end" : "residual_J_start";
  std::mt19937_64 rng(o.seed + (end_block ? 9 : 8));
  const ResidualFixture fx(o.seed);
  const ReblurModel<12> model(fx.kf, fx.current, fx.cfg, fx.cfg.n_virtual);
  CheckResult r{name, 0.0, 1e-3, 0};
  const double h = 1e-6;
  const double min_frac = 1e-3;
  for (int attempt = 0; attempt < 20 * cases && r.cases < cases; ++attempt) {
    const Pose a = se3_exp(detail::random_twist(rng, 0.01, 0.02));
    const Pose b = se3_exp(detail::random_twist(rng, 0.01, 0.02)) * a;
    const LocalTrajectory traj(a, b, 0.02);
    const auto& kp = fx.kf.keypoints[static_cast<size_t>(unit_uniform(rng) * fx.kf.keypoints.size())];
    const Eigen::Vector2i px(static_cast<int>(kp.pixel.x()) + static_cast<int>(detail::uniform(rng, -4, 5)),
                             static_cast<int>(kp.pixel.y()) + static_cast<int>(detail::uniform(rng, -4, 5)));
    if (!fx.current[0].contains(px.x(), px.y())) continue;
    const VirtualPoses vp(traj, model.virtual_count(), true);
    // The bilinear interpolant is not differentiable across cell borders.
    bool near_border = false;
    for (const Pose& T : vp.poses) {
      const auto tr = try_transfer_via_plane(fx.cam, Vec2(px.x(), px.y()), kp.depth, T);
      if (!tr.value) {
        near_border = true;
        break;
      }
      for (const double c : {tr.value->pixel.x(), tr.value->pixel.y()}) {
        const double f = c - std::floor(c);
        near_border |= std::min(f, 1.0 - f) < min_frac;
      }
    }
    if (near_border) continue;
    const auto res = model.residual(vp, px, kp.depth, 0, true);
    if (!res) continue;
    Eigen::Matrix<double, 1, 6> num;
    bool ok = true;
    for (int j = 0; j < 6; ++j) {
      Vec6 d = Vec6::Zero();
      d[j] = h;
      auto eval = [&](double sign) -> std::optional<double> {
        const Pose pert = se3_exp(Twist(Vec6(sign * d)));
        const LocalTrajectory tp = end_block ? LocalTrajectory(a, pert * b, 0.02) : LocalTrajectory(pert * a, b, 0.02);
        const auto rr = model.residual(VirtualPoses(tp, model.virtual_count(), false), px, kp.depth, 0, false);
        if (!rr) return std::nullopt;
        return rr->first;
      };
      const auto p = eval(1.0), m = eval(-1.0);
      if (!p || !m) {
        ok = false;
        break;
      }
      num[j] = (*p - *m) / (2.0 * h);
    }
    if (!ok) continue;
    const Eigen::Matrix<double, 1, 6> ana =
        detail::sign_for(o, name) * (end_block ? res->second.tail<6>() : res->second.head<6>());
    r.max_error = std::max(r.max_error, (ana - num).norm() / std::max(num.norm(), 1e-2));
    ++r.cases;
  }
  return r;
}

inline std::vector<CheckResult> run_selfcheck(const SelfcheckOptions& o) {
  return {check_exp_log(o),
          check_interp_endpoints(o),
          check_interp_jacobian(o, false),
          check_interp_jacobian(o, true),
          check_transfer_oracle(o),
          check_transfer_jacobian(o, false),
          check_transfer_jacobian(o, true),
          check_bilinear_gradient(o),
          check_residual_jacobian(o, false),
          check_residual_jacobian(o, true)};
}

inline std::string format_check(const CheckResult& c) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s %-26s max_err=%.3e tol=%.1e cases=%d", c.passed() ? "PASS" : "FAIL",
                c.name.c_str(), c.max_error, c.tolerance, c.cases);
  return buf;
}

}  // namespace blurvo
