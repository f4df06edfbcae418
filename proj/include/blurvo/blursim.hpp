#pragma once

// Synthetic blurred sequences: a textured plane z = d (world frame) viewed by
// a pinhole camera moving along a known trajectory. Blurred frames are the
// mean of n sharp renders along the constant-twist path of each exposure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "blurvo/camera.hpp"
#include "blurvo/error.hpp"
#include "blurvo/image.hpp"
#include "blurvo/lie.hpp"

namespace blurvo {

struct PlanarScene {
  GrayImage texture;
  double plane_depth = 1.0;    // world plane z = plane_depth
  double texel_size = 0.002;   // meters per texel
  Vec2 origin = Vec2::Zero();  // world (X, Y) of texel (0, 0)

  /// Texel coordinates of a world point on the plane.
  Vec2 texel_of(double X, double Y) const {
    return {(X - origin.x()) / texel_size, (Y - origin.y()) / texel_size};
  }
};

struct FrameSpec {
  double timestamp = 0.0;  // start of exposure
  LocalTrajectory gt;      // world-from-camera at exposure start and end

  double exposure() const { return gt.exposure(); }
};

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& x : k) x /= sum;
  return k;
}

inline std::vector<double> blur_separable(const std::vector<double>& src, int w, int h, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(src.size()), out(src.size());
  auto clampi = [](int x, int hi) { return std::clamp(x, 0, hi - 1); };
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * src[static_cast<size_t>(v) * w + clampi(u + i, w)];
      tmp[static_cast<size_t>(v) * w + u] = s;
    }
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp[static_cast<size_t>(clampi(v + i, h)) * w + u];
      out[static_cast<size_t>(v) * w + u] = s;
    }
  return out;
}

}  // namespace detail

/// Band-limited random texture: white noise smoothed by a Gaussian of
/// `sigma` texels, then affinely stretched to [lo, hi].
inline GrayImage make_noise_texture(int width, int height, uint64_t seed, double sigma = 1.5,
                                    double lo = 0.1, double hi = 0.9) {
  if (width < 2 || height < 2 || !(sigma > 0.0) || !(hi > lo)) {
    throw Error(ErrorCode::BadParams, "noise texture parameters");
  }
  std::mt19937_64 rng(seed);
  std::vector<double> noise(static_cast<size_t>(width) * height);
  for (double& x : noise) x = unit_uniform(rng);
  const auto smooth = detail::blur_separable(noise, width, height, sigma);
  const auto [mn, mx] = std::minmax_element(smooth.begin(), smooth.end());
  const double a = *mn, span = std::max(*mx - *mn, 1e-12);
  GrayImage tex(width, height);
  for (size_t i = 0; i < smooth.size(); ++i) {
    tex.data()[i] = static_cast<float>(lo + (hi - lo) * (smooth[i] - a) / span);
  }
  return tex;
}

/// Mean gradient magnitude of an image (interior pixels).
inline double mean_gradient(const GrayImage& img) {
  const GrayImage g = gradient_magnitude(img);
  double s = 0.0;
  size_t n = 0;
  for (int v = 1; v + 1 < img.height(); ++v)
    for (int u = 1; u + 1 < img.width(); ++u) {
      s += g.at(u, v);
      ++n;
    }
  return n ? s / n : 0.0;
}

inline void validate_scene(const PlanarScene& scene) {
  if (!(scene.plane_depth > 0.0) || !(scene.texel_size > 0.0) || scene.texture.width() < 2) {
    throw Error(ErrorCode::BadParams, "scene parameters");
  }
  if (mean_gradient(scene.texture) <= 0.01) {
    throw Error(ErrorCode::BadParams, "scene texture has too little gradient energy");
  }
}

struct SharpRender {
  GrayImage image;
  std::vector<uint8_t> valid;  // 1 where the ray hit the textured extent
  GrayImage depth;             // camera-frame z of the plane, 0 where invalid
};

namespace detail {

inline void check_in_front(const PlanarScene& scene, const PinholeCamera& cam, const Pose& pose) {
  // w_z is affine in the pixel coordinates, so the corners bound its sign.
  const Mat3& R = pose.rotation();
  const double tz = pose.translation().z();
  for (const double u : {0.0, cam.width - 1.0}) {
    for (const double v : {0.0, cam.height - 1.0}) {
      const Vec3 dir((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      const double wz = R.row(2).dot(dir);
      const double s = (scene.plane_depth - tz) / wz;
      if (!(wz > 0.0) || !(s > 0.0)) {
        throw Error(ErrorCode::CameraBehindPlane, "a pixel ray does not reach the plane");
      }
    }
  }
}

}  // namespace detail

/// Ray-casts every pixel onto the plane and bilinearly samples the texture.
inline SharpRender render_sharp_full(const PlanarScene& scene, const PinholeCamera& cam, const Pose& pose) {
  detail::check_in_front(scene, cam, pose);
  SharpRender out{GrayImage(cam.width, cam.height, 0.0f),
                  std::vector<uint8_t>(static_cast<size_t>(cam.width) * cam.height, 0),
                  GrayImage(cam.width, cam.height, 0.0f)};
  const Mat3& R = pose.rotation();
  const Vec3& t = pose.translation();
  const double inv_ts = 1.0 / scene.texel_size;
  for (int v = 0; v < cam.height; ++v) {
    const double dy = (v - cam.cy) / cam.fy;
    for (int u = 0; u < cam.width; ++u) {
      const Vec3 w = R * Vec3((u - cam.cx) / cam.fx, dy, 1.0);
      const double s = (scene.plane_depth - t.z()) / w.z();
      const double tu = (t.x() + s * w.x() - scene.origin.x()) * inv_ts;
      const double tv = (t.y() + s * w.y() - scene.origin.y()) * inv_ts;
      const auto val = try_sample(scene.texture, tu, tv);
      if (!val) continue;
      const size_t i = static_cast<size_t>(v) * cam.width + u;
      out.image.data()[i] = static_cast<float>(*val);
      out.valid[i] = 1;
      out.depth.data()[i] = static_cast<float>(s);
    }
  }
  return out;
}

inline GrayImage render_sharp(const PlanarScene& scene, const PinholeCamera& cam, const Pose& pose) {
  return render_sharp_full(scene, cam, pose).image;
}

/// Sample fractions along the exposure: i / (n - 1), or {0} when n == 1.
inline double sample_fraction(int i, int n) {
  return n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
}

struct BlurRender {
  GrayImage image;
  std::vector<uint8_t> valid;  // 1 where every sample was valid
};

inline BlurRender render_blurred_full(const PlanarScene& scene, const PinholeCamera& cam,
                                      const LocalTrajectory& traj, int n) {
  if (n < 1) throw Error(ErrorCode::BadParams, "sample count must be >= 1");
  const size_t npx = static_cast<size_t>(cam.width) * cam.height;
  std::vector<double> acc(npx, 0.0);
  BlurRender out{GrayImage(cam.width, cam.height), std::vector<uint8_t>(npx, 1)};
  for (int i = 0; i < n; ++i) {
    const SharpRender r = render_sharp_full(scene, cam, traj.at_fraction(sample_fraction(i, n)));
    for (size_t p = 0; p < npx; ++p) {
      acc[p] += r.image.data()[p];
      out.valid[p] &= r.valid[p];
    }
  }
  for (size_t p = 0; p < npx; ++p) out.image.data()[p] = static_cast<float>(acc[p] / n);
  return out;
}

inline GrayImage render_blurred(const PlanarScene& scene, const PinholeCamera& cam, const FrameSpec& frame,
                                int n) {
  return render_blurred_full(scene, cam, frame.gt, n).image;
}

// ---------------------------------------------------------------------------
// Trajectory synthesis

enum class MotionKind { ConstantVelocity, SinusoidalShake };

/// A smooth world-from-camera trajectory. Position:
///   base + velocity * t + amplitude (.) sin(2 pi f t + phase)
/// Rotation: exp(angular_velocity * t + rot_amplitude (.) sin(2 pi f t + rot_phase)) * base.
/// ConstantVelocity ignores the sinusoidal terms.
struct MotionParams {
  MotionKind kind = MotionKind::ConstantVelocity;
  double frame_rate = 30.0;   // Hz
  double exposure = 0.02;     // s
  int frame_count = 10;
  Pose base;
  Vec3 velocity = Vec3::Zero();          // m/s
  Vec3 angular_velocity = Vec3::Zero();  // rad/s
  Vec3 amplitude = Vec3::Zero();         // m
  Vec3 rot_amplitude = Vec3::Zero();     // rad
  double frequency = 1.0;                // Hz
  Vec3 phase = Vec3::Zero();             // rad
  Vec3 rot_phase = Vec3::Zero();         // rad
};

inline Pose motion_pose(const MotionParams& p, double t) {
  Vec3 pos = p.base.translation() + p.velocity * t;
  Vec3 rot = p.angular_velocity * t;
  if (p.kind == MotionKind::SinusoidalShake) {
    const double w = 2.0 * std::numbers::pi * p.frequency;
    for (int k = 0; k < 3; ++k) {
      pos[k] += p.amplitude[k] * std::sin(w * t + p.phase[k]);
      rot[k] += p.rot_amplitude[k] * std::sin(w * t + p.rot_phase[k]);
    }
  }
  return Pose(so3_exp(rot) * p.base.quat(), pos);
}

inline void validate_motion(const MotionParams& p) {
  if (!(p.frame_rate > 0.0) || !(p.exposure >= 0.0) || p.frame_count < 1) {
    throw Error(ErrorCode::BadParams, "frame rate, exposure and frame count must be positive");
  }
  if (!(p.exposure < 1.0 / p.frame_rate)) {
    throw Error(ErrorCode::BadParams, "exposure must be shorter than the frame period");
  }
  if (p.kind == MotionKind::SinusoidalShake && !(p.frequency >= 0.0)) {
    throw Error(ErrorCode::BadParams, "shake frequency must be non-negative");
  }
  for (const auto& v : {p.velocity, p.angular_velocity, p.amplitude, p.rot_amplitude, p.phase, p.rot_phase}) {
    if (!v.allFinite()) throw Error(ErrorCode::BadParams, "non-finite motion parameter");
  }
}

inline std::vector<FrameSpec> synth_trajectory(const MotionParams& p) {
  validate_motion(p);
  std::vector<FrameSpec> frames;
  frames.reserve(p.frame_count);
  for (int k = 0; k < p.frame_count; ++k) {
    const double ts = k / p.frame_rate;
    frames.push_back({ts, LocalTrajectory(motion_pose(p, ts), motion_pose(p, ts + p.exposure), p.exposure)});
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Geometry helpers

/// World point on the plane seen by pixel x from `pose`.
inline Vec3 plane_point(const PlanarScene& scene, const PinholeCamera& cam, const Pose& pose, const Vec2& x) {
  const Vec3 w = pose.rotation() * Vec3((x.x() - cam.cx) / cam.fx, (x.y() - cam.cy) / cam.fy, 1.0);
  const double s = (scene.plane_depth - pose.translation().z()) / w.z();
  return pose.translation() + s * w;
}

/// Mean image-space path length (pixels) of plane points during the
/// exposure, over a grid of pixels of the start view.
inline double blur_streak_length(const PlanarScene& scene, const PinholeCamera& cam, const LocalTrajectory& traj,
                                 int grid = 8, int segments = 16) {
  double total = 0.0;
  int count = 0;
  std::vector<Pose> inv;
  for (int j = 0; j <= segments; ++j) inv.push_back(traj.at_fraction(sample_fraction(j, segments + 1)).inverse());
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      const Vec2 x((gx + 0.5) * cam.width / grid, (gy + 0.5) * cam.height / grid);
      const Vec3 P = plane_point(scene, cam, traj.start(), x);
      double len = 0.0;
      Vec2 prev = x;
      for (int j = 1; j <= segments; ++j) {
        const auto px = try_project(cam, inv[j] * P);
        if (!px) break;
        len += (*px - prev).norm();
        prev = *px;
      }
      total += len;
      ++count;
    }
  }
  return total / count;
}

/// Builds a noise-textured scene that covers every view of `frames`, with a
/// margin in texels around the union of the visible footprints.
inline PlanarScene covering_scene(const PinholeCamera& cam, const std::vector<FrameSpec>& frames,
                                  double plane_depth, double texel_size, uint64_t seed,
                                  double texture_sigma = 1.5, int margin = 16) {
  PlanarScene scene;
  scene.plane_depth = plane_depth;
  scene.texel_size = texel_size;
  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (const auto& f : frames) {
    for (const Pose& p : {f.gt.start(), f.gt.end(), f.gt.mid()}) {
      detail::check_in_front(scene, cam, p);
      for (const double u : {0.0, cam.width - 1.0})
        for (const double v : {0.0, cam.height - 1.0}) {
          const Vec3 P = plane_point(scene, cam, p, Vec2(u, v));
          xmin = std::min(xmin, P.x());
          xmax = std::max(xmax, P.x());
          ymin = std::min(ymin, P.y());
          ymax = std::max(ymax, P.y());
        }
    }
  }
  const int w = static_cast<int>(std::ceil((xmax - xmin) / texel_size)) + 2 * margin;
  const int h = static_cast<int>(std::ceil((ymax - ymin) / texel_size)) + 2 * margin;
  scene.origin = Vec2(xmin - margin * texel_size, ymin - margin * texel_size);
  scene.texture = make_noise_texture(w, h, seed, texture_sigma);
  return scene;
}

}  // namespace blurvo
