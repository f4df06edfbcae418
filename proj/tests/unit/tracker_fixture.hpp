#pragma once

// Small synthetic blurred scenes shared by the tracker tests.

#include "blurvo/blursim.hpp"
#include "blurvo/tracker.hpp"

namespace blurvo::testing {

inline const PinholeCamera kSmallCam{250.0, 250.0, 159.5, 119.5, 320, 240};

inline TrackerConfig small_config() {
  TrackerConfig cfg;
  cfg.pyramid_levels = 3;
  cfg.keypoint_count = 150;
  return cfg;
}

/// Frame 0's sharp mid-exposure view is the keyframe; frame 1 (blurred,
/// 64 samples, 8-bit) is tracked against it.
struct BlurScene {
  TrackerConfig cfg;
  std::vector<FrameSpec> frames;
  PlanarScene scene;
  GrayImage kf_image, kf_depth;
  Keyframe kf;
  GrayImage blurred;
  ImagePyramid current;
  LocalTrajectory gt_rel;  // keyframe-from-current, start and end
  double streak_px = 0.0;
};

inline BlurScene make_blur_scene(const Vec3& velocity, const Vec3& angular_velocity, double exposure,
                                 uint64_t seed = 3, TrackerConfig cfg = small_config()) {
  BlurScene s;
  s.cfg = cfg;
  MotionParams mp;
  mp.kind = MotionKind::ConstantVelocity;
  mp.velocity = velocity;
  mp.angular_velocity = angular_velocity;
  mp.exposure = exposure;
  mp.frame_count = 2;
  mp.base = Pose(Quat::Identity(), Vec3(0.0, 0.0, 0.0));
  s.frames = synth_trajectory(mp);
  s.scene = covering_scene(kSmallCam, s.frames, 1.0, 0.004, seed);
  const Pose kf_pose = s.frames[0].gt.mid();
  const SharpRender sharp = render_sharp_full(s.scene, kSmallCam, kf_pose);
  s.kf_image = quantize8(sharp.image);
  s.kf_depth = sharp.depth;
  s.kf = make_keyframe(s.kf_image, s.kf_depth, kSmallCam, kf_pose, cfg);
  s.blurred = quantize8(render_blurred(s.scene, kSmallCam, s.frames[1], 64));
  s.current = build_pyramid(s.blurred, cfg.pyramid_levels);
  const Pose inv = kf_pose.inverse();
  s.gt_rel = LocalTrajectory(inv * s.frames[1].gt.start(), inv * s.frames[1].gt.end(), exposure);
  s.streak_px = blur_streak_length(s.scene, kSmallCam, s.frames[1].gt);
  return s;
}

/// Largest endpoint error (rotation rad, translation m) of `est` against
/// `gt`, also trying the time-reversed estimate; a blurred image alone does
/// not tell start from end.
struct EndpointError {
  double rotation;
  double translation;
  bool swapped;
};

inline EndpointError endpoint_error(const LocalTrajectory& est, const LocalTrajectory& gt) {
  auto err = [&](const Pose& a, const Pose& b) {
    const auto [r0, t0] = pose_distance(a, gt.start());
    const auto [r1, t1] = pose_distance(b, gt.end());
    return std::pair{std::max(r0, r1), std::max(t0, t1)};
  };
  const auto d = err(est.start(), est.end());
  const auto s = err(est.end(), est.start());
  if (s.second < d.second) return {s.first, s.second, true};
  return {d.first, d.second, false};
}

}  // namespace blurvo::testing
