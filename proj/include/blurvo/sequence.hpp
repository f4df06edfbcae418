#pragma once

// Frame-to-keyframe tracking over a whole dataset.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "blurvo/dataset.hpp"
#include "blurvo/eval.hpp"
#include "blurvo/tracker.hpp"

namespace blurvo {

enum class TrackMode {
  Mba,        // blur-aware, start/end poses
  Sharp,      // sharp aligner on the sharp mid-exposure images
  BlurNaive,  // sharp aligner on the blurred images
};

inline const char* to_string(TrackMode m) {
  switch (m) {
    case TrackMode::Mba: return "mba";
    case TrackMode::Sharp: return "sharp";
    case TrackMode::BlurNaive: return "blur-naive";
  }
  return "unknown";
}

inline TrackMode parse_track_mode(const std::string& s) {
  if (s == "mba") return TrackMode::Mba;
  if (s == "sharp") return TrackMode::Sharp;
  if (s == "blur-naive") return TrackMode::BlurNaive;
  throw Error(ErrorCode::ConfigInvalid, "unknown mode '" + s + "'");
}

struct SequenceOptions {
  TrackerConfig tracker;
  TrackMode mode = TrackMode::Mba;
  bool force_zero_exposure = false;
  double depth_noise_sigma = 0.0;  // relative, multiplicative
  uint64_t seed = 1;
  double keyframe_baseline_ratio = 0.1;
  double keyframe_min_valid = 0.5;
  Pose initial_pose;  // world pose of the first keyframe
  bool resolve_time_direction = true;
  /// Directory with depth maps replacing the dataset's (same file names).
  std::filesystem::path depth_dir;
};

struct FrameReport {
  double timestamp = 0.0;  // middle of the exposure
  double exposure = 0.0;
  TrackResult result;
  Pose world_start, world_mid, world_end;
  bool new_keyframe = false;
};

struct SequenceResult {
  std::vector<FrameReport> frames;
  Trajectory estimate;  // mid-exposure poses of tracked frames

  size_t dropped() const {
    return static_cast<size_t>(std::count_if(frames.begin(), frames.end(), [](const FrameReport& f) {
      return f.result.status == TrackStatus::Dropped;
    }));
  }
};

inline double frame_drop_rate(const std::vector<TrackResult>& reports, size_t total_frames) {
  return frame_drop_rate(reports, total_frames,
                         [](const TrackResult& r) { return r.status == TrackStatus::Dropped; });
}

inline std::vector<Keypoint> perturb_depths(std::vector<Keypoint> kps, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return kps;
  for (auto& kp : kps) {
    // Box-Muller on the portable uniform keeps runs identical across platforms.
    const double u1 = 1.0 - unit_uniform(rng), u2 = unit_uniform(rng);
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    kp.depth *= std::max(1e-3, 1.0 + sigma * z);
  }
  return kps;
}

inline std::string format_report_line(const FrameReport& f) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s %s %.9g %.6f %d", format_timestamp(f.timestamp).c_str(),
                to_string(f.result.status), f.result.cost, f.result.valid_fraction, f.result.total_iterations());
  return buf;
}

inline void save_report(const std::filesystem::path& path, const SequenceResult& r) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "# timestamp status cost valid_fraction iterations\n";
  for (const auto& f : r.frames) out << format_report_line(f) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed " + path.string());
}

/// A blurred image is symmetric under time reversal, so start and end are
/// only determined up to a swap. Orients each tracked frame so its
/// intra-exposure motion agrees with the velocity of the neighbouring
/// mid-exposure estimates. `scale` (scene depth, meters) weights translation against
/// rotation.
inline void resolve_time_direction(SequenceResult& r, double scale) {
  std::vector<size_t> idx;
  for (size_t i = 0; i < r.frames.size(); ++i) {
    if (r.frames[i].result.status != TrackStatus::Dropped && r.frames[i].exposure > 0.0) idx.push_back(i);
  }
  if (idx.size() < 2) return;
  for (size_t k = 0; k < idx.size(); ++k) {
    FrameReport& f = r.frames[idx[k]];
    const FrameReport& a = r.frames[idx[k == 0 ? 0 : k - 1]];
    const FrameReport& b = r.frames[idx[k + 1 == idx.size() ? k : k + 1]];
    // World-frame displacement between neighbours vs. within the exposure.
    const Vec3 dp = b.world_mid.translation() - a.world_mid.translation();
    const Vec3 dr = so3_log((b.world_mid.quat() * a.world_mid.quat().conjugate()).normalized());
    const Vec3 op = f.world_end.translation() - f.world_start.translation();
    const Vec3 orot = so3_log((f.world_end.quat() * f.world_start.quat().conjugate()).normalized());
    const double dot = dr.dot(orot) + dp.dot(op) / (scale * scale);
    if (dot < 0.0) {
      std::swap(f.world_start, f.world_end);
      const LocalTrajectory& t = f.result.trajectory;
      f.result.trajectory = LocalTrajectory(t.end(), t.start(), t.exposure());
    }
  }
}

/// Tracks every frame of `ds` against the current keyframe. The first
/// keyframe is frame 0's sharp image and depth at `initial_pose`; a new one
/// is taken from the last tracked frame when the baseline exceeds a fraction
/// of the median depth or too few residuals remain valid.
inline SequenceResult track_sequence(const Dataset& ds, const SequenceOptions& opt) {
  opt.tracker.validate();
  if (ds.frames.empty()) throw Error(ErrorCode::BadParams, "empty dataset");
  if (!(opt.depth_noise_sigma >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "depth noise must be >= 0");
  std::mt19937_64 rng(opt.seed);
  const TrackerConfig& cfg = opt.tracker;

  auto build_keyframe = [&](size_t i, const Pose& pose) {
    const GrayImage img = ds.sharp(i);
    const GrayImage depth =
        opt.depth_dir.empty() ? ds.depth(i) : load_pfm(opt.depth_dir / ds.frames.at(i).depth);
    auto kps = sample_keypoints(img, depth, cfg.keypoint_count, cfg.patch_radius() + 2 + cfg.keypoint_margin);
    return make_keyframe(img, perturb_depths(std::move(kps), opt.depth_noise_sigma, rng), ds.camera, pose, cfg);
  };

  Keyframe kf = build_keyframe(0, opt.initial_pose);
  const double scene_depth = kf.median_depth;
  SequenceResult out;
  struct Tracked {
    double t;
    Pose mid;
  };
  std::vector<Tracked> history;

  for (size_t i = 0; i < ds.frames.size(); ++i) {
    const DatasetFrame& f = ds.frames[i];
    // Only the blur-aware tracker models a non-zero exposure.
    const double tau = opt.force_zero_exposure || opt.mode != TrackMode::Mba ? 0.0 : f.exposure;
    const double t_mid = f.timestamp + 0.5 * f.exposure;

    // Constant-velocity prediction in the world frame.
    Pose pred_start = kf.pose, pred_end = kf.pose;
    if (history.size() >= 2) {
      const Tracked& a = history[history.size() - 2];
      const Tracked& b = history.back();
      const Twist vel = se3_log(a.mid.inverse() * b.mid) * (1.0 / (b.t - a.t));
      const Pose mid = b.mid * se3_exp(vel * (t_mid - b.t));
      pred_start = mid * se3_exp(vel * (-0.5 * tau));
      pred_end = mid * se3_exp(vel * (0.5 * tau));
      if (tau == 0.0) pred_start = pred_end = mid;
    }
    const Pose kf_inv = kf.pose.inverse();
    const LocalTrajectory init(kf_inv * pred_start, kf_inv * pred_end, tau);

    FrameReport rep;
    rep.timestamp = t_mid;
    rep.exposure = tau;
    if (opt.mode == TrackMode::Mba) {
      const ImagePyramid cur = build_pyramid(ds.blurred(i), cfg.pyramid_levels);
      rep.result = track(kf, cur, tau, init, cfg);
    } else {
      const GrayImage img = opt.mode == TrackMode::Sharp ? ds.sharp(i) : ds.blurred(i);
      const ImagePyramid cur = build_pyramid(img, cfg.pyramid_levels);
      rep.result = track_sharp(kf, cur, init.mid(), cfg);
    }
    const LocalTrajectory& rel = rep.result.trajectory;
    rep.world_start = kf.pose * rel.start();
    rep.world_end = kf.pose * rel.end();
    rep.world_mid = kf.pose * rel.mid();

    if (rep.result.status != TrackStatus::Dropped) {
      history.push_back({t_mid, rep.world_mid});
      out.estimate.push_back({t_mid, rep.world_mid});
      const double baseline = rel.mid().translation().norm();
      if (i + 1 < ds.frames.size() && (baseline > opt.keyframe_baseline_ratio * kf.median_depth ||
                                       rep.result.valid_fraction < opt.keyframe_min_valid)) {
        kf = build_keyframe(i, rep.world_mid);
        rep.new_keyframe = true;
      }
    }
    out.frames.push_back(rep);
  }
  if (opt.mode == TrackMode::Mba && opt.resolve_time_direction) resolve_time_direction(out, scene_depth);
  return out;
}

}  // namespace blurvo
