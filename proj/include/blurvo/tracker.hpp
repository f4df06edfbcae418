#pragma once

// Blur-aware direct alignment of a blurry frame against a sharp keyframe.
//
// The unknowns are the poses at exposure start and end, both expressed as
// transforms from the current camera into the keyframe camera. Each residual
// compares a pixel of the current (blurry) image with the average of n
// keyframe intensities obtained by transferring that pixel through the
// keypoint's fronto-parallel plane at n poses along the constant-twist path.
// With zero exposure the model collapses to a single pose (classical sharp
// alignment).

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "blurvo/camera.hpp"
#include "blurvo/error.hpp"
#include "blurvo/image.hpp"
#include "blurvo/lie.hpp"

namespace blurvo {

struct TrackerConfig {
  int patch_size = 9;
  int n_virtual = 8;
  int pyramid_levels = 4;
  double huber_delta = 0.03;
  int max_iterations = 50;
  double lm_lambda_init = 1e-4;
  double lm_lambda_factor = 10.0;
  double convergence_eps = 1e-7;
  double min_valid_residual_fraction = 0.3;
  /// Residuals with |r| above this count as invalid for the valid fraction.
  double outlier_threshold = 0.25;
  int keypoint_count = 300;
  /// Extra pixels kept clear of the image border beyond patch radius + 2.
  int keypoint_margin = 8;
  /// Probe a few blur directions when starting from a zero-motion exposure.
  bool seed_spread = true;

  int patch_radius() const { return patch_size / 2; }

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigInvalid, m); };
    if (patch_size < 1 || patch_size % 2 == 0) fail("patch_size must be odd and >= 1");
    if (n_virtual < 2) fail("n_virtual must be >= 2");
    if (pyramid_levels < 1) fail("pyramid_levels must be >= 1");
    if (!(huber_delta > 0.0)) fail("huber_delta must be positive");
    if (max_iterations < 1) fail("max_iterations must be >= 1");
    if (!(lm_lambda_init > 0.0)) fail("lm_lambda_init must be positive");
    if (!(lm_lambda_factor > 1.0)) fail("lm_lambda_factor must exceed 1");
    if (!(convergence_eps > 0.0)) fail("convergence_eps must be positive");
    if (!(min_valid_residual_fraction >= 0.0 && min_valid_residual_fraction <= 1.0)) {
      fail("min_valid_residual_fraction must be in [0, 1]");
    }
    if (!(outlier_threshold > 0.0)) fail("outlier_threshold must be positive");
    if (keypoint_count < 1) fail("keypoint_count must be >= 1");
    if (keypoint_margin < 0) fail("keypoint_margin must be >= 0");
  }
};

struct Keypoint {
  Vec2 pixel;    // level-0 reference pixel
  double depth;  // plane depth in the reference frame
};

inline constexpr size_t kMinKeypoints = 8;

/// Grid-uniform selection of high-gradient pixels with valid depth: one
/// candidate per cell, the strongest pixel above (cell median + 0.01).
inline std::vector<Keypoint> sample_keypoints(const GrayImage& img, const GrayImage& depth, int target_count,
                                              int border) {
  if (depth.width() != img.width() || depth.height() != img.height()) {
    throw Error(ErrorCode::DimensionMismatch, "depth map size differs from image size");
  }
  if (target_count < 1) throw Error(ErrorCode::BadParams, "target_count must be >= 1");
  border = std::max(border, 1);
  const int x0 = border, y0 = border;
  const int x1 = img.width() - border, y1 = img.height() - border;  // exclusive
  std::vector<Keypoint> out;
  if (x1 <= x0 || y1 <= y0) throw Error(ErrorCode::TooFewKeypoints, "image smaller than border");
  const GrayImage grad = gradient_magnitude(img);
  const int cells = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(target_count))));
  std::vector<float> mags;
  for (int cy = 0; cy < cells; ++cy) {
    const int v0 = y0 + (y1 - y0) * cy / cells, v1 = y0 + (y1 - y0) * (cy + 1) / cells;
    for (int cx = 0; cx < cells; ++cx) {
      const int u0 = x0 + (x1 - x0) * cx / cells, u1 = x0 + (x1 - x0) * (cx + 1) / cells;
      if (u1 <= u0 || v1 <= v0) continue;
      mags.clear();
      for (int v = v0; v < v1; ++v)
        for (int u = u0; u < u1; ++u) mags.push_back(grad.at(u, v));
      auto mid = mags.begin() + mags.size() / 2;
      std::nth_element(mags.begin(), mid, mags.end());
      const double threshold = *mid + 0.01;
      int best_u = -1, best_v = -1;
      double best = threshold;
      for (int v = v0; v < v1; ++v)
        for (int u = u0; u < u1; ++u) {
          const double g = grad.at(u, v);
          const double d = depth.at(u, v);
          if (g > best && std::isfinite(d) && d > 0.0) {
            best = g;
            best_u = u;
            best_v = v;
          }
        }
      if (best_u >= 0) out.push_back({Vec2(best_u, best_v), depth.at(best_u, best_v)});
    }
  }
  if (out.size() < kMinKeypoints) {
    throw Error(ErrorCode::TooFewKeypoints, "found " + std::to_string(out.size()) + " keypoints");
  }
  return out;
}

/// Pixel coordinates of a level-0 pixel at pyramid level `level`.
inline Vec2 to_level(const Vec2& x, int level) {
  const double s = 1.0 / static_cast<double>(1 << level);
  return {(x.x() + 0.5) * s - 0.5, (x.y() + 0.5) * s - 0.5};
}

struct Keyframe {
  ImagePyramid pyramid;
  std::vector<PinholeCamera> cameras;  // per level
  std::vector<Keypoint> keypoints;     // level-0 coordinates
  /// Keypoints used at each level; coarse levels drop keypoints that land
  /// on an already used pixel.
  std::vector<std::vector<int>> level_keypoints;
  Pose pose;  // world-from-camera
  double median_depth = 0.0;

  int levels() const { return static_cast<int>(pyramid.size()); }
};

inline Keyframe make_keyframe(const GrayImage& image, std::vector<Keypoint> keypoints, const PinholeCamera& cam,
                              const Pose& pose, const TrackerConfig& cfg) {
  cfg.validate();
  if (cam.width != image.width() || cam.height != image.height()) {
    throw Error(ErrorCode::DimensionMismatch, "camera and image sizes differ");
  }
  const int border = cfg.patch_radius() + 2;
  for (const auto& kp : keypoints) {
    if (!(kp.depth > 0.0) || kp.pixel.x() < border || kp.pixel.y() < border ||
        kp.pixel.x() > image.width() - 1 - border || kp.pixel.y() > image.height() - 1 - border) {
      throw Error(ErrorCode::BadParams, "keypoint too close to the border or with non-positive depth");
    }
  }
  Keyframe kf;
  kf.pyramid = build_pyramid(image, cfg.pyramid_levels);
  for (int l = 0; l < cfg.pyramid_levels; ++l) kf.cameras.push_back(cam.at_level(l));
  kf.keypoints = std::move(keypoints);
  kf.pose = pose;
  for (int l = 0; l < cfg.pyramid_levels; ++l) {
    std::set<std::pair<long, long>> used;
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(kf.keypoints.size()); ++i) {
      const Vec2 p = to_level(kf.keypoints[i].pixel, l);
      if (used.insert({std::lround(p.x()), std::lround(p.y())}).second) idx.push_back(i);
    }
    kf.level_keypoints.push_back(std::move(idx));
  }
  std::vector<double> depths;
  for (const auto& kp : kf.keypoints) depths.push_back(kp.depth);
  if (!depths.empty()) {
    std::nth_element(depths.begin(), depths.begin() + depths.size() / 2, depths.end());
    kf.median_depth = depths[depths.size() / 2];
  }
  return kf;
}

inline Keyframe make_keyframe(const GrayImage& image, const GrayImage& depth, const PinholeCamera& cam,
                              const Pose& pose, const TrackerConfig& cfg) {
  cfg.validate();
  auto kps = sample_keypoints(image, depth, cfg.keypoint_count, cfg.patch_radius() + 2 + cfg.keypoint_margin);
  return make_keyframe(image, std::move(kps), cam, pose, cfg);
}

// ---------------------------------------------------------------------------
// Robust normal equations

inline double huber_cost(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

inline double huber_weight(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

template <int Dim>
struct NormalEquations {
  using Matrix = Eigen::Matrix<double, Dim, Dim>;
  using Vector = Eigen::Matrix<double, Dim, 1>;
  using Row = Eigen::Matrix<double, 1, Dim>;

  Matrix H = Matrix::Zero();
  Vector g = Vector::Zero();

  void add(const Row& J, double r, double weight) {
    H.template selfadjointView<Eigen::Upper>().rankUpdate(J.transpose(), weight);
    g.noalias() += (weight * r) * J.transpose();
  }

  Matrix full() const { return H.template selfadjointView<Eigen::Upper>(); }
};

template <int Dim>
struct Evaluation {
  double cost = 0.0;
  NormalEquations<Dim> normal;
  int valid = 0;    // residuals that could be computed
  int inliers = 0;  // valid residuals with |r| <= outlier threshold
  int total = 0;

  double valid_fraction() const { return total > 0 ? static_cast<double>(inliers) / total : 0.0; }
};

using Anchor = std::optional<Eigen::Vector2i>;

namespace detail {

inline long round_half_away(double x) { return std::lround(x); }

/// Nearest integer pixel of a keypoint seen from `cur_to_ref`, or nullopt
/// when the patch around it does not fit in the current image.
inline Anchor select_anchor(const PinholeCamera& cam, const Keypoint& kp, int level, const Pose& ref_from_cur,
                            int radius) {
  const Vec3 p_ref = backproject_depth(cam, to_level(kp.pixel, level), kp.depth);
  const auto x = try_project(cam, ref_from_cur.inverse() * p_ref);
  if (!x || !x->allFinite()) return std::nullopt;
  const double u = x->x(), v = x->y();
  if (std::abs(u) > 1e9 || std::abs(v) > 1e9) return std::nullopt;
  const long au = round_half_away(u), av = round_half_away(v);
  if (au < radius || av < radius || au > cam.width - 1 - radius || av > cam.height - 1 - radius) {
    return std::nullopt;
  }
  return Eigen::Vector2i(static_cast<int>(au), static_cast<int>(av));
}

}  // namespace detail

/// Virtual poses and their endpoint Jacobians for one trajectory estimate.
struct VirtualPoses {
  std::vector<Pose> poses;
  std::vector<Mat6> J_start;
  std::vector<Mat6> J_end;

  VirtualPoses(const LocalTrajectory& traj, int n, bool with_jacobians) {
    for (int i = 0; i < n; ++i) {
      const double s = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      poses.push_back(traj.at_fraction(s));
      if (with_jacobians) {
        auto [js, je] = traj.jacobians(s);
        J_start.push_back(js);
        J_end.push_back(je);
      }
    }
  }
};

/// Re-blur residual model. Dim == 12 estimates start and end independently;
/// Dim == 6 ties them (zero exposure) and uses a single virtual pose.
template <int Dim>
class ReblurModel {
  static_assert(Dim == 6 || Dim == 12);

 public:
  static constexpr int kDim = Dim;
  using Row = Eigen::Matrix<double, 1, Dim>;
  using Vector = Eigen::Matrix<double, Dim, 1>;

  ReblurModel(const Keyframe& kf, const ImagePyramid& cur, const TrackerConfig& cfg, int n_virtual)
      : kf_(kf), cur_(cur), cfg_(cfg), n_(Dim == 6 ? 1 : n_virtual) {}

  int virtual_count() const { return n_; }

  LocalTrajectory apply(const LocalTrajectory& t, const Vector& delta) const {
    if constexpr (Dim == 6) {
      const Pose p = se3_exp(Twist(Vec6(delta))) * t.start();
      return LocalTrajectory(p, p, t.exposure());
    } else {
      return LocalTrajectory(se3_exp(Twist(Vec6(delta.template head<6>()))) * t.start(),
                             se3_exp(Twist(Vec6(delta.template tail<6>()))) * t.end(), t.exposure());
    }
  }

  /// Anchor pose: middle of the exposure.
  static Pose anchor_pose(const LocalTrajectory& t) {
    if constexpr (Dim == 6) {
      return t.start();
    } else {
      return t.mid();
    }
  }

  std::vector<Anchor> select_anchors(const LocalTrajectory& t, int level) const {
    const Pose ref_from_cur = anchor_pose(t);
    std::vector<Anchor> anchors(kf_.keypoints.size());
    for (int k : kf_.level_keypoints[level]) {
      anchors[k] = detail::select_anchor(kf_.cameras[level], kf_.keypoints[k], level, ref_from_cur,
                                         cfg_.patch_radius());
    }
    return anchors;
  }

  /// Re-blurred intensity at current-image pixel `x` (and its Jacobian).
  std::optional<std::pair<double, Row>> synthesize(const VirtualPoses& vp, const Vec2& x, double depth, int level,
                                                   bool with_jacobian) const {
    const PinholeCamera& cam = kf_.cameras[level];
    const GrayImage& ref = kf_.pyramid[level];
    const Vec3 ray = backproject_unit(cam, x);
    double sum = 0.0;
    Row row = Row::Zero();
    for (int i = 0; i < n_; ++i) {
      const auto tr = try_transfer_ray(cam, ray, depth, vp.poses[i]);
      if (!tr.value) return std::nullopt;
      const Vec2& px = tr.value->pixel;
      const auto s = try_sample_with_gradient(ref, px.x(), px.y());
      if (!s) return std::nullopt;
      sum += s->value;
      if (with_jacobian) {
        const Eigen::Matrix<double, 1, 6> w = s->gradient.transpose() * transfer_jacobian(cam, *tr.value);
        if constexpr (Dim == 6) {
          row += w * (vp.J_start[i] + vp.J_end[i]);
        } else {
          row.template head<6>() += w * vp.J_start[i];
          row.template tail<6>() += w * vp.J_end[i];
        }
      }
    }
    const double inv_n = 1.0 / n_;
    return std::pair<double, Row>{sum / n_, row * inv_n};
  }

  /// Residual B(x) - Bhat(x) and its Jacobian for one current-image pixel.
  std::optional<std::pair<double, Row>> residual(const VirtualPoses& vp, const Eigen::Vector2i& x, double depth,
                                                 int level, bool with_jacobian) const {
    const auto syn = synthesize(vp, Vec2(x.x(), x.y()), depth, level, with_jacobian);
    if (!syn) return std::nullopt;
    const double b = cur_[level].at(x.x(), x.y());
    return std::pair<double, Row>{b - syn->first, -syn->second};
  }

  Evaluation<Dim> evaluate(const LocalTrajectory& t, const std::vector<Anchor>& anchors, int level,
                           bool with_jacobian) const {
    const VirtualPoses vp(t, n_, with_jacobian);
    Evaluation<Dim> e;
    const int r = cfg_.patch_radius();
    const double penalty = huber_cost(cfg_.outlier_threshold, cfg_.huber_delta);
    for (int k : kf_.level_keypoints[level]) {
      const int patch_area = cfg_.patch_size * cfg_.patch_size;
      e.total += patch_area;
      if (!anchors[k]) {
        e.cost += penalty * patch_area;
        continue;
      }
      const double depth = kf_.keypoints[k].depth;
      for (int dv = -r; dv <= r; ++dv) {
        for (int du = -r; du <= r; ++du) {
          const Eigen::Vector2i x = *anchors[k] + Eigen::Vector2i(du, dv);
          const auto res = residual(vp, x, depth, level, with_jacobian);
          if (!res) {
            e.cost += penalty;
            continue;
          }
          const double rv = res->first;
          ++e.valid;
          if (std::abs(rv) <= cfg_.outlier_threshold) ++e.inliers;
          e.cost += huber_cost(rv, cfg_.huber_delta);
          if (with_jacobian) e.normal.add(res->second, rv, huber_weight(rv, cfg_.huber_delta));
        }
      }
    }
    return e;
  }

 private:
  const Keyframe& kf_;
  const ImagePyramid& cur_;
  const TrackerConfig& cfg_;
  int n_;
};

/// Classical sharp direct alignment over a single pose, written
/// independently of the re-blur model: r = B(x) - I_ref(transfer(x)).
class SharpModel {
 public:
  static constexpr int kDim = 6;
  using Row = Eigen::Matrix<double, 1, 6>;
  using Vector = Vec6;

  SharpModel(const Keyframe& kf, const ImagePyramid& cur, const TrackerConfig& cfg)
      : kf_(kf), cur_(cur), cfg_(cfg) {}

  LocalTrajectory apply(const LocalTrajectory& t, const Vector& delta) const {
    const Pose p = se3_exp(Twist(delta)) * t.start();
    return LocalTrajectory(p, p, t.exposure());
  }

  std::vector<Anchor> select_anchors(const LocalTrajectory& t, int level) const {
    std::vector<Anchor> anchors(kf_.keypoints.size());
    for (int k : kf_.level_keypoints[level]) {
      anchors[k] = detail::select_anchor(kf_.cameras[level], kf_.keypoints[k], level, t.start(),
                                         cfg_.patch_radius());
    }
    return anchors;
  }

  Evaluation<6> evaluate(const LocalTrajectory& t, const std::vector<Anchor>& anchors, int level,
                         bool with_jacobian) const {
    const PinholeCamera& cam = kf_.cameras[level];
    const GrayImage& ref = kf_.pyramid[level];
    const Pose& T = t.start();
    Evaluation<6> e;
    const int r = cfg_.patch_radius();
    const double penalty = huber_cost(cfg_.outlier_threshold, cfg_.huber_delta);
    for (int k : kf_.level_keypoints[level]) {
      const int patch_area = cfg_.patch_size * cfg_.patch_size;
      e.total += patch_area;
      if (!anchors[k]) {
        e.cost += penalty * patch_area;
        continue;
      }
      for (int dv = -r; dv <= r; ++dv) {
        for (int du = -r; du <= r; ++du) {
          const Eigen::Vector2i x = *anchors[k] + Eigen::Vector2i(du, dv);
          const auto tr = try_transfer_via_plane(cam, Vec2(x.x(), x.y()), kf_.keypoints[k].depth, T);
          std::optional<SampleWithGradient> s;
          if (tr.value) s = try_sample_with_gradient(ref, tr.value->pixel.x(), tr.value->pixel.y());
          if (!s) {
            e.cost += penalty;
            continue;
          }
          const double rv = cur_[level].at(x.x(), x.y()) - s->value;
          ++e.valid;
          if (std::abs(rv) <= cfg_.outlier_threshold) ++e.inliers;
          e.cost += huber_cost(rv, cfg_.huber_delta);
          if (with_jacobian) {
            const Row w = s->gradient.transpose() * transfer_jacobian(cam, *tr.value);
            e.normal.add(-w, rv, huber_weight(rv, cfg_.huber_delta));
          }
        }
      }
    }
    return e;
  }

 private:
  const Keyframe& kf_;
  const ImagePyramid& cur_;
  const TrackerConfig& cfg_;
};

// ---------------------------------------------------------------------------
// Levenberg-Marquardt driver

enum class TrackStatus { Converged, MaxIterations, Diverged, Dropped };

inline const char* to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::Converged: return "Converged";
    case TrackStatus::MaxIterations: return "MaxIterations";
    case TrackStatus::Diverged: return "Diverged";
    case TrackStatus::Dropped: return "Dropped";
  }
  return "Unknown";
}

struct AcceptedStep {
  int level;
  double cost_before;
  double cost_after;
};

struct LevelOutcome {
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
};

struct TrackResult {
  LocalTrajectory trajectory;  // keyframe-from-current at exposure start/end
  double cost = 0.0;
  double valid_fraction = 0.0;
  std::vector<int> iterations;  // per level, index = pyramid level
  TrackStatus status = TrackStatus::Converged;
  std::vector<AcceptedStep> accepted;

  int total_iterations() const {
    int s = 0;
    for (int i : iterations) s += i;
    return s;
  }
};

template <class Model>
LevelOutcome optimize_level(const Model& model, LocalTrajectory& state, int level, const TrackerConfig& cfg,
                            std::vector<AcceptedStep>* accepted = nullptr) {
  constexpr int Dim = Model::kDim;
  using Matrix = Eigen::Matrix<double, Dim, Dim>;
  using Vector = Eigen::Matrix<double, Dim, 1>;
  LevelOutcome out;
  auto anchors = model.select_anchors(state, level);
  auto current = model.evaluate(state, anchors, level, true);
  double lambda = cfg.lm_lambda_init;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    ++out.iterations;
    const Matrix H = current.normal.full();
    Matrix A = H;
    const double floor = 1e-12 * std::max(1.0, H.diagonal().maxCoeff());
    for (int i = 0; i < Dim; ++i) A(i, i) += lambda * std::max(H(i, i), floor);
    const Vector delta = A.ldlt().solve(-current.normal.g);
    if (!delta.allFinite()) {
      out.diverged = true;
      break;
    }
    const LocalTrajectory trial = model.apply(state, delta);
    const auto trial_eval = model.evaluate(trial, anchors, level, false);
    if (trial_eval.cost < current.cost) {
      if (accepted) accepted->push_back({level, current.cost, trial_eval.cost});
      state = trial;
      lambda = std::max(lambda / cfg.lm_lambda_factor, 1e-12);
      anchors = model.select_anchors(state, level);
      current = model.evaluate(state, anchors, level, true);
    } else {
      lambda *= cfg.lm_lambda_factor;
    }
    if (delta.norm() < cfg.convergence_eps) {
      out.converged = true;
      break;
    }
    if (lambda > 1e12) {
      // No damped step decreases the cost any more.
      out.converged = true;
      break;
    }
  }
  return out;
}

template <class Model>
double level_cost(const Model& model, const LocalTrajectory& state, int level) {
  return model.evaluate(state, model.select_anchors(state, level), level, false).cost;
}

namespace detail {

inline void check_inputs(const Keyframe& kf, const ImagePyramid& cur, const TrackerConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(cur.size()) != kf.levels() || kf.levels() != cfg.pyramid_levels) {
    throw Error(ErrorCode::DimensionMismatch, "pyramid level counts differ");
  }
  for (int l = 0; l < kf.levels(); ++l) {
    if (cur[l].width() != kf.pyramid[l].width() || cur[l].height() != kf.pyramid[l].height()) {
      throw Error(ErrorCode::DimensionMismatch, "current and keyframe image sizes differ");
    }
  }
}

template <class Model>
TrackResult run_pyramid(const Model& model, LocalTrajectory state, const Keyframe& kf, const TrackerConfig& cfg) {
  TrackResult res;
  res.iterations.assign(kf.levels(), 0);
  LevelOutcome finest;
  for (int level = kf.levels() - 1; level >= 0; --level) {
    const LevelOutcome o = optimize_level(model, state, level, cfg, &res.accepted);
    res.iterations[level] = o.iterations;
    finest = o;
    if (o.diverged) break;
  }
  const auto final_eval = model.evaluate(state, model.select_anchors(state, 0), 0, false);
  res.trajectory = state;
  res.cost = final_eval.cost;
  res.valid_fraction = final_eval.valid_fraction();
  if (finest.diverged) {
    res.status = TrackStatus::Diverged;
  } else {
    res.status = finest.converged ? TrackStatus::Converged : TrackStatus::MaxIterations;
  }
  if (!std::isfinite(res.cost) || res.valid_fraction < cfg.min_valid_residual_fraction) {
    res.status = TrackStatus::Dropped;
  }
  return res;
}

}  // namespace detail

/// Picks a non-zero blur extent when the initial estimate has none: at the
/// coarsest level, candidate symmetric spreads around the current middle
/// pose are scored and the cheapest (including no spread) is kept. The
/// re-blur cost is even in the spread, so zero spread is a stationary point
/// the normal equations cannot leave on their own.
inline LocalTrajectory seed_spread(const ReblurModel<12>& model, const Keyframe& kf, const LocalTrajectory& init) {
  const int level = kf.levels() - 1;
  const PinholeCamera& cam = kf.cameras[level];
  const Pose mid = init.mid();
  LocalTrajectory best = init;
  double best_cost = level_cost(model, init, level);
  const double depth = kf.median_depth > 0.0 ? kf.median_depth : 1.0;
  const double h = 0.5 * std::numbers::sqrt2;
  const Vec2 dirs[4] = {{1, 0}, {0, 1}, {h, h}, {h, -h}};
  for (const double px : {1.0, 2.0, 4.0}) {
    for (const Vec2& d : dirs) {
      const Vec3 half(0.5 * px * d.x() * depth / cam.fx, 0.5 * px * d.y() * depth / cam.fy, 0.0);
      const LocalTrajectory cand(mid * se3_exp(Twist(Vec3::Zero(), -half)), mid * se3_exp(Twist(Vec3::Zero(), half)),
                                 init.exposure());
      const double c = level_cost(model, cand, level);
      if (c < best_cost) {
        best_cost = c;
        best = cand;
      }
    }
  }
  return best;
}

/// Blur-aware tracking of `current` against `kf`. With exposure == 0 the
/// start and end poses are tied and a single virtual pose is used.
inline TrackResult track(const Keyframe& kf, const ImagePyramid& current, double exposure,
                         const LocalTrajectory& init, const TrackerConfig& cfg) {
  detail::check_inputs(kf, current, cfg);
  if (!(exposure >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "exposure must be >= 0");
  if (exposure == 0.0) {
    const ReblurModel<6> model(kf, current, cfg, 1);
    return detail::run_pyramid(model, LocalTrajectory::stationary(init.start(), 0.0), kf, cfg);
  }
  const ReblurModel<12> model(kf, current, cfg, cfg.n_virtual);
  LocalTrajectory state(init.start(), init.end(), exposure);
  if (cfg.seed_spread && state.relative_twist().norm() < 1e-12) {
    // Coarse single-pose alignment first, then pick a blur direction.
    const ReblurModel<6> tied(kf, current, cfg, 1);
    LocalTrajectory coarse = LocalTrajectory::stationary(state.start(), exposure);
    optimize_level(tied, coarse, kf.levels() - 1, cfg);
    state = seed_spread(model, kf, coarse);
  }
  return detail::run_pyramid(model, state, kf, cfg);
}

/// Reference sharp aligner over a single pose.
inline TrackResult track_sharp(const Keyframe& kf, const ImagePyramid& current, const Pose& init,
                               const TrackerConfig& cfg) {
  detail::check_inputs(kf, current, cfg);
  const SharpModel model(kf, current, cfg);
  return detail::run_pyramid(model, LocalTrajectory::stationary(init, 0.0), kf, cfg);
}

/// Re-blurred keyframe intensity at an integer current-image pixel, or
/// nullopt when any virtual transfer fails or leaves the keyframe image.
inline std::optional<double> synthesize_reblurred(const Keyframe& kf, const LocalTrajectory& traj,
                                                  const Eigen::Vector2i& anchor, double depth, int n,
                                                  int level = 0) {
  const ImagePyramid& dummy = kf.pyramid;
  static const TrackerConfig cfg{};
  if (n == 1 || traj.exposure() == 0.0) {
    const ReblurModel<6> model(kf, dummy, cfg, 1);
    const auto s = model.synthesize(VirtualPoses(traj, 1, false), Vec2(anchor.x(), anchor.y()), depth, level, false);
    if (!s) return std::nullopt;
    return s->first;
  }
  const ReblurModel<12> model(kf, dummy, cfg, n);
  const auto s = model.synthesize(VirtualPoses(traj, n, false), Vec2(anchor.x(), anchor.y()), depth, level, false);
  if (!s) return std::nullopt;
  return s->first;
}

}  // namespace blurvo
