#pragma once

// Trajectory metrics: timestamp association, absolute-orientation alignment,
// RMSE absolute trajectory error and frame-drop percentage.

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "blurvo/error.hpp"
#include "blurvo/lie.hpp"
#include "blurvo/trajectory.hpp"

namespace blurvo {

/// Greedy nearest-timestamp matching: candidate pairs within max_dt are
/// taken in order of increasing |dt| (ties by est index, then gt index),
/// each pose used at most once. Result sorted by est index.
inline std::vector<std::pair<size_t, size_t>> associate(const Trajectory& est, const Trajectory& gt,
                                                         double max_dt = 0.01) {
  if (!(max_dt > 0.0)) throw Error(ErrorCode::BadParams, "max_dt must be positive");
  struct Cand {
    double dt;
    size_t i, j;
  };
  std::vector<Cand> cands;
  for (size_t i = 0; i < est.size(); ++i) {
    const double t = est[i].timestamp;
    // gt is sorted; only the window [t - max_dt, t + max_dt] matters.
    auto lo = std::lower_bound(gt.begin(), gt.end(), t - max_dt,
                               [](const StampedPose& p, double v) { return p.timestamp < v; });
    for (auto it = lo; it != gt.end() && it->timestamp <= t + max_dt; ++it) {
      cands.push_back({std::abs(it->timestamp - t), i, static_cast<size_t>(it - gt.begin())});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.dt != b.dt) return a.dt < b.dt;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  std::vector<bool> used_e(est.size(), false), used_g(gt.size(), false);
  std::vector<std::pair<size_t, size_t>> pairs;
  for (const auto& c : cands) {
    if (used_e[c.i] || used_g[c.j]) continue;
    used_e[c.i] = used_g[c.j] = true;
    pairs.emplace_back(c.i, c.j);
  }
  if (pairs.empty()) throw Error(ErrorCode::NoMatches, "no timestamps within max_dt");
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

enum class AlignMode { Rigid, Similarity };

inline AlignMode parse_align_mode(const std::string& s) {
  if (s == "rigid") return AlignMode::Rigid;
  if (s == "similarity") return AlignMode::Similarity;
  throw Error(ErrorCode::ConfigInvalid, "unknown alignment mode '" + s + "'");
}

inline const char* to_string(AlignMode m) { return m == AlignMode::Rigid ? "rigid" : "similarity"; }

/// x -> scale * rotation * x + translation
struct SimilarityTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Vec3 operator*(const Vec3& x) const { return scale * (rotation * x) + translation; }
};

inline bool has_spread(const Trajectory& est, const std::vector<std::pair<size_t, size_t>>& pairs) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pairs) mean += est[p.first].pose.translation();
  mean /= static_cast<double>(pairs.size());
  double sq = 0.0;
  for (const auto& p : pairs) sq += (est[p.first].pose.translation() - mean).squaredNorm();
  return sq >= 1e-24;
}

/// Least-squares alignment of est positions onto gt positions.
inline SimilarityTransform align(const Trajectory& est, const Trajectory& gt,
                                 const std::vector<std::pair<size_t, size_t>>& pairs, AlignMode mode) {
  const auto n = static_cast<Eigen::Index>(pairs.size());
  if (n < 3) throw Error(ErrorCode::DegenerateConfiguration, "need at least 3 matched poses");
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    src.col(k) = est[pairs[k].first].pose.translation();
    dst.col(k) = gt[pairs[k].second].pose.translation();
  }
  if (!has_spread(est, pairs)) {
    throw Error(ErrorCode::DegenerateConfiguration, "estimated positions have no spread");
  }
  const Eigen::Matrix4d T = Eigen::umeyama(src, dst, mode == AlignMode::Similarity);
  SimilarityTransform out;
  const Mat3 sR = T.topLeftCorner<3, 3>();
  out.scale = mode == AlignMode::Similarity ? std::cbrt(sR.determinant()) : 1.0;
  out.rotation = sR / out.scale;
  out.translation = T.topRightCorner<3, 1>();
  return out;
}

struct AteReport {
  double rmse = 0.0;
  std::vector<double> timestamps;  // est timestamps of matched poses
  std::vector<double> errors;      // per matched pose, meters
  size_t matched = 0;
  SimilarityTransform alignment;
};

inline AteReport compute_ate(const Trajectory& est, const Trajectory& gt, AlignMode mode, double max_dt = 0.01) {
  const auto pairs = associate(est, gt, max_dt);
  AteReport r;
  if (pairs.size() >= 3 && !has_spread(est, pairs)) {
    // Every estimated position coincides: rotation and scale do not change
    // the residual, so only the centroid shift is applied.
    Vec3 mean = Vec3::Zero();
    for (const auto& [i, j] : pairs) mean += gt[j].pose.translation() - est[i].pose.translation();
    r.alignment.translation = mean / static_cast<double>(pairs.size());
  } else {
    r.alignment = align(est, gt, pairs, mode);
  }
  double sq = 0.0;
  for (const auto& [i, j] : pairs) {
    const double e = (r.alignment * est[i].pose.translation() - gt[j].pose.translation()).norm();
    r.timestamps.push_back(est[i].timestamp);
    r.errors.push_back(e);
    sq += e * e;
  }
  r.matched = pairs.size();
  r.rmse = std::sqrt(sq / static_cast<double>(pairs.size()));
  return r;
}

inline std::string format_ate_report(const AteReport& r, AlignMode mode) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "rmse_ate_m %.6f\n", r.rmse);
  out << buf;
  out << "matched " << r.matched << '\n';
  out << "align " << to_string(mode) << '\n';
  std::snprintf(buf, sizeof(buf), "scale %.9f\n", r.alignment.scale);
  out << buf;
  return out.str();
}

inline void save_ate_csv(const std::filesystem::path& path, const AteReport& r) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "timestamp,error_m\n";
  char buf[96];
  for (size_t k = 0; k < r.errors.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.9f,%.9f\n", r.timestamps[k], r.errors[k]);
    out << buf;
  }
}

/// Status column of a tracking report file.
struct ReportRow {
  double timestamp;
  std::string status;
  double cost;
  double valid_fraction;
  int iterations;

  bool dropped() const { return status == "Dropped"; }
};

inline std::vector<ReportRow> load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<ReportRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ls(line);
    ReportRow r;
    if (!(ls >> r.timestamp >> r.status >> r.cost >> r.valid_fraction >> r.iterations)) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno));
    }
    rows.push_back(r);
  }
  return rows;
}

/// 100 * dropped / total_frames.
template <class Report, class IsDropped>
double frame_drop_rate(const std::vector<Report>& reports, size_t total_frames, IsDropped is_dropped) {
  if (total_frames < 1) throw Error(ErrorCode::BadParams, "total_frames must be >= 1");
  const auto dropped = std::count_if(reports.begin(), reports.end(), is_dropped);
  return 100.0 * static_cast<double>(dropped) / static_cast<double>(total_frames);
}

inline double frame_drop_rate(const std::vector<ReportRow>& reports, size_t total_frames) {
  return frame_drop_rate(reports, total_frames, [](const ReportRow& r) { return r.dropped(); });
}

}  // namespace blurvo
