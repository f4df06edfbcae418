#pragma once

// On-disk sequence layout:
//   calib.txt        "fx fy cx cy width height"
//   frames.txt       "timestamp exposure blurred sharp depth" per frame
//   groundtruth.txt  TUM rows at exposure start, middle and end of each frame
//   blurred_NNNNNN.pgm, sharp_NNNNNN.pgm (mid-exposure), depth_NNNNNN.pfm

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "blurvo/blursim.hpp"
#include "blurvo/camera.hpp"
#include "blurvo/image.hpp"
#include "blurvo/trajectory.hpp"

namespace blurvo {

struct DatasetFrame {
  double timestamp = 0.0;
  double exposure = 0.0;
  std::string blurred;
  std::string sharp;
  std::string depth;
};

struct Dataset {
  std::filesystem::path root;
  PinholeCamera camera;
  std::vector<DatasetFrame> frames;
  Trajectory groundtruth;

  GrayImage blurred(size_t i) const { return load_pgm(root / frames.at(i).blurred); }
  GrayImage sharp(size_t i) const { return load_pgm(root / frames.at(i).sharp); }
  GrayImage depth(size_t i) const { return load_pfm(root / frames.at(i).depth); }

  /// Ground-truth pose at time t (exact row match within 1e-7 s).
  Pose groundtruth_at(double t) const {
    for (const auto& sp : groundtruth) {
      if (std::abs(sp.timestamp - t) < 1e-7) return sp.pose;
    }
    throw Error(ErrorCode::NoMatches, "no ground-truth row at t = " + format_timestamp(t));
  }

  /// Ground-truth start/end poses of frame i.
  LocalTrajectory groundtruth_frame(size_t i) const {
    const auto& f = frames.at(i);
    const Pose start = groundtruth_at(f.timestamp);
    const Pose end = f.exposure > 0.0 ? groundtruth_at(f.timestamp + f.exposure) : start;
    return LocalTrajectory(start, end, f.exposure);
  }
};

inline std::string frame_filename(const char* prefix, size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%06zu.%s", prefix, i, ext);
  return buf;
}

/// Ground-truth rows for a list of frames: start, middle and end of every
/// exposure, duplicates (zero exposure) collapsed.
inline Trajectory groundtruth_rows(const std::vector<FrameSpec>& frames) {
  Trajectory gt;
  for (const auto& f : frames) {
    const double tau = f.exposure();
    const StampedPose rows[3] = {{f.timestamp, f.gt.start()},
                                 {f.timestamp + 0.5 * tau, f.gt.mid()},
                                 {f.timestamp + tau, f.gt.end()}};
    for (const auto& r : rows) {
      if (gt.empty() || r.timestamp > gt[gt.size() - 1].timestamp) gt.push_back(r);
    }
  }
  return gt;
}

struct SequenceSummary {
  size_t frame_count = 0;
  std::vector<double> streak_px;  // per frame
  double min_streak() const { return streak_px.empty() ? 0.0 : *std::min_element(streak_px.begin(), streak_px.end()); }
  double max_streak() const { return streak_px.empty() ? 0.0 : *std::max_element(streak_px.begin(), streak_px.end()); }
  double mean_streak() const {
    double s = 0.0;
    for (double x : streak_px) s += x;
    return streak_px.empty() ? 0.0 : s / streak_px.size();
  }
};

/// Renders every frame and writes the dataset layout into `dir`.
inline SequenceSummary generate_sequence(const PlanarScene& scene, const PinholeCamera& cam,
                                         const std::vector<FrameSpec>& frames, int n,
                                         const std::filesystem::path& dir) {
  validate_scene(scene);
  if (n < 1) throw Error(ErrorCode::BadParams, "sample count must be >= 1");
  for (size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].timestamp >= frames[i - 1].timestamp + frames[i - 1].exposure()) ||
        !(frames[i].timestamp > frames[i - 1].timestamp)) {
      throw Error(ErrorCode::BadParams, "frames must be ordered with non-overlapping exposures");
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  save_camera(dir / "calib.txt", cam);
  std::ofstream list(dir / "frames.txt");
  if (!list) throw Error(ErrorCode::IoError, "cannot write frames.txt");

  SequenceSummary summary;
  for (size_t i = 0; i < frames.size(); ++i) {
    const FrameSpec& f = frames[i];
    const std::string bname = frame_filename("blurred", i, "pgm");
    const std::string sname = frame_filename("sharp", i, "pgm");
    const std::string dname = frame_filename("depth", i, "pfm");
    save_pgm(dir / bname, render_blurred(scene, cam, f, n));
    const SharpRender mid = render_sharp_full(scene, cam, f.gt.mid());
    save_pgm(dir / sname, mid.image);
    save_pfm(dir / dname, mid.depth);
    list << format_timestamp(f.timestamp) << ' ' << format_timestamp(f.exposure()) << ' ' << bname << ' '
         << sname << ' ' << dname << '\n';
    summary.streak_px.push_back(blur_streak_length(scene, cam, f.gt));
  }
  if (!list) throw Error(ErrorCode::IoError, "write failed frames.txt");
  save_tum(dir / "groundtruth.txt", groundtruth_rows(frames));
  summary.frame_count = frames.size();
  return summary;
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.root = dir;
  ds.camera = load_camera(dir / "calib.txt");
  std::ifstream in(dir / "frames.txt");
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + (dir / "frames.txt").string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ls(line);
    DatasetFrame f;
    if (!(ls >> f.timestamp >> f.exposure >> f.blurred >> f.sharp >> f.depth) || f.exposure < 0.0) {
      throw Error(ErrorCode::ParseError, "frames.txt:" + std::to_string(lineno));
    }
    ds.frames.push_back(f);
  }
  ds.groundtruth = load_tum(dir / "groundtruth.txt");
  return ds;
}

}  // namespace blurvo
