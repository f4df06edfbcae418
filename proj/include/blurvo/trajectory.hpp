#pragma once

// Timestamped pose sequences and the TUM text format
// ("timestamp tx ty tz qx qy qz qw", world-from-camera).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "blurvo/error.hpp"
#include "blurvo/lie.hpp"

namespace blurvo {

struct StampedPose {
  double timestamp;
  Pose pose;
};

/// Poses ordered by strictly increasing timestamp.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<StampedPose> poses) : poses_(std::move(poses)) {
    for (size_t i = 1; i < poses_.size(); ++i) {
      if (!(poses_[i].timestamp > poses_[i - 1].timestamp)) {
        throw Error(ErrorCode::BadParams, "trajectory timestamps must be strictly increasing");
      }
    }
  }

  void push_back(const StampedPose& p) {
    if (!poses_.empty() && !(p.timestamp > poses_.back().timestamp)) {
      throw Error(ErrorCode::BadParams, "trajectory timestamps must be strictly increasing");
    }
    poses_.push_back(p);
  }

  size_t size() const { return poses_.size(); }
  bool empty() const { return poses_.empty(); }
  const StampedPose& operator[](size_t i) const { return poses_[i]; }
  auto begin() const { return poses_.begin(); }
  auto end() const { return poses_.end(); }

 private:
  std::vector<StampedPose> poses_;
};

inline std::string format_timestamp(double t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", t);
  return buf;
}

inline std::string format_tum_line(const StampedPose& sp) {
  const Vec3& t = sp.pose.translation();
  const Quat& q = sp.pose.quat();
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s %.17g %.17g %.17g %.17g %.17g %.17g %.17g",
                format_timestamp(sp.timestamp).c_str(), t.x(), t.y(), t.z(), q.x(), q.y(), q.z(),
                q.w());
  return buf;
}

inline void save_tum(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& sp : traj) out << format_tum_line(sp) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed " + path.string());
}

inline Trajectory load_tum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<StampedPose> poses;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ls(line);
    double ts, tx, ty, tz, qx, qy, qz, qw;
    if (!(ls >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno));
    }
    poses.push_back({ts, Pose(Quat(qw, qx, qy, qz), Vec3(tx, ty, tz))});
  }
  return Trajectory(std::move(poses));
}

}  // namespace blurvo
