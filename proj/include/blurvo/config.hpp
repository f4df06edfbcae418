#pragma once

// Run configuration as plain "key = value" lines; '#' starts a comment.
// Unknown keys and out-of-range values are errors.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "blurvo/error.hpp"
#include "blurvo/eval.hpp"
#include "blurvo/sequence.hpp"

namespace blurvo {

struct RunConfig {
  std::string dataset;
  std::string output;
  SequenceOptions sequence;
  AlignMode align = AlignMode::Rigid;
  double max_dt = 0.01;

  void validate() const {
    sequence.tracker.validate();
    if (!(sequence.depth_noise_sigma >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "depth_noise_sigma must be >= 0");
    if (!(sequence.keyframe_baseline_ratio > 0.0)) {
      throw Error(ErrorCode::ConfigInvalid, "keyframe_baseline_ratio must be positive");
    }
    if (!(sequence.keyframe_min_valid >= 0.0 && sequence.keyframe_min_valid <= 1.0)) {
      throw Error(ErrorCode::ConfigInvalid, "keyframe_min_valid must be in [0, 1]");
    }
    if (!(max_dt > 0.0)) throw Error(ErrorCode::ConfigInvalid, "max_dt must be positive");
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& s) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::ConfigInvalid, key + ": not a number '" + s + "'");
  }
  return v;
}

inline long long parse_integer(const std::string& key, const std::string& s) {
  size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw Error(ErrorCode::ConfigInvalid, key + ": not an integer '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw Error(ErrorCode::ConfigInvalid, key + ": expected true/false, got '" + s + "'");
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline Field double_field(const std::string& key, double RunConfig::*outer) {
  return {key, [outer](const RunConfig& c) { return format_double(c.*outer); },
          [outer, key](RunConfig& c, const std::string& v) { c.*outer = parse_double(key, v); }};
}

template <class Get>
Field tracker_double(const std::string& key, Get member) {
  return {key, [member](const RunConfig& c) { return format_double(c.sequence.tracker.*member); },
          [member, key](RunConfig& c, const std::string& v) { c.sequence.tracker.*member = parse_double(key, v); }};
}

template <class Get>
Field tracker_int(const std::string& key, Get member) {
  return {key, [member](const RunConfig& c) { return std::to_string(c.sequence.tracker.*member); },
          [member, key](RunConfig& c, const std::string& v) {
            const long long x = parse_integer(key, v);
            if (x < -1000000000LL || x > 1000000000LL) throw Error(ErrorCode::ConfigInvalid, key + ": out of range");
            c.sequence.tracker.*member = static_cast<int>(x);
          }};
}

template <class Get>
Field sequence_double(const std::string& key, Get member) {
  return {key, [member](const RunConfig& c) { return format_double(c.sequence.*member); },
          [member, key](RunConfig& c, const std::string& v) { c.sequence.*member = parse_double(key, v); }};
}

template <class Get>
Field sequence_bool(const std::string& key, Get member) {
  return {key, [member](const RunConfig& c) { return std::string(c.sequence.*member ? "true" : "false"); },
          [member, key](RunConfig& c, const std::string& v) { c.sequence.*member = parse_bool(key, v); }};
}

inline const std::vector<Field>& config_fields() {
  static const std::vector<Field> fields = {
      {"dataset", [](const RunConfig& c) { return c.dataset; },
       [](RunConfig& c, const std::string& v) { c.dataset = v; }},
      {"output", [](const RunConfig& c) { return c.output; }, [](RunConfig& c, const std::string& v) { c.output = v; }},
      {"depth_dir", [](const RunConfig& c) { return c.sequence.depth_dir.string(); },
       [](RunConfig& c, const std::string& v) { c.sequence.depth_dir = v; }},
      {"mode", [](const RunConfig& c) { return std::string(to_string(c.sequence.mode)); },
       [](RunConfig& c, const std::string& v) { c.sequence.mode = parse_track_mode(v); }},
      sequence_bool("force_zero_exposure", &SequenceOptions::force_zero_exposure),
      sequence_double("depth_noise_sigma", &SequenceOptions::depth_noise_sigma),
      {"seed", [](const RunConfig& c) { return std::to_string(c.sequence.seed); },
       [](RunConfig& c, const std::string& v) {
         const long long x = parse_integer("seed", v);
         if (x < 0) throw Error(ErrorCode::ConfigInvalid, "seed must be >= 0");
         c.sequence.seed = static_cast<uint64_t>(x);
       }},
      sequence_double("keyframe_baseline_ratio", &SequenceOptions::keyframe_baseline_ratio),
      sequence_double("keyframe_min_valid", &SequenceOptions::keyframe_min_valid),
      sequence_bool("resolve_time_direction", &SequenceOptions::resolve_time_direction),
      tracker_int("patch_size", &TrackerConfig::patch_size),
      tracker_int("n_virtual", &TrackerConfig::n_virtual),
      tracker_int("pyramid_levels", &TrackerConfig::pyramid_levels),
      tracker_double("huber_delta", &TrackerConfig::huber_delta),
      tracker_int("max_iterations", &TrackerConfig::max_iterations),
      tracker_double("lm_lambda_init", &TrackerConfig::lm_lambda_init),
      tracker_double("lm_lambda_factor", &TrackerConfig::lm_lambda_factor),
      tracker_double("convergence_eps", &TrackerConfig::convergence_eps),
      tracker_double("min_valid_residual_fraction", &TrackerConfig::min_valid_residual_fraction),
      tracker_double("outlier_threshold", &TrackerConfig::outlier_threshold),
      tracker_int("keypoint_count", &TrackerConfig::keypoint_count),
      tracker_int("keypoint_margin", &TrackerConfig::keypoint_margin),
      {"seed_spread", [](const RunConfig& c) { return std::string(c.sequence.tracker.seed_spread ? "true" : "false"); },
       [](RunConfig& c, const std::string& v) { c.sequence.tracker.seed_spread = parse_bool("seed_spread", v); }},
      {"align", [](const RunConfig& c) { return std::string(to_string(c.align)); },
       [](RunConfig& c, const std::string& v) { c.align = parse_align_mode(v); }},
      double_field("max_dt", &RunConfig::max_dt),
  };
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : detail::config_fields()) keys.push_back(f.key);
  return keys;
}

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  for (const auto& f : detail::config_fields()) {
    if (f.key == key) {
      f.set(c, value);
      return;
    }
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown key '" + key + "'");
}

/// Applies one "key=value" assignment.
inline void apply_assignment(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "expected key=value, got '" + assignment + "'");
  set_config_value(c, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

/// Applies every assignment in `text` on top of `base`.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    try {
      apply_assignment(base, line);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigInvalid, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

/// Every key with its effective value, one per line, re-parseable.
inline std::string format_config(const RunConfig& c) {
  std::string out;
  for (const auto& f : detail::config_fields()) out += f.key + " = " + f.get(c) + "\n";
  return out;
}

}  // namespace blurvo
