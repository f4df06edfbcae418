// blurvo: synth | track | eval | selfcheck
//
// Exit codes: 0 success, 1 check or tracking failure, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "blurvo/blursim.hpp"
#include "blurvo/config.hpp"
#include "blurvo/dataset.hpp"
#include "blurvo/eval.hpp"
#include "blurvo/selfcheck.hpp"
#include "blurvo/sequence.hpp"

namespace fs = std::filesystem;
using namespace blurvo;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Vec3 to_vec3(const std::vector<double>& v, const char* name) {
  if (v.size() != 3) throw UsageError(std::string(name) + " needs three comma-separated values");
  return {v[0], v[1], v[2]};
}

struct SynthArgs {
  std::string kind = "sinusoidal_shake";
  int frames = 100;
  double fps = 30.0;
  double exposure = 0.03;
  std::vector<double> velocity{0.4, 0, 0}, angular_velocity{0, 0, 0};
  std::vector<double> amplitude{0.19, 0.19, 0.02}, rot_amplitude{0.02, 0.02, 0.01};
  std::vector<double> phase{0, 1.5707963267948966, 1.0}, rot_phase{0.5, 1.5, 2.5};
  double frequency = 0.7;
  int width = 640, height = 480;
  double fx = 500.0, fy = 0.0;
  double depth = 1.0, texel = 0.002, texture_sigma = 1.5;
  int samples = 64;
  uint64_t seed = 1;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  MotionParams mp;
  if (a.kind == "constant_velocity") {
    mp.kind = MotionKind::ConstantVelocity;
  } else if (a.kind == "sinusoidal_shake") {
    mp.kind = MotionKind::SinusoidalShake;
  } else {
    throw UsageError("unknown --kind '" + a.kind + "'");
  }
  mp.frame_rate = a.fps;
  mp.exposure = a.exposure;
  mp.frame_count = a.frames;
  mp.velocity = to_vec3(a.velocity, "--velocity");
  mp.angular_velocity = to_vec3(a.angular_velocity, "--angular-velocity");
  mp.amplitude = to_vec3(a.amplitude, "--amplitude");
  mp.rot_amplitude = to_vec3(a.rot_amplitude, "--rot-amplitude");
  mp.phase = to_vec3(a.phase, "--phase");
  mp.rot_phase = to_vec3(a.rot_phase, "--rot-phase");
  mp.frequency = a.frequency;
  const double fy = a.fy > 0.0 ? a.fy : a.fx;
  const PinholeCamera cam{a.fx, fy, (a.width - 1) / 2.0, (a.height - 1) / 2.0, a.width, a.height};
  const auto frames = synth_trajectory(mp);
  const PlanarScene scene = covering_scene(cam, frames, a.depth, a.texel, a.seed, a.texture_sigma);
  const SequenceSummary s = generate_sequence(scene, cam, frames, a.samples, a.out);
  std::printf("frames %zu\n", s.frame_count);
  std::printf("streak_px min %.3f mean %.3f max %.3f\n", s.min_streak(), s.mean_streak(), s.max_streak());
  return 0;
}

struct TrackArgs {
  std::string config_file;
  std::vector<std::string> assignments;
  std::string dataset, out, mode, depth_dir;
  bool force_zero_exposure = false;
  uint64_t seed = 0;
  double depth_noise = 0.0;
};

int run_track(const TrackArgs& a, const CLI::App& cmd) {
  // defaults < config file < --set < dedicated flags
  RunConfig cfg;
  if (!a.config_file.empty()) cfg = load_config(a.config_file, cfg);
  for (const auto& s : a.assignments) apply_assignment(cfg, s);
  if (cmd.count("--dataset")) cfg.dataset = a.dataset;
  if (cmd.count("--out")) cfg.output = a.out;
  if (cmd.count("--mode")) cfg.sequence.mode = parse_track_mode(a.mode);
  if (cmd.count("--force-zero-exposure")) cfg.sequence.force_zero_exposure = a.force_zero_exposure;
  if (cmd.count("--seed")) cfg.sequence.seed = a.seed;
  if (cmd.count("--depth-noise")) cfg.sequence.depth_noise_sigma = a.depth_noise;
  if (cmd.count("--depth-dir")) cfg.sequence.depth_dir = a.depth_dir;
  cfg.validate();
  if (cfg.dataset.empty() || cfg.output.empty()) throw UsageError("dataset and output are required");

  const Dataset ds = load_dataset(cfg.dataset);
  fs::create_directories(cfg.output);
  {
    std::ofstream echo(fs::path(cfg.output) / "config.txt");
    echo << format_config(cfg);
  }
  const SequenceResult r = track_sequence(ds, cfg.sequence);
  save_tum(fs::path(cfg.output) / "trajectory.txt", r.estimate);
  save_report(fs::path(cfg.output) / "report.txt", r);
  std::vector<TrackResult> results;
  for (const auto& f : r.frames) results.push_back(f.result);
  std::printf("frames %zu\n", r.frames.size());
  std::printf("dropped %zu\n", r.dropped());
  std::printf("fd_percent %.3f\n", frame_drop_rate(results, r.frames.size()));
  return r.dropped() == r.frames.size() ? kExitFailure : 0;
}

struct EvalArgs {
  std::string est, gt, align = "rigid", report, csv;
  double max_dt = 0.01;
};

int run_eval(const EvalArgs& a) {
  const AlignMode mode = parse_align_mode(a.align);
  const AteReport r = compute_ate(load_tum(a.est), load_tum(a.gt), mode, a.max_dt);
  std::cout << format_ate_report(r, mode);
  if (!a.csv.empty()) save_ate_csv(a.csv, r);
  if (!a.report.empty()) {
    const auto rows = load_report(a.report);
    if (rows.empty()) throw Error(ErrorCode::ParseError, "empty report file");
    std::printf("fd_percent %.3f\n", frame_drop_rate(rows, rows.size()));
  }
  return 0;
}

int run_selfcheck(uint64_t seed, const std::vector<std::string>& faults) {
  SelfcheckOptions o;
  o.seed = seed;
  const auto names = jacobian_block_names();
  for (const auto& f : faults) {
    if (std::find(names.begin(), names.end(), f) == names.end()) throw UsageError("unknown Jacobian block '" + f + "'");
    o.inject_fault.insert(f);
  }
  bool ok = true;
  for (const auto& c : run_selfcheck(o)) {
    std::cout << format_check(c) << '\n';
    ok &= c.passed();
  }
  std::cout << "selfcheck " << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blur-aware direct tracking toolkit"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic blurred sequence");
  synth->add_option("--kind", sa.kind, "constant_velocity | sinusoidal_shake")->capture_default_str();
  synth->add_option("--frames", sa.frames)->capture_default_str();
  synth->add_option("--fps", sa.fps)->capture_default_str();
  synth->add_option("--exposure", sa.exposure, "seconds")->capture_default_str();
  synth->add_option("--velocity", sa.velocity, "m/s, x,y,z")->delimiter(',');
  synth->add_option("--angular-velocity", sa.angular_velocity, "rad/s, x,y,z")->delimiter(',');
  synth->add_option("--amplitude", sa.amplitude, "shake amplitude m, x,y,z")->delimiter(',');
  synth->add_option("--rot-amplitude", sa.rot_amplitude, "shake amplitude rad, x,y,z")->delimiter(',');
  synth->add_option("--phase", sa.phase, "rad, x,y,z")->delimiter(',');
  synth->add_option("--rot-phase", sa.rot_phase, "rad, x,y,z")->delimiter(',');
  synth->add_option("--frequency", sa.frequency, "Hz")->capture_default_str();
  synth->add_option("--width", sa.width)->capture_default_str();
  synth->add_option("--height", sa.height)->capture_default_str();
  synth->add_option("--fx", sa.fx)->capture_default_str();
  synth->add_option("--fy", sa.fy, "defaults to fx");
  synth->add_option("--depth", sa.depth, "plane depth m")->capture_default_str();
  synth->add_option("--texel", sa.texel, "texel size m")->capture_default_str();
  synth->add_option("--texture-sigma", sa.texture_sigma)->capture_default_str();
  synth->add_option("--samples", sa.samples, "poses averaged per blurred frame")->capture_default_str();
  synth->add_option("--seed", sa.seed)->capture_default_str();
  synth->add_option("--out", sa.out)->required();

  TrackArgs ta;
  auto* track = app.add_subcommand("track", "Track a dataset");
  track->add_option("--config", ta.config_file, "key=value file");
  track->add_option("--set", ta.assignments, "key=value override (repeatable)");
  track->add_option("--dataset", ta.dataset);
  track->add_option("--out", ta.out);
  track->add_option("--mode", ta.mode, "mba | sharp | blur-naive");
  track->add_flag("--force-zero-exposure", ta.force_zero_exposure);
  track->add_option("--seed", ta.seed);
  track->add_option("--depth-noise", ta.depth_noise, "relative depth noise sigma");
  track->add_option("--depth-dir", ta.depth_dir, "depth maps replacing the dataset's");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "RMSE absolute trajectory error");
  eval->add_option("--est", ea.est)->required();
  eval->add_option("--gt", ea.gt)->required();
  eval->add_option("--align", ea.align, "rigid | similarity")->capture_default_str();
  eval->add_option("--max-dt", ea.max_dt)->capture_default_str();
  eval->add_option("--report", ea.report, "tracking report for the frame-drop rate");
  eval->add_option("--csv", ea.csv, "per-pose errors");

  uint64_t check_seed = 42;
  std::vector<std::string> faults;
  auto* check = app.add_subcommand("selfcheck", "Numerical Jacobian and kernel checks");
  check->add_option("--seed", check_seed)->capture_default_str();
  check->add_option("--inject-fault", faults, "flip the sign of a Jacobian block");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return run_synth(sa);
    if (*track) return run_track(ta, *track);
    if (*eval) return run_eval(ea);
    if (*check) return run_selfcheck(check_seed, faults);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::ConfigInvalid ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
