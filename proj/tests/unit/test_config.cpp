#include <gtest/gtest.h>

#include "blurvo/config.hpp"
#include "blurvo/selfcheck.hpp"

using namespace blurvo;

namespace {

template <class F>
void expect_error(ErrorCode code, F&& f) {
  try {
    f();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Config, ParsesAssignmentsAndComments) {
  const RunConfig c = parse_config(
      "# tracker\n"
      "n_virtual = 12   # samples\n"
      "\n"
      "huber_delta=0.05\n"
      "mode = blur-naive\n"
      "align = similarity\n"
      "force_zero_exposure = true\n"
      "seed = 9\n"
      "dataset = /data/seq one\n");
  EXPECT_EQ(c.sequence.tracker.n_virtual, 12);
  EXPECT_EQ(c.sequence.tracker.huber_delta, 0.05);
  EXPECT_EQ(c.sequence.mode, TrackMode::BlurNaive);
  EXPECT_EQ(c.align, AlignMode::Similarity);
  EXPECT_TRUE(c.sequence.force_zero_exposure);
  EXPECT_EQ(c.sequence.seed, 9u);
  EXPECT_EQ(c.dataset, "/data/seq one");
}

TEST(Config, UnknownKeysAndBadValuesAreErrors) {
  expect_error(ErrorCode::ConfigInvalid, [] { parse_config("n_virtul = 8\n"); });
  expect_error(ErrorCode::ConfigInvalid, [] { parse_config("n_virtual = eight\n"); });
  expect_error(ErrorCode::ConfigInvalid, [] { parse_config("n_virtual = 8.5\n"); });
  expect_error(ErrorCode::ConfigInvalid, [] { parse_config("huber_delta = nan\n"); });
  expect_error(ErrorCode::ConfigInvalid, [] { parse_config("seed = -1\n"); });
  expect_error(ErrorCode::ConfigInvalid, [] { parse_config("mode = blind\n"); });
  expect_error(ErrorCode::ConfigInvalid, [] { parse_config("just some words\n"); });
  expect_error(ErrorCode::ConfigInvalid, [] { parse_config("seed_spread = maybe\n"); });
}

TEST(Config, ValidateChecksRanges) {
  for (const char* bad : {"n_virtual = 0", "pyramid_levels = 0", "huber_delta = -1", "depth_noise_sigma = -0.1",
                          "keyframe_min_valid = 1.5", "max_dt = 0", "min_valid_residual_fraction = 2"}) {
    const RunConfig c = parse_config(bad);
    expect_error(ErrorCode::ConfigInvalid, [&] { c.validate(); });
  }
  RunConfig{}.validate();
}

TEST(Config, FormatRoundTripCoversEveryKey) {
  RunConfig c = parse_config(
      "n_virtual = 16\nconvergence_eps = 1e-5\nlm_lambda_init = 0.001\ndepth_noise_sigma = 0.0333\n"
      "mode = sharp\nmax_dt = 0.02\ndepth_dir = /tmp/d\noutput = out\n");
  const std::string text = format_config(c);
  for (const auto& key : config_keys()) {
    EXPECT_NE(text.find(key + " = "), std::string::npos) << key;
  }
  const RunConfig back = parse_config(text);
  EXPECT_EQ(format_config(back), text);
  EXPECT_EQ(back.sequence.depth_noise_sigma, 0.0333);
  EXPECT_EQ(back.sequence.tracker.convergence_eps, 1e-5);
}

TEST(Config, LaterAssignmentsWin) {
  const RunConfig file = parse_config("n_virtual = 12\nseed = 3\n");
  RunConfig c = file;
  apply_assignment(c, "n_virtual=20");
  EXPECT_EQ(c.sequence.tracker.n_virtual, 20);
  EXPECT_EQ(c.sequence.seed, 3u);
  const RunConfig layered = parse_config("seed = 5\n", file);
  EXPECT_EQ(layered.sequence.seed, 5u);
  EXPECT_EQ(layered.sequence.tracker.n_virtual, 12);
}

TEST(Selfcheck, DefaultRunPasses) {
  const auto results = run_selfcheck(SelfcheckOptions{});
  ASSERT_FALSE(results.empty());
  for (const auto& c : results) EXPECT_TRUE(c.passed()) << format_check(c);
}

TEST(Selfcheck, InjectedSignErrorFailsOnlyThatBlock) {
  for (const auto& block : jacobian_block_names()) {
    SelfcheckOptions o;
    o.inject_fault = {block};
    for (const auto& c : run_selfcheck(o)) {
      EXPECT_EQ(c.passed(), c.name != block) << block << ": " << format_check(c);
    }
  }
}

TEST(Selfcheck, SeededReportIsStable) {
  SelfcheckOptions o;
  o.seed = 7;
  std::string a, b;
  for (const auto& c : run_selfcheck(o)) a += format_check(c) + "\n";
  for (const auto& c : run_selfcheck(o)) b += format_check(c) + "\n";
  EXPECT_EQ(a, b);
}
