#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "detector_profiles.hpp"
#include "fixtures.hpp"
#include "lossprobe/analysis.hpp"
#include "lossprobe/perturb.hpp"
#include "lossprobe/rng.hpp"
#include "lossprobe/scoring.hpp"

namespace lossprobe::analysis {
namespace {

using lossprobe::testing::errc_of;

LossTrace trace(std::vector<double> v, std::string scorer = "m") {
  return {std::move(v), "s", std::move(scorer)};
}

TEST(TokenDiff, ElementwiseDifference) {
  const auto d = token_diff(trace({1.0, 2.0}), trace({1.5, 1.0}), {1, 1});
  EXPECT_EQ(d.values, (std::vector<double>{0.5, -1.0}));
  EXPECT_DOUBLE_EQ(global_diff(d), -0.5);
  const auto same = token_diff(trace({3.0, 4.0, 5.0}), trace({3.0, 4.0, 5.0}), {1, 1});
  EXPECT_EQ(same.values, std::vector<double>(3, 0.0));
  EXPECT_EQ(global_diff(same), 0.0);
}

TEST(TokenDiff, Errors) {
  EXPECT_EQ(errc_of([] { token_diff(trace({1.0, 2.0}), trace({1.0}), {1, 0}); }),
            Errc::length_mismatch);
  EXPECT_EQ(errc_of([] { token_diff(trace({1.0}, "a"), trace({1.0}, "b"), {1, 0}); }),
            Errc::scorer_mismatch);
}

TEST(TokenDiff, PrefixZeroAndDecompositionOnToyModel) {
  const auto& fx = lossprobe::testing::toy_fixture();
  scoring::BuiltinNgramScorer scorer(fx.model, "toy");
  Rng rng(3);
  for (const auto& s : fx.heldout) {
    const std::size_t start = rng.uniform_int(1, s.size() - 1);
    const std::size_t len = rng.uniform_int(0, s.size() - start);
    const std::vector<TokenId> noise(len, 64);
    const auto perturbed = inject_tokens(s, {start, len}, noise);
    const auto a = scoring::score_sequence(scorer, s);
    const auto b = scoring::score_sequence(scorer, perturbed);
    const auto d = token_diff(a, b, {start, len});
    for (std::size_t t = 0; t < start; ++t) ASSERT_EQ(d.values[t], 0.0) << t;
    EXPECT_NEAR(global_diff(d), b.total() - a.total(), 1e-9);
  }
}

TEST(MovingAverage, HandComputedAndIdentities) {
  const std::vector<double> spike = {0, 0, 3, 0, 0};
  EXPECT_EQ(moving_average(spike, 3), (std::vector<double>{0, 1, 1, 1, 0}));
  EXPECT_EQ(moving_average(spike, 1), spike);
  const std::vector<double> flat(9, 2.5);
  for (double v : moving_average(flat, 5)) EXPECT_DOUBLE_EQ(v, 2.5);
  EXPECT_TRUE(moving_average(std::vector<double>{}, 3).empty());
}

TEST(MovingAverage, RejectsEvenOrZeroWidth) {
  const std::vector<double> v = {1, 2, 3};
  EXPECT_EQ(errc_of([&] { moving_average(v, 0); }), Errc::invalid_argument);
  EXPECT_EQ(errc_of([&] { moving_average(v, 4); }), Errc::invalid_argument);
}

TEST(MovingAverage, PreservesMeanOfBlockConstantInput) {
  Rng rng(9);
  for (std::size_t w : {1, 3, 5, 7}) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t blocks = rng.uniform_int(1, 8);
      std::vector<double> x;
      for (std::size_t b = 0; b < blocks; ++b) x.insert(x.end(), w, rng.uniform01() * 10 - 5);
      const auto y = moving_average(x, w);
      const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
      const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
      EXPECT_NEAR(mx, my, 1e-12) << "w=" << w << " blocks=" << blocks;
    }
  }
}

TEST(MovingAverage, MonotoneInputStaysMonotone) {
  Rng rng(10);
  std::vector<double> x(100);
  double acc = 0.0;
  for (auto& v : x) v = (acc += rng.uniform01());
  const auto y = moving_average(x, 5);
  for (std::size_t i = 1; i < y.size(); ++i) EXPECT_GE(y[i], y[i - 1]);
}

class DetectorProfileTest : public ::testing::TestWithParam<lossprobe::testing::DetectorProfile> {};

TEST_P(DetectorProfileTest, MatchesHandTrace) {
  const auto& p = GetParam();
  const auto seg = detect_regions(p.values, p.window, p.params);
  EXPECT_EQ(seg.peak, p.peak);
  EXPECT_EQ(seg.assimilation, p.assimilation);
  EXPECT_EQ(seg.recovery, p.recovery);
}

TEST_P(DetectorProfileTest, RegionsAreOrderedAndDisjoint) {
  const auto& p = GetParam();
  const auto seg = detect_regions(p.values, p.window, p.params);
  EXPECT_EQ(seg.peak.start, p.window.start);
  EXPECT_EQ(seg.assimilation.start, seg.peak.end);
  EXPECT_LE(seg.assimilation.end, p.window.end());
  EXPECT_EQ(seg.recovery.start, p.window.end());
  EXPECT_LE(seg.recovery.end, p.values.size());
}

TEST_P(DetectorProfileTest, StableUnderSubToleranceJitter) {
  auto p = GetParam();
  if (p.params.zero_tol < 1e-3) p.params.zero_tol = 1e-3;
  const auto base = detect_regions(p.values, p.window, p.params);
  Rng rng(lossprobe::fnv1a64(p.name));
  for (int trial = 0; trial < 10; ++trial) {
    auto noisy = p.values;
    for (auto& v : noisy) v += (rng.uniform01() - 0.5) * 0.99 * p.params.zero_tol;
    EXPECT_EQ(detect_regions(noisy, p.window, p.params), base);
  }
}

INSTANTIATE_TEST_SUITE_P(HandTraced, DetectorProfileTest,
                         ::testing::ValuesIn(lossprobe::testing::detector_profiles()),
                         [](const auto& info) { return info.param.name; });

TEST(DetectRegions, AllZeroGivesEmptyRegions) {
  const std::vector<double> zeros(40, 0.0);
  const auto seg = detect_regions(zeros, {10, 10}, DetectorParams{});
  EXPECT_TRUE(seg.peak.empty());
  EXPECT_TRUE(seg.assimilation.empty());
  EXPECT_TRUE(seg.recovery.empty());
}

TEST(DetectRegions, NeverReturningDiffRecoversAtSequenceEnd) {
  const auto v = lossprobe::testing::piecewise({{0, 10}, {3, 5}, {-1, 35}});
  const auto seg = detect_regions(v, {10, 20}, DetectorParams{});
  EXPECT_EQ(seg.recovery, (Range{30, 50}));
}

TEST(DetectRegions, Errors) {
  const std::vector<double> v(10, 0.0);
  EXPECT_EQ(errc_of([&] { detect_regions(v, {5, 6}, DetectorParams{}); }),
            Errc::window_out_of_bounds);
  DetectorParams even;
  even.smooth_len = 4;
  EXPECT_EQ(errc_of([&] { detect_regions(v, {5, 1}, even); }), Errc::invalid_argument);
  DetectorParams no_run;
  no_run.run_len = 0;
  EXPECT_EQ(errc_of([&] { detect_regions(v, {5, 1}, no_run); }), Errc::invalid_argument);
  DetectorParams neg_tol;
  neg_tol.zero_tol = -1.0;
  EXPECT_EQ(errc_of([&] { detect_regions(v, {5, 1}, neg_tol); }), Errc::invalid_argument);
}

TEST(DetectRegions, RandomSpikesPeakWithinTwoTokens) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t ws = rng.uniform_int(20, 200);
    const std::size_t wl = rng.uniform_int(10, 150);
    std::vector<double> v(ws + wl + 100, 0.0);
    const std::size_t k = rng.uniform_int(1, 5);
    // A dominant spike: it stays above zero after smoothing.
    const double h = 2.0 + 8.0 * rng.uniform01();
    // Decaying spike, maximum in the first three tokens.
    const std::size_t argmax = rng.uniform_int(0, std::min<std::size_t>(2, k - 1));
    for (std::size_t i = 0; i < k; ++i) {
      v[ws + i] = i == argmax ? h : h * (0.2 + 0.5 * rng.uniform01());
    }
    const double floor = -(0.05 + 0.45 * rng.uniform01());
    for (std::size_t i = ws + k; i < ws + wl; ++i) v[i] = floor;
    const DiffTrace diff{v, {ws, wl}, "a", "b", "m"};
    const auto seg = detect_regions(diff, diff.window, DetectorParams{});
    const auto stats = peak_stats(diff, seg);
    EXPECT_LE(stats.latency, 2u);
    EXPECT_DOUBLE_EQ(stats.height, h);
  }
}

TEST(PeakStats, HeightAndLatency) {
  const auto v = lossprobe::testing::spike_then_dip();
  const PerturbWindow w{10, 23};
  const auto seg = detect_regions(v, w, lossprobe::testing::params(1, 5));
  const auto p = peak_stats(v, w, seg);
  EXPECT_EQ(p.height, 5.0);
  EXPECT_EQ(p.latency, 0u);

  const std::vector<double> late = {0, 1, 7, 2, -1, -1, -1, -1, -1};
  const RegionSegmentation s1{{1, 4}, {4, 9}, {9, 9}};
  EXPECT_EQ(peak_stats(late, {1, 8}, s1).height, 7.0);
  EXPECT_EQ(peak_stats(late, {1, 8}, s1).latency, 1u);

  const std::vector<double> tie = {0, 3, 3, -1};
  const RegionSegmentation s2{{1, 3}, {3, 4}, {4, 4}};
  EXPECT_EQ(peak_stats(tie, {1, 3}, s2).latency, 0u);
}

TEST(PeakStats, UsesRawNotSmoothedValues) {
  const auto v = lossprobe::testing::spike_then_dip();
  const PerturbWindow w{10, 23};
  const auto seg = detect_regions(v, w, lossprobe::testing::params(5, 5));
  EXPECT_EQ(peak_stats(v, w, seg).height, 5.0);
}

TEST(PeakStats, EmptyPeakIsAnError) {
  const std::vector<double> v(20, 0.0);
  const RegionSegmentation empty{{5, 5}, {5, 5}, {10, 10}};
  EXPECT_EQ(errc_of([&] { peak_stats(v, {5, 5}, empty); }), Errc::empty_region);
}

TEST(AnalysisJson, RoundTrips) {
  const RegionSegmentation seg{{1, 3}, {3, 9}, {9, 12}};
  EXPECT_EQ(segmentation_from_json(to_json(seg)), seg);
  DetectorParams p;
  p.smooth_len = 7;
  p.run_len = 2;
  p.zero_tol = 0.25;
  const auto back = detector_params_from_json(to_json(p));
  EXPECT_EQ(back.smooth_len, 7u);
  EXPECT_EQ(back.run_len, 2u);
  EXPECT_EQ(back.zero_tol, 0.25);
  EXPECT_NE(describe_rule(p).find("width 7"), std::string::npos);
}

TEST(DiffCsv, RoundTripIsExact) {
  const std::vector<double> v = {0.0, -1.0 / 3.0, 1e-300, 123456.789, -0.0};
  std::stringstream buf;
  write_diff_csv(buf, v);
  EXPECT_EQ(buf.str().substr(0, 16), "index,delta_nll\n");
  EXPECT_EQ(read_diff_csv(buf), v);
}

TEST(DiffCsv, RejectsMalformedInput) {
  std::istringstream no_header("0,1.0\n");
  EXPECT_EQ(errc_of([&] { read_diff_csv(no_header); }), Errc::parse_error);
  std::istringstream gap("index,delta_nll\n0,1\n2,1\n");
  EXPECT_EQ(errc_of([&] { read_diff_csv(gap); }), Errc::parse_error);
  std::istringstream junk("index,delta_nll\n0,abc\n");
  EXPECT_EQ(errc_of([&] { read_diff_csv(junk); }), Errc::parse_error);
}

TEST(TraceCsv, RoundTripWithCommaInScorerName) {
  const std::vector<LossTrace> traces = {{{0.5, 1.0 / 7.0}, "a", "ngram(order=4,alpha=0.1,V=68)"},
                                         {{2.0}, "b", "ngram(order=4,alpha=0.1,V=68)"}};
  std::stringstream buf;
  write_trace_csv(buf, traces);
  const auto back = read_trace_csv(buf);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].values, traces[i].values);
    EXPECT_EQ(back[i].sequence_id, traces[i].sequence_id);
    EXPECT_EQ(back[i].scorer_id, traces[i].scorer_id);
  }
}

}  // namespace
}  // namespace lossprobe::analysis
