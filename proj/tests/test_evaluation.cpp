// Copyright 2026 The cystseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cystseg/evaluation.hpp"
#include "cystseg/testing/published.hpp"
#include "cystseg/testing/selfcheck.hpp"
#include "support.hpp"

namespace cystseg {
namespace {

Mask mask_from(int h, int w, std::initializer_list<std::pair<int, int>> on) {
  Mask m(h, w);
  for (auto [r, c] : on) m(r, c) = 1;
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Confusion, CountsEachOutcome) {
  const auto pred = mask_from(2, 3, {{0, 0}, {0, 1}, {1, 2}});
  const auto gt = mask_from(2, 3, {{0, 0}, {1, 0}, {1, 2}});
  const auto c = confusion(pred, gt);
  EXPECT_EQ(c, (ConfusionMatrix{2, 1, 2, 1}));
  const auto m = metrics_from_confusion(c);
  EXPECT_DOUBLE_EQ(m.dice, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(m.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, 2.0 / 3.0);
  EXPECT_ERRC(confusion(pred, Mask(3, 2)), Errc::ShapeMismatch);
}

TEST(Confusion, DegenerateCases) {
  const Mask empty(4, 4);
  const auto full = mask_from(4, 4, {{1, 1}});
  auto both = metrics_from_confusion(confusion(empty, empty));
  EXPECT_EQ(both.dice, 1.0);
  EXPECT_EQ(both.precision, 1.0);
  EXPECT_EQ(both.recall, 1.0);
  auto missed = metrics_from_confusion(confusion(empty, full));
  EXPECT_EQ(missed.dice, 0.0);
  EXPECT_EQ(missed.recall, 0.0);
  EXPECT_EQ(missed.precision, 0.0);
  auto spurious = metrics_from_confusion(confusion(full, empty));
  EXPECT_EQ(spurious.dice, 0.0);
  EXPECT_EQ(spurious.precision, 0.0);
  const auto perfect = metrics_from_confusion(confusion(full, full));
  EXPECT_EQ(perfect.dice, 1.0);
}

TEST(Metrics, DiceIsHarmonicMeanOfPrecisionAndRecall) {
  const auto pred = mask_from(5, 5, {{0, 0}, {0, 1}, {2, 2}, {3, 3}, {4, 4}});
  const auto gt = mask_from(5, 5, {{0, 0}, {2, 2}, {1, 1}});
  const auto m = metrics_from_confusion(confusion(pred, gt));
  EXPECT_NEAR(harmonic_dice(m.precision, m.recall), m.dice, 1e-15);
  EXPECT_EQ(harmonic_dice(0.0, 0.0), 0.0);
}

TEST(Metrics, PublishedVolumeRowsAreConsistent) {
  const auto r = selfcheck::metric_identity();
  EXPECT_TRUE(r.ok) << r.detail;
  EXPECT_NEAR(harmonic_dice(0.9982, 0.8018), 0.8893, 5e-5);
  EXPECT_EQ(published::kGrader1.size(), 15u);
}

TEST(Summary, SampleStandardDeviation) {
  const std::vector<double> v{1.0, 2.0, 4.0};
  const auto s = summarize(v);
  EXPECT_EQ(s.n, 3u);
  EXPECT_DOUBLE_EQ(s.mean, 7.0 / 3.0);
  EXPECT_NEAR(s.std, std::sqrt((16.0 / 9 + 1.0 / 9 + 25.0 / 9) / 2.0), 1e-15);
  EXPECT_FALSE(s.single_element);
}

TEST(Summary, SingleElementAndEmpty) {
  const std::vector<double> one{0.7};
  const auto s = summarize(one);
  EXPECT_TRUE(s.single_element);
  EXPECT_EQ(s.std, 0.0);
  EXPECT_ERRC(summarize(std::vector<double>{}), Errc::EmptyGroup);
}

TEST(Summary, PublishedCirrusBlock) {
  const auto r = selfcheck::cirrus_aggregation();
  EXPECT_TRUE(r.ok) << r.detail;
}

VolumeEvalInput two_frame_volume() {
  VolumeEvalInput v;
  v.volume_id = "Topcon_3";
  v.vendor = Vendor::Topcon;
  v.predictions = {mask_from(3, 3, {{0, 0}, {1, 1}}), mask_from(3, 3, {{2, 2}})};
  MaskSet a, b;
  a.graders["grader1"] = mask_from(3, 3, {{0, 0}});
  a.graders["grader2"] = mask_from(3, 3, {{0, 0}, {1, 1}, {0, 1}});
  b.graders["grader1"] = mask_from(3, 3, {{2, 2}, {2, 1}});
  b.graders["grader2"] = mask_from(3, 3, {{2, 2}});
  v.truth = {a, b};
  v.cyst_volume_mm3 = 0.5;
  return v;
}

TEST(EvaluateSplit, PoolsPixelsAcrossFrames) {
  const std::vector<VolumeEvalInput> vols{two_frame_volume()};
  const auto rules = parse_rules("grader1,grader2,intersection,union");
  const auto rows = evaluate_split(vols, rules);
  ASSERT_EQ(rows.size(), 4u);
  // grader1: frame0 tp1 fp1, frame1 tp1 fn1 -> tp2 fp1 fn1 tn14.
  EXPECT_EQ(rows[0].grader_rule, "grader1");
  EXPECT_EQ(rows[0].confusion, (ConfusionMatrix{2, 1, 14, 1}));
  EXPECT_DOUBLE_EQ(rows[0].dice, 4.0 / 6.0);
  // grader2: frame0 tp2 fn1, frame1 tp1 -> tp3 fn1.
  EXPECT_EQ(rows[1].confusion, (ConfusionMatrix{3, 0, 14, 1}));
  // intersection: {00} and {22} -> tp2 fp1.
  EXPECT_EQ(rows[2].confusion, (ConfusionMatrix{2, 1, 15, 0}));
  // union: {00,11,01} and {22,21} -> tp3 fn2.
  EXPECT_EQ(rows[3].confusion, (ConfusionMatrix{3, 0, 13, 2}));
  EXPECT_EQ(rows[3].vendor, "Topcon");
  EXPECT_EQ(rows[3].cyst_volume_mm3, 0.5);
}

TEST(EvaluateSplit, MissingPredictionNamesVolume) {
  auto v = two_frame_volume();
  v.predictions.pop_back();
  const std::vector<VolumeEvalInput> vols{v};
  try {
    evaluate_split(vols, parse_rules("union"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingPrediction);
    EXPECT_NE(std::string(e.what()).find("Topcon_3"), std::string::npos);
  }
}

TEST(Rules, ParseAndReject) {
  const auto r = parse_rules("grader2,,union");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].fusion, FusionRule::Single);
  EXPECT_EQ(*r[0].grader, "grader2");
  EXPECT_EQ(r[1].fusion, FusionRule::Union);
  EXPECT_ERRC(parse_rules("median"), Errc::InvalidConfig);
  EXPECT_ERRC(parse_rules(""), Errc::InvalidConfig);
}

std::vector<MetricsRow> sample_rows() {
  std::vector<MetricsRow> rows;
  const char* vendors[] = {"Cirrus", "Cirrus", "Nidek"};
  const double dice[] = {0.8, 0.6, 0.9};
  for (int i = 0; i < 3; ++i)
    for (const char* rule : {"grader1", "union"}) {
      MetricsRow r;
      r.volume_id = std::string(vendors[i]) + "_" + std::to_string(i + 1);
      r.vendor = vendors[i];
      r.grader_rule = rule;
      r.confusion = {10, 2, 100, 3};
      r.dice = dice[i];
      r.precision = 0.1 * (i + 1);
      r.recall = 1.0 / 3.0;
      r.cyst_volume_mm3 = 0.00123456789;
      rows.push_back(r);
    }
  return rows;
}

TEST(Aggregate, GroupsByRuleAndVendor) {
  const auto rows = sample_rows();
  const auto agg = aggregate(rows);
  ASSERT_EQ(agg.size(), 6u);
  EXPECT_EQ(agg[0].grader_rule, "grader1");
  EXPECT_EQ(agg[0].vendor, "Cirrus");
  EXPECT_DOUBLE_EQ(agg[0].dice.mean, 0.7);
  EXPECT_NEAR(agg[0].dice.std, std::sqrt(0.02), 1e-15);
  EXPECT_EQ(agg[1].vendor, "Nidek");
  EXPECT_TRUE(agg[1].dice.single_element);
  EXPECT_EQ(agg[2].vendor, "overall");
  EXPECT_EQ(agg[2].dice.n, 3u);
  EXPECT_NEAR(agg[2].dice.mean, 2.3 / 3, 1e-15);
  EXPECT_EQ(agg[5].grader_rule, "union");
}

TEST(MetricsCsv, RoundTripsExactly) {
  test::TempDir dir;
  const auto rows = sample_rows();
  write_metrics_csv(rows, dir / "m.csv");
  const auto back = read_metrics_csv(dir / "m.csv");
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].volume_id, rows[i].volume_id);
    EXPECT_EQ(back[i].confusion, rows[i].confusion);
    EXPECT_EQ(back[i].dice, rows[i].dice);
    EXPECT_EQ(back[i].recall, rows[i].recall);
    EXPECT_EQ(back[i].cyst_volume_mm3, rows[i].cyst_volume_mm3);
  }
  EXPECT_EQ(slurp(dir / "m.csv").substr(0, std::string(kMetricsHeader).size()), kMetricsHeader);
}

TEST(MetricsCsv, RejectsBadFiles) {
  test::TempDir dir;
  EXPECT_ERRC(read_metrics_csv(dir / "none.csv"), Errc::MissingFile);
  write_text("volume_id,vendor\n", dir / "bad.csv");
  EXPECT_ERRC(read_metrics_csv(dir / "bad.csv"), Errc::SchemaError);
  write_text(std::string(kMetricsHeader) + "\nv,Cirrus,union,1,2,3,4,abc,0,0,0\n", dir / "num.csv");
  EXPECT_ERRC(read_metrics_csv(dir / "num.csv"), Errc::SchemaError);
}

TEST(Report, WritesTablesAndComparison) {
  test::TempDir dir;
  const auto rows = sample_rows();
  std::vector<BaselineRow> base;
  for (const auto& t : published::kComparison) base.push_back({std::string(t.team), t.mean_dice, t.std_dice});
  render_report(rows, base, dir.path());
  const auto report = slurp(dir / "report.txt");
  EXPECT_NE(report.find("Test results (union)"), std::string::npos);
  EXPECT_NE(report.find("Cirrus_1, 0.8000"), std::string::npos);
  EXPECT_NE(report.find("Nidek Std, 0.0000"), std::string::npos);
  EXPECT_NE(report.find("single volume"), std::string::npos);
  EXPECT_NE(report.find("not computed here"), std::string::npos);
  const auto cmp = slurp(dir / "comparison.csv");
  EXPECT_NE(cmp.find(",published"), std::string::npos);
  EXPECT_NE(cmp.find("This run (union),"), std::string::npos);
  const auto summary = slurp(dir / "summary.csv");
  EXPECT_EQ(summary.substr(0, std::string(kSummaryHeader).size()), kSummaryHeader);
}

TEST(Baselines, BundledFileMatchesPublishedTable) {
  const auto rows = read_baselines_csv(CYSTSEG_SOURCE_DIR "/data/baselines.csv");
  ASSERT_EQ(rows.size(), published::kComparison.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].team, published::kComparison[i].team);
    EXPECT_DOUBLE_EQ(rows[i].mean_dice, published::kComparison[i].mean_dice);
    EXPECT_DOUBLE_EQ(rows[i].std, published::kComparison[i].std_dice);
  }
}

}  // namespace
}  // namespace cystseg
