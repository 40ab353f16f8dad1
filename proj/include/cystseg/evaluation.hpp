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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cystseg/error.hpp"
#include "cystseg/image.hpp"
#include "cystseg/manifest.hpp"
#include "cystseg/patchset.hpp"

namespace cystseg {

struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(const Mask& pred, const Mask& gt) {
  if (!pred.same_shape(gt)) fail(Errc::ShapeMismatch, "prediction and ground truth shapes differ");
  ConfusionMatrix c;
  const auto p = pred.pixels(), g = gt.pixels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pp = p[i] != 0, gg = g[i] != 0;
    if (pp && gg) ++c.tp;
    else if (pp) ++c.fp;
    else if (gg) ++c.fn;
    else ++c.tn;
  }
  return c;
}

struct Metrics {
  double dice = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Empty-denominator convention: 1 when prediction and truth are both empty, else 0.
inline Metrics metrics_from_confusion(const ConfusionMatrix& c) {
  const bool pred_empty = c.tp + c.fp == 0;
  const bool gt_empty = c.tp + c.fn == 0;
  const double both_empty = pred_empty && gt_empty ? 1.0 : 0.0;
  Metrics m;
  const double dice_den = 2.0 * c.tp + c.fp + c.fn;
  m.dice = dice_den > 0 ? 2.0 * c.tp / dice_den : both_empty;
  m.precision = !pred_empty ? static_cast<double>(c.tp) / (c.tp + c.fp) : both_empty;
  m.recall = !gt_empty ? static_cast<double>(c.tp) / (c.tp + c.fn) : both_empty;
  return m;
}

inline double harmonic_dice(double precision, double recall) {
  return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

/// Ground-truth definition used to score a volume.
struct GraderRule {
  std::string name;  // "grader1", "grader2", "intersection", "union"
  FusionRule fusion = FusionRule::Single;
  std::optional<std::string> grader;

  static GraderRule parse(const std::string& name) {
    if (name == "intersection") return {name, FusionRule::Intersection, std::nullopt};
    if (name == "union") return {name, FusionRule::Union, std::nullopt};
    if (name.rfind("grader", 0) == 0 && name.size() > 6) return {name, FusionRule::Single, name};
    fail(Errc::InvalidConfig, "unknown grader rule '" + name + "'");
  }

  Mask truth(const MaskSet& masks) const { return fuse_graders(masks, fusion, grader); }
};

inline std::vector<GraderRule> parse_rules(const std::string& csv) {
  std::vector<GraderRule> rules;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) rules.push_back(GraderRule::parse(item));
  if (rules.empty()) fail(Errc::InvalidConfig, "no grader rules given");
  return rules;
}

struct MetricsRow {
  std::string volume_id;
  std::string vendor;
  std::string grader_rule;
  ConfusionMatrix confusion;
  double dice = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double cyst_volume_mm3 = 0.0;
};

struct VolumeEvalInput {
  std::string volume_id;
  Vendor vendor = Vendor::Cirrus;
  std::vector<Mask> predictions;  // one per frame
  std::vector<MaskSet> truth;     // one per frame
  double cyst_volume_mm3 = 0.0;
};

/// One row per (volume, rule); pixels are pooled over all frames of a volume.
inline std::vector<MetricsRow> evaluate_split(std::span<const VolumeEvalInput> volumes, std::span<const GraderRule> rules) {
  std::vector<MetricsRow> rows;
  for (const auto& v : volumes) {
    if (v.predictions.size() != v.truth.size())
      fail(Errc::MissingPrediction, "volume " + v.volume_id + ": prediction count differs from frame count");
    for (const auto& rule : rules) {
      ConfusionMatrix total;
      for (std::size_t f = 0; f < v.truth.size(); ++f) total += confusion(v.predictions[f], rule.truth(v.truth[f]));
      const Metrics m = metrics_from_confusion(total);
      rows.push_back({v.volume_id, std::string(to_string(v.vendor)), rule.name, total, m.dice, m.precision, m.recall,
                      v.cyst_volume_mm3});
    }
  }
  return rows;
}

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;             // sample standard deviation (n - 1)
  bool single_element = false;  // std reported as 0 by convention
};

inline Summary summarize(std::span<const double> values) {
  if (values.empty()) fail(Errc::EmptyGroup, "cannot aggregate an empty group");
  Summary s;
  s.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.n;
  if (s.n == 1) {
    s.single_element = true;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / (s.n - 1));
  return s;
}

struct AggregateRow {
  std::string grader_rule;
  std::string vendor;  // or "overall"
  Summary dice, precision, recall;
};

/// Per (rule, vendor) and per-rule overall summaries, in first-seen order.
inline std::vector<AggregateRow> aggregate(std::span<const MetricsRow> rows) {
  std::vector<std::string> rule_order;
  std::map<std::string, std::vector<std::string>> vendor_order;
  std::map<std::pair<std::string, std::string>, std::vector<const MetricsRow*>> groups;
  for (const auto& r : rows) {
    if (std::find(rule_order.begin(), rule_order.end(), r.grader_rule) == rule_order.end())
      rule_order.push_back(r.grader_rule);
    auto& vo = vendor_order[r.grader_rule];
    if (std::find(vo.begin(), vo.end(), r.vendor) == vo.end()) vo.push_back(r.vendor);
    groups[{r.grader_rule, r.vendor}].push_back(&r);
    groups[{r.grader_rule, "overall"}].push_back(&r);
  }
  auto make = [](const std::string& rule, const std::string& vendor, const std::vector<const MetricsRow*>& g) {
    std::vector<double> d, p, r;
    for (const auto* row : g) {
      d.push_back(row->dice);
      p.push_back(row->precision);
      r.push_back(row->recall);
    }
    return AggregateRow{rule, vendor, summarize(d), summarize(p), summarize(r)};
  };
  std::vector<AggregateRow> out;
  for (const auto& rule : rule_order) {
    for (const auto& vendor : vendor_order[rule]) out.push_back(make(rule, vendor, groups[{rule, vendor}]));
    out.push_back(make(rule, "overall", groups[{rule, "overall"}]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV files

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, std::size_t columns,
                                                      const std::string& expected_header) {
  std::ifstream in(path);
  if (!in) fail(Errc::MissingFile, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(Errc::SchemaError, path.string() + ": empty csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header) fail(Errc::SchemaError, path.string() + ": unexpected csv header '" + line + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != columns) fail(Errc::SchemaError, path.string() + ": wrong column count in '" + line + "'");
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double parse_number(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(Errc::SchemaError, where + ": not a number '" + s + "'");
  }
}

}  // namespace detail

inline constexpr char kMetricsHeader[] =
    "volume_id,vendor,grader_rule,tp,fp,tn,fn,dice,precision,recall,cyst_volume_mm3";

inline std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : rows) {
    out += r.volume_id + "," + r.vendor + "," + r.grader_rule + "," + std::to_string(r.confusion.tp) + "," +
           std::to_string(r.confusion.fp) + "," + std::to_string(r.confusion.tn) + "," +
           std::to_string(r.confusion.fn) + "," + detail::fmt_double(r.dice) + "," + detail::fmt_double(r.precision) +
           "," + detail::fmt_double(r.recall) + "," + detail::fmt_double(r.cyst_volume_mm3) + "\n";
  }
  return out;
}

inline void write_text(const std::string& text, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(Errc::IoError, "short write to " + path.string());
}

inline void write_metrics_csv(std::span<const MetricsRow> rows, const std::filesystem::path& path) {
  write_text(metrics_csv(rows), path);
}

inline std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::vector<MetricsRow> rows;
  const std::string where = path.string();
  for (const auto& c : detail::read_csv(path, 11, kMetricsHeader)) {
    MetricsRow r;
    r.volume_id = c[0];
    r.vendor = c[1];
    r.grader_rule = c[2];
    r.confusion = {static_cast<std::uint64_t>(detail::parse_number(c[3], where)),
                   static_cast<std::uint64_t>(detail::parse_number(c[4], where)),
                   static_cast<std::uint64_t>(detail::parse_number(c[5], where)),
                   static_cast<std::uint64_t>(detail::parse_number(c[6], where))};
    r.dice = detail::parse_number(c[7], where);
    r.precision = detail::parse_number(c[8], where);
    r.recall = detail::parse_number(c[9], where);
    r.cyst_volume_mm3 = detail::parse_number(c[10], where);
    rows.push_back(std::move(r));
  }
  return rows;
}

struct BaselineRow {
  std::string team;
  double mean_dice = 0.0;
  double std = 0.0;
};

inline constexpr char kBaselinesHeader[] = "team,mean_dice,std";

inline std::vector<BaselineRow> read_baselines_csv(const std::filesystem::path& path) {
  std::vector<BaselineRow> rows;
  for (const auto& c : detail::read_csv(path, 3, kBaselinesHeader))
    rows.push_back({c[0], detail::parse_number(c[1], path.string()), detail::parse_number(c[2], path.string())});
  return rows;
}

/// Per-volume tables (one per rule) with per-vendor Mean/Std rows.
inline std::string render_volume_tables(std::span<const MetricsRow> rows) {
  std::string out;
  const auto agg = aggregate(rows);
  std::vector<std::string> rules;
  for (const auto& a : agg)
    if (std::find(rules.begin(), rules.end(), a.grader_rule) == rules.end()) rules.push_back(a.grader_rule);
  if (rules.empty()) {
    out += "Test results\n";
    out += "Volume, Dice Coefficient, Sensitivity/Recall, Precision\n";
    return out;
  }
  for (const auto& rule : rules) {
    out += "Test results (" + rule + ")\n";
    out += "Volume, Dice Coefficient, Sensitivity/Recall, Precision\n";
    for (const auto& a : agg) {
      if (a.grader_rule != rule) continue;
      if (a.vendor != "overall")
        for (const auto& r : rows)
          if (r.grader_rule == rule && r.vendor == a.vendor)
            out += r.volume_id + ", " + detail::fmt_fixed(r.dice) + ", " + detail::fmt_fixed(r.recall) + ", " +
                   detail::fmt_fixed(r.precision) + "\n";
      const std::string label = a.vendor == "overall" ? "Overall" : a.vendor;
      out += label + " Mean, " + detail::fmt_fixed(a.dice.mean) + ", " + detail::fmt_fixed(a.recall.mean) + ", " +
             detail::fmt_fixed(a.precision.mean) + "\n";
      out += label + " Std, " + detail::fmt_fixed(a.dice.std) + ", " + detail::fmt_fixed(a.recall.std) + ", " +
             detail::fmt_fixed(a.precision.std) + (a.dice.single_element ? "  (single volume, std set to 0)" : "") +
             "\n";
    }
    out += "\n";
  }
  return out;
}

inline std::string render_comparison(std::span<const MetricsRow> rows, std::span<const BaselineRow> baselines) {
  std::string out = "Published results (reference values copied from the literature, not computed here)\n";
  out += "Team, Mean Dice Coeff, Std. Deviation\n";
  for (const auto& b : baselines) out += b.team + ", " + detail::fmt_short(b.mean_dice) + ", " + detail::fmt_short(b.std) + "\n";
  out += "\nThis run\n";
  out += "Team, Mean Dice Coeff, Std. Deviation\n";
  for (const auto& a : aggregate(rows))
    if (a.vendor == "overall")
      out += "This run (" + a.grader_rule + "), " + detail::fmt_fixed(a.dice.mean) + ", " +
             detail::fmt_fixed(a.dice.std) + "\n";
  return out;
}

inline constexpr char kSummaryHeader[] =
    "grader_rule,vendor,n,mean_dice,std_dice,mean_recall,std_recall,mean_precision,std_precision,single_volume";

inline std::string summary_csv(std::span<const MetricsRow> rows) {
  std::string out = std::string(kSummaryHeader) + "\n";
  for (const auto& a : aggregate(rows))
    out += a.grader_rule + "," + a.vendor + "," + std::to_string(a.dice.n) + "," + detail::fmt_double(a.dice.mean) + "," +
           detail::fmt_double(a.dice.std) + "," + detail::fmt_double(a.recall.mean) + "," +
           detail::fmt_double(a.recall.std) + "," + detail::fmt_double(a.precision.mean) + "," +
           detail::fmt_double(a.precision.std) + "," + (a.dice.single_element ? "1" : "0") + "\n";
  return out;
}

/// Writes report.txt, summary.csv, and comparison.csv under `out_dir`.
inline void render_report(std::span<const MetricsRow> rows, std::span<const BaselineRow> baselines,
                          const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(render_volume_tables(rows) + render_comparison(rows, baselines), out_dir / "report.txt");
  write_text(summary_csv(rows), out_dir / "summary.csv");
  std::string cmp = "team,mean_dice,std,source\n";
  for (const auto& b : baselines)
    cmp += b.team + "," + detail::fmt_short(b.mean_dice) + "," + detail::fmt_short(b.std) + ",published\n";
  for (const auto& a : aggregate(rows))
    if (a.vendor == "overall")
      cmp += "This run (" + a.grader_rule + ")," + detail::fmt_double(a.dice.mean) + "," +
             detail::fmt_double(a.dice.std) + ",computed\n";
  write_text(cmp, out_dir / "comparison.csv");
}

}  // namespace cystseg
