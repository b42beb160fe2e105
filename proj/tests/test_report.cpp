// Copyright 2026 The dta_nma Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <vector>

#include "dta_nma/errors.hpp"
#include "dta_nma/report.hpp"
#include "support.hpp"

namespace {

using namespace dta_nma;
using support::arm;

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

// Minimal well-formedness check: balanced tags, quoted attributes, no stray '<'.
bool well_formed(const std::string& xml) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool seen_root = false;
  while ((i = xml.find('<', i)) != std::string::npos) {
    const auto end = xml.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = xml.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?') {
      if (tag.back() != '?') return false;
      continue;
    }
    if (tag.find('<') != std::string::npos) return false;
    if (count_of(tag, "\"") % 2 != 0) return false;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
    if (stack.empty()) {
      if (seen_root) return false;
      seen_root = true;
    }
    if (!self_closing) stack.push_back(name);
  }
  return seen_root && stack.empty();
}

bool references_nothing_external(const std::string& svg) {
  std::string rest = svg;
  const std::string ns = "xmlns=\"http://www.w3.org/2000/svg\"";
  const auto pos = rest.find(ns);
  if (pos != std::string::npos) rest.erase(pos, ns.size());
  return rest.find("href") == std::string::npos && rest.find("url(") == std::string::npos &&
         rest.find("http") == std::string::npos && rest.find("@import") == std::string::npos;
}

AccuracySummary summary_for(const std::vector<int>& labels, double shift, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  AccuracyDraws acc;
  for (int d = 0; d < 200; ++d) {
    Eigen::Matrix2Xd a(2, static_cast<Eigen::Index>(labels.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = std::min(0.99, u(rng) + shift);
    acc.push_back(a);
  }
  return summarize_accuracy(acc, labels, labels.front());
}

std::string render_forest(const std::vector<ForestSeries>& s, const std::vector<StudyProportion>& p) {
  std::ostringstream out;
  forest_plot(s, p, out);
  return out.str();
}

std::string render_network(const NetworkGraph& g) {
  std::ostringstream out;
  network_plot(g, out);
  return out.str();
}

TEST(StudyProportions, RawRatios) {
  const auto ds = NetworkDataset::from_arms({arm("a", 4, 3, 4, 9, 10), arm("b", 4, 0, 0, 1, 2)});
  const auto p = study_proportions(ds);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p[0].test, 4);
  EXPECT_DOUBLE_EQ(p[0].value, 0.75);
  EXPECT_DOUBLE_EQ(p[1].value, 0.9);
  EXPECT_EQ(p[2].outcome, 1u);
  EXPECT_DOUBLE_EQ(p[2].value, 0.5);
}

TEST(ForestPlot, OneTestOneStudy) {
  const auto ds = NetworkDataset::from_arms({arm("a", 1, 30, 40, 50, 60)});
  const auto svg = render_forest({{"fit", summary_for({1}, 0.0, 1)}}, study_proportions(ds));
  EXPECT_EQ(count_of(svg, "class=\"study-point\""), 2u);
  EXPECT_EQ(count_of(svg, "class=\"pooled\""), 2u);
  EXPECT_EQ(count_of(svg, "class=\"cri\""), 2u);
  EXPECT_EQ(count_of(svg, "fill=\"#9e9e9e\""), 2u);
  EXPECT_TRUE(well_formed(svg));
  EXPECT_TRUE(references_nothing_external(svg));
}

TEST(ForestPlot, OverlayUsesDistinctColours) {
  const std::vector<int> labels = {1, 2, 3};
  const auto svg =
      render_forest({{"ab", summary_for(labels, 0.0, 2)}, {"cb", summary_for(labels, 0.1, 3)}}, {});
  const std::regex diamond("class=\"pooled\"[^>]*fill=\"([^\"]+)\"");
  std::set<std::string> colours;
  std::size_t n = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), diamond); it != std::sregex_iterator(); ++it) {
    colours.insert((*it)[1]);
    ++n;
  }
  EXPECT_EQ(n, 12u);
  EXPECT_EQ(colours.size(), 2u);
  EXPECT_EQ(count_of(svg, "class=\"legend\""), 2u);
  EXPECT_TRUE(well_formed(svg));
}

TEST(ForestPlot, EmptyStudiesGiveDiamondsOnly) {
  const auto svg = render_forest({{"fit", summary_for({1, 2}, 0.0, 4)}}, {});
  EXPECT_EQ(count_of(svg, "class=\"study-point\""), 0u);
  EXPECT_EQ(count_of(svg, "class=\"pooled\""), 4u);
}

TEST(ForestPlot, SeriesLimitsAndEscaping) {
  const auto s = summary_for({1}, 0.0, 5);
  EXPECT_ANY_THROW(render_forest({}, {}));
  EXPECT_ANY_THROW(render_forest({{"a", s}, {"b", s}, {"c", s}, {"d", s}}, {}));
  const auto svg = render_forest({{"A & <B>", s}}, {});
  EXPECT_NE(svg.find("A &amp; &lt;B&gt;"), std::string::npos);
  EXPECT_TRUE(well_formed(svg));
}

TEST(ForestPlot, WriteFailureIsIoError) {
  EXPECT_THROW(forest_plot({{"fit", summary_for({1}, 0.0, 6)}}, {}, std::filesystem::path("/nonexistent/dir/f.svg")),
               IoError);
}

std::vector<double> node_radii(const std::string& svg) {
  const std::regex node("class=\"node\"[^>]*r=\"([0-9.]+)\"");
  std::vector<double> out;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), node); it != std::sregex_iterator(); ++it) {
    out.push_back(std::stod((*it)[1]));
  }
  return out;
}

TEST(NetworkPlot, TwoTestsOneJointStudy) {
  const auto ds = NetworkDataset::from_arms({arm("a", 1, 1, 2, 1, 2), arm("a", 2, 1, 2, 1, 2)});
  const auto svg = render_network(build_network(ds));
  const auto r = node_radii(svg);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0], r[1]);
  EXPECT_EQ(count_of(svg, "class=\"edge\""), 1u);
  EXPECT_TRUE(well_formed(svg));
  EXPECT_TRUE(references_nothing_external(svg));
}

TEST(NetworkPlot, RadiusScalesWithSquareRootOfCount) {
  const auto ds = NetworkDataset::from_arms({arm("a", 1, 1, 2, 1, 2), arm("a", 2, 1, 2, 1, 2),
                                             arm("b", 1, 1, 2, 1, 2), arm("c", 3, 1, 2, 1, 2)});
  const auto svg = render_network(build_network(ds));
  const auto r = node_radii(svg);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_NEAR(r[0] / r[1], std::sqrt(2.0), 0.01);
  EXPECT_EQ(r[1], r[2]);
  // Test 3 is isolated: one edge only, and it joins tests 1 and 2.
  EXPECT_EQ(count_of(svg, "class=\"edge\""), 1u);
  EXPECT_NE(svg.find(">3</text>"), std::string::npos);
}

TEST(NetworkPlot, StrokeWidthTracksEdgeWeight) {
  const NetworkGraph g({1, 2, 3}, {3, 3, 1}, {0, 2, 1, 2, 0, 0, 1, 0, 0});
  const auto svg = render_network(g);
  const std::regex edge("data-weight=\"([0-9]+)\"[^>]*stroke-width=\"([0-9.]+)\"");
  std::vector<std::pair<int, double>> e;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), edge); it != std::sregex_iterator(); ++it) {
    e.emplace_back(std::stoi((*it)[1]), std::stod((*it)[2]));
  }
  ASSERT_EQ(e.size(), 2u);
  const double per = e[0].second / e[0].first;
  EXPECT_NEAR(e[1].second / e[1].first, per, 0.01);
}

TEST(SummaryCsv, RoundTripExact) {
  std::vector<SummaryRow> rows;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  for (int i = 0; i < 50; ++i) rows.push_back({"ASC-US", i % 4 + 1, "dor", z(rng), z(rng) * 1e-7, z(rng) * 1e6});
  rows.push_back({"x", 2, "superiority_index", std::numeric_limits<double>::infinity(), 0.0,
                  std::numeric_limits<double>::infinity()});
  std::stringstream ss;
  write_summary_csv(ss, rows);
  const auto back = read_summary_csv(ss);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].stratum, rows[i].stratum);
    EXPECT_EQ(back[i].test, rows[i].test);
    EXPECT_EQ(back[i].measure, rows[i].measure);
    if (std::isfinite(rows[i].mean)) {
      EXPECT_NEAR(back[i].mean, rows[i].mean, 1e-9 * std::max(1.0, std::abs(rows[i].mean)));
    } else {
      EXPECT_EQ(back[i].mean, rows[i].mean);
    }
    EXPECT_NEAR(back[i].lower, rows[i].lower, 1e-9 * std::max(1.0, std::abs(rows[i].lower)));
  }
  std::istringstream bad("a,b\n");
  EXPECT_THROW(read_summary_csv(bad), ParseError);
}

TEST(SummaryRows, TableOneShape) {
  const auto s = summary_for({1, 2, 3, 4}, 0.0, 8);
  const auto rows = summary_rows(s, "ASC-US");
  std::map<std::string, std::vector<int>> by_measure;
  for (const auto& r : rows) {
    EXPECT_EQ(r.stratum, "ASC-US");
    by_measure[r.measure].push_back(r.test);
  }
  for (const char* m : {"relative_sensitivity", "relative_specificity", "difference_sensitivity",
                        "difference_specificity"}) {
    EXPECT_EQ(by_measure[m], (std::vector<int>{2, 3, 4})) << m;
  }
  for (const char* m : {"sensitivity", "specificity", "dor", "superiority_index"}) {
    EXPECT_EQ(by_measure[m].size(), 4u) << m;
  }
}

TEST(ResultsJson, EchoesConfigAndBundlesSections) {
  const auto s = summary_for({1, 2}, 0.0, 9);
  ExportContext ctx;
  ctx.stratum = "LSIL";
  ctx.config_json = R"({"model":"ab","seed":12345,"chains":3})";
  auto p = ABParams::zeros(0, 2, 0, 1);
  p.sigma << 1.0, 1.0;
  p.tau.col(0) << 0.5, 0.5;
  ctx.variance = variance_partition({p, p}, {1, 2});
  const auto j = nlohmann::json::parse(results_json(s, ctx));
  EXPECT_EQ(j["config"], nlohmann::json::parse(ctx.config_json));
  EXPECT_EQ(j["stratum"], "LSIL");
  EXPECT_EQ(j["reference"], 1);
  EXPECT_EQ(j["tests"].size(), 2u);
  EXPECT_EQ(j["variance"]["structure"], "cs");
  EXPECT_EQ(j["variance"]["sensitivity"]["percent_formatted"], "80.00 [80.00, 80.00]");
  EXPECT_TRUE(j["diagnostics"].is_null());
}

TEST(ExportResults, WritesBothFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "dta_nma_report_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto s = summary_for({1, 2}, 0.0, 10);
  export_results(s, ExportContext{}, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "results.json"));
  std::ifstream in(dir / "summary.csv");
  EXPECT_EQ(read_summary_csv(in).size(), summary_rows(s, "").size());
  EXPECT_THROW(export_results(s, ExportContext{}, dir / "missing"), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
