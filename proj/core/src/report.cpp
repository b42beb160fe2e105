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


#include "dta_nma/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dta_nma/errors.hpp"

namespace dta_nma {

namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kSeriesColors[] = {"black", "red", "blue"};
constexpr const char* kGrey = "#9e9e9e";

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

ojson num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

ojson summary_json(const Summary& s) { return {{"mean", num(s.mean)}, {"lower", num(s.lower)}, {"upper", num(s.upper)}}; }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  return f;
}

void close_out(std::ofstream& f, const std::filesystem::path& path) {
  f.close();
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

double parse_real(const std::string& field, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(line, "bad number '" + field + "'");
  }
  return v;
}

}  // namespace

std::vector<StudyProportion> study_proportions(const NetworkDataset& ds) {
  std::vector<StudyProportion> out;
  for (const auto& a : ds.arms()) {
    if (a.n_diseased > 0) {
      out.push_back({a.test_id, 0, static_cast<double>(a.tp) / static_cast<double>(a.n_diseased)});
    }
    if (a.n_healthy > 0) {
      out.push_back({a.test_id, 1, static_cast<double>(a.tn) / static_cast<double>(a.n_healthy)});
    }
  }
  return out;
}

void forest_plot(const std::vector<ForestSeries>& series, const std::vector<StudyProportion>& studies,
                 std::ostream& out) {
  if (series.empty() || series.size() > 3) throw DomainError("forest plot takes one to three series");
  if (series.front().summary.tests.empty()) throw DomainError("forest plot needs at least one test");
  std::vector<int> tests;
  for (const auto& t : series.front().summary.tests) tests.push_back(t.test);

  const double left = 60.0, col = 70.0, top = 40.0, panel_h = 220.0, gap = 60.0;
  const double width = left + col * static_cast<double>(tests.size()) + 140.0;
  const double height = top + 2.0 * panel_h + gap + 50.0;
  const double n_series = static_cast<double>(series.size());

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(width) << "\" height=\"" << px(height)
      << "\" viewBox=\"0 0 " << px(width) << ' ' << px(height) << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << px(width) << "\" height=\"" << px(height) << "\" fill=\"white\"/>\n";

  for (std::size_t j = 0; j < 2; ++j) {
    const double y0 = top + static_cast<double>(j) * (panel_h + gap);
    auto y_of = [&](double v) { return y0 + panel_h * (1.0 - std::clamp(v, 0.0, 1.0)); };
    auto x_of = [&](std::size_t k) { return left + col * (static_cast<double>(k) + 0.5); };
    const double x_end = left + col * static_cast<double>(tests.size());

    out << "<g class=\"panel\" id=\"" << (j == 0 ? "sensitivity" : "specificity") << "\">\n";
    out << "<text x=\"" << px(left) << "\" y=\"" << px(y0 - 10) << "\" font-family=\"sans-serif\" font-size=\"13\">"
        << (j == 0 ? "Sensitivity" : "Specificity") << "</text>\n";
    out << "<line class=\"axis\" x1=\"" << px(left) << "\" y1=\"" << px(y0) << "\" x2=\"" << px(left)
        << "\" y2=\"" << px(y0 + panel_h) << "\" stroke=\"#444\"/>\n";
    out << "<line class=\"axis\" x1=\"" << px(left) << "\" y1=\"" << px(y0 + panel_h) << "\" x2=\""
        << px(x_end) << "\" y2=\"" << px(y0 + panel_h) << "\" stroke=\"#444\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double v = 0.25 * t;
      out << "<text x=\"" << px(left - 6) << "\" y=\"" << px(y_of(v) + 4)
          << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << px(v) << "</text>\n";
    }
    for (std::size_t k = 0; k < tests.size(); ++k) {
      out << "<text x=\"" << px(x_of(k)) << "\" y=\"" << px(y0 + panel_h + 16)
          << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << tests[k] << "</text>\n";
    }

    std::vector<std::size_t> seen(tests.size(), 0);
    for (const auto& p : studies) {
      if (p.outcome != j) continue;
      auto it = std::find(tests.begin(), tests.end(), p.test);
      if (it == tests.end()) continue;
      const auto k = static_cast<std::size_t>(it - tests.begin());
      const double phase = std::fmod(static_cast<double>(seen[k]++) * 0.6180339887498949, 1.0);
      const double jitter = (phase - 0.5) * 0.45 * col;
      out << "<circle class=\"study-point\" cx=\"" << px(x_of(k) + jitter) << "\" cy=\"" << px(y_of(p.value))
          << "\" r=\"2.5\" fill=\"" << kGrey << "\" fill-opacity=\"0.8\"/>\n";
    }

    for (std::size_t s = 0; s < series.size(); ++s) {
      const char* color = kSeriesColors[s];
      const double dx = (static_cast<double>(s) - (n_series - 1.0) / 2.0) * 12.0;
      for (const auto& t : series[s].summary.tests) {
        auto it = std::find(tests.begin(), tests.end(), t.test);
        if (it == tests.end()) continue;
        const double x = x_of(static_cast<std::size_t>(it - tests.begin())) + dx;
        const Summary& a = t.accuracy[j];
        out << "<line class=\"cri\" x1=\"" << px(x) << "\" y1=\"" << px(y_of(a.lower)) << "\" x2=\"" << px(x)
            << "\" y2=\"" << px(y_of(a.upper)) << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
        const double y = y_of(a.mean);
        out << "<polygon class=\"pooled\" points=\"" << px(x) << ',' << px(y - 6) << ' ' << px(x + 5) << ','
            << px(y) << ' ' << px(x) << ',' << px(y + 6) << ' ' << px(x - 5) << ',' << px(y)
            << "\" fill=\"" << color << "\"/>\n";
      }
    }
    out << "</g>\n";
  }

  const double lx = left + col * static_cast<double>(tests.size()) + 20.0;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double ly = top + 14.0 * static_cast<double>(s) + 10.0;
    out << "<rect class=\"legend\" x=\"" << px(lx) << "\" y=\"" << px(ly - 8) << "\" width=\"10\" height=\"10\" fill=\""
        << kSeriesColors[s] << "\"/>\n";
    out << "<text x=\"" << px(lx + 14) << "\" y=\"" << px(ly + 1)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(series[s].label) << "</text>\n";
  }
  out << "</svg>\n";
}

void forest_plot(const std::vector<ForestSeries>& series, const std::vector<StudyProportion>& studies,
                 const std::filesystem::path& path) {
  auto f = open_out(path);
  forest_plot(series, studies, f);
  close_out(f, path);
}

void network_plot(const NetworkGraph& g, std::ostream& out) {
  const std::size_t k_tests = g.n_tests();
  if (k_tests == 0) throw DomainError("network plot needs at least one test");
  const double size = 420.0, centre = size / 2.0, ring = 150.0, max_radius = 28.0, max_stroke = 10.0;

  int max_count = 0;
  for (std::size_t k = 0; k < k_tests; ++k) max_count = std::max(max_count, g.node_weight(k));
  const auto edges = g.edges();
  int max_edge = 0;
  for (const auto& e : edges) max_edge = std::max(max_edge, e.weight);

  std::vector<double> x(k_tests), y(k_tests);
  for (std::size_t k = 0; k < k_tests; ++k) {
    if (k_tests == 1) {
      x[k] = centre;
      y[k] = centre;
      continue;
    }
    const double angle = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(k_tests) - M_PI / 2.0;
    x[k] = centre + ring * std::cos(angle);
    y[k] = centre + ring * std::sin(angle);
  }

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(size) << "\" height=\"" << px(size)
      << "\" viewBox=\"0 0 " << px(size) << ' ' << px(size) << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << px(size) << "\" height=\"" << px(size) << "\" fill=\"white\"/>\n";
  for (const auto& e : edges) {
    const double w = max_stroke * static_cast<double>(e.weight) / static_cast<double>(max_edge);
    out << "<line class=\"edge\" data-weight=\"" << e.weight << "\" x1=\"" << px(x[e.a]) << "\" y1=\""
        << px(y[e.a]) << "\" x2=\"" << px(x[e.b]) << "\" y2=\"" << px(y[e.b]) << "\" stroke=\"#5b7fa6\""
        << " stroke-width=\"" << px(w) << "\" stroke-opacity=\"0.7\"/>\n";
  }
  for (std::size_t k = 0; k < k_tests; ++k) {
    const int count = g.node_weight(k);
    const double r =
        max_count > 0 ? max_radius * std::sqrt(static_cast<double>(count) / static_cast<double>(max_count)) : 0.0;
    out << "<circle class=\"node\" data-count=\"" << count << "\" cx=\"" << px(x[k]) << "\" cy=\"" << px(y[k])
        << "\" r=\"" << px(r) << "\" fill=\"#e07b39\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << px(x[k]) << "\" y=\"" << px(y[k] - r - 6)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << g.labels()[k]
        << "</text>\n";
  }
  out << "</svg>\n";
}

void network_plot(const NetworkGraph& g, const std::filesystem::path& path) {
  auto f = open_out(path);
  network_plot(g, f);
  close_out(f, path);
}

std::vector<SummaryRow> summary_rows(const AccuracySummary& s, const std::string& stratum) {
  std::vector<SummaryRow> rows;
  auto add = [&](int test, const char* measure, const Summary& v) {
    rows.push_back({stratum, test, measure, v.mean, v.lower, v.upper});
  };
  const bool ranked = s.tests.size() >= 2;
  for (const auto& t : s.tests) {
    add(t.test, "sensitivity", t.accuracy[0]);
    add(t.test, "specificity", t.accuracy[1]);
    add(t.test, "dor", t.dor);
    if (ranked) {
      rows.push_back({stratum, t.test, "superiority_index", t.superiority.median, t.superiority.lower,
                      t.superiority.upper});
    }
  }
  for (const auto& r : s.relative) {
    if (r.test == r.reference) continue;
    add(r.test, r.outcome == 0 ? "relative_sensitivity" : "relative_specificity", r.ratio);
  }
  for (const auto& r : s.relative) {
    if (r.test == r.reference) continue;
    add(r.test, r.outcome == 0 ? "difference_sensitivity" : "difference_specificity", r.difference);
  }
  return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "stratum,test,measure,mean,lower,upper\n";
  for (const auto& r : rows) {
    out << r.stratum << ',' << r.test << ',' << r.measure << ',' << shortest(r.mean) << ',' << shortest(r.lower)
        << ',' << shortest(r.upper) << '\n';
  }
}

std::vector<SummaryRow> read_summary_csv(std::istream& in) {
  std::vector<SummaryRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (header) {
      if (line != "stratum,test,measure,mean,lower,upper") throw ParseError(line_no, "unexpected summary header");
      header = false;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw ParseError(line_no, "expected 6 fields");
    SummaryRow r;
    r.stratum = f[0];
    r.test = static_cast<int>(parse_real(f[1], line_no));
    r.measure = f[2];
    r.mean = parse_real(f[3], line_no);
    r.lower = parse_real(f[4], line_no);
    r.upper = parse_real(f[5], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string results_json(const AccuracySummary& s, const ExportContext& ctx) {
  ojson j;
  j["stratum"] = ctx.stratum;
  j["reference"] = s.reference;
  auto& tests = j["tests"] = ojson::array();
  for (const auto& t : s.tests) {
    ojson e;
    e["test"] = t.test;
    e["sensitivity"] = summary_json(t.accuracy[0]);
    e["specificity"] = summary_json(t.accuracy[1]);
    e["dor"] = summary_json(t.dor);
    if (s.tests.size() >= 2) {
      e["superiority_index"] = {{"median", num(t.superiority.median)},
                                {"lower", num(t.superiority.lower)},
                                {"upper", num(t.superiority.upper)},
                                {"n_infinite", t.superiority.n_infinite},
                                {"n_undefined", t.superiority.n_undefined}};
    }
    tests.push_back(std::move(e));
  }
  auto& rel = j["relative"] = ojson::array();
  for (const auto& r : s.relative) {
    if (r.test == r.reference) continue;
    rel.push_back({{"test", r.test},
                   {"reference", r.reference},
                   {"outcome", r.outcome == 0 ? "sensitivity" : "specificity"},
                   {"ratio", summary_json(r.ratio)},
                   {"difference", summary_json(r.difference)}});
  }
  if (ctx.variance) {
    const auto& v = *ctx.variance;
    ojson vj;
    vj["structure"] = v.unstructured ? "un" : "cs";
    for (std::size_t o = 0; o < 2; ++o) {
      const auto& ov = v.outcomes[o];
      ojson oj;
      oj["total"] = summary_json(ov.total);
      oj["percent_between_study"] = summary_json(ov.percent);
      oj["total_formatted"] = format_summary(ov.total);
      oj["percent_formatted"] = format_summary(ov.percent);
      if (v.unstructured) {
        auto& by = oj["by_test"] = ojson::array();
        for (std::size_t k = 0; k < ov.total_by_test.size(); ++k) {
          by.push_back({{"test", v.test_labels[k]},
                        {"total", summary_json(ov.total_by_test[k])},
                        {"percent_between_study", summary_json(ov.percent_by_test[k])}});
        }
        auto& ic = oj["intra_study_correlation"] = ojson::array();
        for (std::size_t q = 0; q < ov.intra_correlation.size(); ++q) {
          ic.push_back({{"tests", {v.test_pairs[q].first, v.test_pairs[q].second}},
                        {"value", summary_json(ov.intra_correlation[q])}});
        }
      } else {
        oj["intra_study_correlation"] = summary_json(ov.intra_correlation.front());
      }
      vj[o == 0 ? "sensitivity" : "specificity"] = std::move(oj);
    }
    vj["rho"] = summary_json(v.rho);
    j["variance"] = std::move(vj);
  } else {
    j["variance"] = nullptr;
  }
  j["diagnostics"] = ctx.diagnostics ? ojson::parse(diagnostics_json(*ctx.diagnostics, -1)) : ojson(nullptr);
  j["config"] = ojson::parse(ctx.config_json);
  return j.dump(2);
}

void export_results(const AccuracySummary& s, const ExportContext& ctx, const std::filesystem::path& outdir) {
  if (s.tests.empty()) throw DomainError("nothing to export");
  const auto csv_path = outdir / "summary.csv";
  auto csv = open_out(csv_path);
  write_summary_csv(csv, summary_rows(s, ctx.stratum));
  close_out(csv, csv_path);
  const auto json_path = outdir / "results.json";
  auto js = open_out(json_path);
  js << results_json(s, ctx) << '\n';
  close_out(js, json_path);
}

}  // namespace dta_nma
