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


#ifndef DTA_NMA_REPORT_HPP
#define DTA_NMA_REPORT_HPP

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dta_nma/dataset.hpp"
#include "dta_nma/posterior.hpp"
#include "dta_nma/sampler.hpp"

namespace dta_nma {

/// Raw study-level proportion tp/n_diseased (outcome 0) or tn/n_healthy (outcome 1).
struct StudyProportion {
  int test = 0;
  std::size_t outcome = 0;
  double value = 0.0;
};

/// Arms with a zero denominator contribute no point for that outcome.
std::vector<StudyProportion> study_proportions(const NetworkDataset& ds);

struct ForestSeries {
  std::string label;
  AccuracySummary summary;
};

/// Two panels (sensitivity over specificity). At most three series, drawn
/// in black, red and blue. Tests follow the first series.
void forest_plot(const std::vector<ForestSeries>& series, const std::vector<StudyProportion>& studies,
                 std::ostream& out);
void forest_plot(const std::vector<ForestSeries>& series, const std::vector<StudyProportion>& studies,
                 const std::filesystem::path& path);

/// Nodes on a circle with area proportional to study count, edges with
/// stroke width proportional to direct-comparison count.
void network_plot(const NetworkGraph& g, std::ostream& out);
void network_plot(const NetworkGraph& g, const std::filesystem::path& path);

struct SummaryRow {
  std::string stratum;
  int test = 0;
  std::string measure;
  double mean = 0.0;  // median for superiority_index
  double lower = 0.0;
  double upper = 0.0;
};

std::vector<SummaryRow> summary_rows(const AccuracySummary& s, const std::string& stratum);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(std::istream& in);

struct ExportContext {
  std::string stratum;
  /// JSON text echoed verbatim under "config".
  std::string config_json = "{}";
  std::optional<VarianceReport> variance;
  std::optional<Diagnostics> diagnostics;
};

std::string results_json(const AccuracySummary& s, const ExportContext& ctx);

/// Writes summary.csv and results.json into `outdir`.
void export_results(const AccuracySummary& s, const ExportContext& ctx, const std::filesystem::path& outdir);

}  // namespace dta_nma

#endif  // DTA_NMA_REPORT_HPP
