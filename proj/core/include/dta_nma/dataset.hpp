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

#ifndef DTA_NMA_DATASET_HPP
#define DTA_NMA_DATASET_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dta_nma {

/// One (study, test) 2x2-derived record: true positives among the diseased
/// and true negatives among the healthy.
struct StudyArm {
  std::string study_id;
  int test_id = 0;
  std::int64_t tp = 0;
  std::int64_t n_diseased = 0;
  std::int64_t tn = 0;
  std::int64_t n_healthy = 0;
  std::vector<double> covariates;
  std::optional<std::string> stratum;
};

/// An arm with dense study/test indices, as consumed by the models.
struct ObservedArm {
  std::size_t study = 0;
  std::size_t test = 0;
  std::int64_t tp = 0;
  std::int64_t n_diseased = 0;
  std::int64_t tn = 0;
  std::int64_t n_healthy = 0;
};

/// r(i, k) = 1 iff study i reports test k.
class MissingnessMatrix {
 public:
  MissingnessMatrix() = default;
  MissingnessMatrix(std::size_t studies, std::size_t tests)
      : studies_(studies), tests_(tests), cells_(studies * tests, 0) {}

  std::size_t studies() const noexcept { return studies_; }
  std::size_t tests() const noexcept { return tests_; }
  bool operator()(std::size_t i, std::size_t k) const { return cells_[i * tests_ + k] != 0; }
  void set(std::size_t i, std::size_t k, bool value) { cells_[i * tests_ + k] = value ? 1 : 0; }
  std::size_t row_sum(std::size_t i) const;

 private:
  std::size_t studies_ = 0;
  std::size_t tests_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Validated, immutable network of study arms.
///
/// Studies are indexed in order of first appearance; tests are indexed by
/// ascending original label. Reports always map back through test_labels().
class NetworkDataset {
 public:
  NetworkDataset() = default;

  /// Validates every arm invariant and builds the dense indices.
  /// Throws ValidationError naming the first offending arm.
  static NetworkDataset from_arms(std::vector<StudyArm> arms);

  const std::vector<StudyArm>& arms() const noexcept { return arms_; }
  const std::vector<ObservedArm>& observed() const noexcept { return observed_; }

  std::size_t n_studies() const noexcept { return study_labels_.size(); }
  std::size_t n_tests() const noexcept { return test_labels_.size(); }
  std::size_t n_covariates() const noexcept { return n_covariates_; }
  std::size_t n_arms() const noexcept { return arms_.size(); }
  bool empty() const noexcept { return arms_.empty(); }

  const std::vector<std::string>& study_labels() const noexcept { return study_labels_; }
  const std::vector<int>& test_labels() const noexcept { return test_labels_; }

  /// Dense index of an original test label; nullopt if absent.
  std::optional<std::size_t> test_index(int label) const;
  std::optional<std::size_t> study_index(const std::string& label) const;

  /// Study-level covariate vector (length P) for dense study i.
  const std::vector<double>& study_covariates(std::size_t i) const { return study_covariates_[i]; }

  const MissingnessMatrix& missingness() const noexcept { return missingness_; }

 private:
  std::vector<StudyArm> arms_;
  std::vector<ObservedArm> observed_;
  std::vector<std::string> study_labels_;
  std::vector<int> test_labels_;
  std::vector<std::vector<double>> study_covariates_;
  std::size_t n_covariates_ = 0;
  MissingnessMatrix missingness_;
};

/// Parses the arm CSV schema:
///   study_id,test_id,tp,n_diseased,tn,n_healthy[,stratum][,cov_1..cov_P]
/// Lines starting with '#' and blank lines are skipped. When stratum_filter
/// is set only rows with that stratum label are kept.
NetworkDataset parse_dataset(std::istream& in,
                             const std::optional<std::string>& stratum_filter = std::nullopt);
NetworkDataset read_dataset(const std::string& path,
                            const std::optional<std::string>& stratum_filter = std::nullopt);

void write_dataset(std::ostream& out, const NetworkDataset& ds);

/// Test nodes weighted by study count and test pairs weighted by the number
/// of studies reporting both.
class NetworkGraph {
 public:
  NetworkGraph() = default;
  NetworkGraph(std::vector<int> labels, std::vector<int> node_weights,
               std::vector<int> edge_weights);

  std::size_t n_tests() const noexcept { return labels_.size(); }
  const std::vector<int>& labels() const noexcept { return labels_; }
  int node_weight(std::size_t k) const { return nodes_[k]; }
  int edge_weight(std::size_t k, std::size_t l) const { return edges_[k * labels_.size() + l]; }

  struct Edge {
    std::size_t a;
    std::size_t b;
    int weight;
  };
  /// Positive-weight edges with a < b.
  std::vector<Edge> edges() const;

 private:
  std::vector<int> labels_;
  std::vector<int> nodes_;
  std::vector<int> edges_;
};

NetworkGraph build_network(const NetworkDataset& ds);

struct ConnectivityReport {
  bool connected = true;
  std::size_t n_components = 0;
  /// Component id per test; -1 for tests with no studies.
  std::vector<int> component;
};

ConnectivityReport check_connected(const NetworkGraph& g);

/// Keeps the studies that report the baseline test and at least one other
/// test. Returns the reduced dataset and the labels of dropped studies.
std::pair<NetworkDataset, std::vector<std::string>> comparator_subset(const NetworkDataset& ds,
                                                                      int baseline_label);

}  // namespace dta_nma

#endif  // DTA_NMA_DATASET_HPP
