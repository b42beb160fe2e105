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

#include "dta_nma/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "dta_nma/errors.hpp"

namespace dta_nma {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      current.push_back(c);
    } else if (c == ',' && !quoted) {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(trim(current));
  return fields;
}

std::int64_t parse_int(const std::string& field, std::size_t line, const char* column) {
  std::int64_t value = 0;
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(line, std::string("column ") + column + ": expected an integer, got '" +
                               field + "'");
  }
  return value;
}

double parse_real(const std::string& field, std::size_t line, const std::string& column) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(line, "column " + column + ": expected a number, got '" + field + "'");
  }
  return value;
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string arm_name(const StudyArm& a) {
  return "study '" + a.study_id + "' test " + std::to_string(a.test_id);
}

void validate_arm(const StudyArm& a) {
  if (a.study_id.empty()) throw ValidationError("arm with empty study_id (test " + std::to_string(a.test_id) + ")");
  if (a.test_id <= 0) throw ValidationError(arm_name(a) + ": test_id must be a positive integer");
  if (a.n_diseased < 0) throw ValidationError(arm_name(a) + ": n_diseased is negative");
  if (a.n_healthy < 0) throw ValidationError(arm_name(a) + ": n_healthy is negative");
  if (a.tp < 0) throw ValidationError(arm_name(a) + ": tp is negative");
  if (a.tn < 0) throw ValidationError(arm_name(a) + ": tn is negative");
  if (a.tp > a.n_diseased) throw ValidationError(arm_name(a) + ": tp exceeds n_diseased");
  if (a.tn > a.n_healthy) throw ValidationError(arm_name(a) + ": tn exceeds n_healthy");
  if (a.n_diseased == 0 && a.n_healthy == 0) {
    throw ValidationError(arm_name(a) + ": n_diseased and n_healthy are both zero");
  }
}

}  // namespace

std::size_t MissingnessMatrix::row_sum(std::size_t i) const {
  std::size_t s = 0;
  for (std::size_t k = 0; k < tests_; ++k) s += cells_[i * tests_ + k];
  return s;
}

NetworkDataset NetworkDataset::from_arms(std::vector<StudyArm> arms) {
  NetworkDataset ds;
  std::map<std::string, std::size_t> study_of;
  std::set<int> labels;
  std::set<std::pair<std::string, int>> seen;
  std::optional<std::size_t> p;

  for (const auto& a : arms) {
    validate_arm(a);
    if (!seen.emplace(a.study_id, a.test_id).second) {
      throw ValidationError("duplicate arm: " + arm_name(a));
    }
    if (!p) p = a.covariates.size();
    if (a.covariates.size() != *p) {
      throw ValidationError(arm_name(a) + ": expected " + std::to_string(*p) + " covariates, got " +
                            std::to_string(a.covariates.size()));
    }
    auto [it, inserted] = study_of.emplace(a.study_id, ds.study_labels_.size());
    if (inserted) {
      ds.study_labels_.push_back(a.study_id);
      ds.study_covariates_.push_back(a.covariates);
    } else if (ds.study_covariates_[it->second] != a.covariates) {
      throw ValidationError(arm_name(a) + ": covariates differ from other arms of the same study");
    }
    labels.insert(a.test_id);
  }

  ds.n_covariates_ = p.value_or(0);
  ds.test_labels_.assign(labels.begin(), labels.end());
  ds.missingness_ = MissingnessMatrix(ds.study_labels_.size(), ds.test_labels_.size());
  ds.observed_.reserve(arms.size());
  for (const auto& a : arms) {
    ObservedArm o;
    o.study = study_of.at(a.study_id);
    o.test = static_cast<std::size_t>(
        std::lower_bound(ds.test_labels_.begin(), ds.test_labels_.end(), a.test_id) -
        ds.test_labels_.begin());
    o.tp = a.tp;
    o.n_diseased = a.n_diseased;
    o.tn = a.tn;
    o.n_healthy = a.n_healthy;
    ds.missingness_.set(o.study, o.test, true);
    ds.observed_.push_back(o);
  }
  ds.arms_ = std::move(arms);
  return ds;
}

std::optional<std::size_t> NetworkDataset::test_index(int label) const {
  auto it = std::lower_bound(test_labels_.begin(), test_labels_.end(), label);
  if (it == test_labels_.end() || *it != label) return std::nullopt;
  return static_cast<std::size_t>(it - test_labels_.begin());
}

std::optional<std::size_t> NetworkDataset::study_index(const std::string& label) const {
  auto it = std::find(study_labels_.begin(), study_labels_.end(), label);
  if (it == study_labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - study_labels_.begin());
}

NetworkDataset parse_dataset(std::istream& in, const std::optional<std::string>& stratum_filter) {
  static const char* kRequired[] = {"study_id", "test_id", "tp", "n_diseased", "tn", "n_healthy"};

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    header = split_fields(line);
    break;
  }
  if (header.empty()) throw ParseError(line_no == 0 ? 1 : line_no, "missing header row");

  std::map<std::string, std::size_t> column;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!column.emplace(header[c], c).second) {
      throw ParseError(line_no, "duplicate column '" + header[c] + "'");
    }
  }
  for (const char* name : kRequired) {
    if (!column.count(name)) throw ParseError(line_no, std::string("missing required column '") + name + "'");
  }
  std::vector<std::size_t> cov_columns;
  for (std::size_t p = 1;; ++p) {
    auto it = column.find("cov_" + std::to_string(p));
    if (it == column.end()) break;
    cov_columns.push_back(it->second);
  }
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    const bool known = std::find(std::begin(kRequired), std::end(kRequired), h) != std::end(kRequired) ||
                       h == "stratum" ||
                       std::find(cov_columns.begin(), cov_columns.end(), c) != cov_columns.end();
    if (!known) throw ParseError(line_no, "unexpected column '" + h + "'");
  }
  const std::optional<std::size_t> stratum_col =
      column.count("stratum") ? std::optional<std::size_t>(column.at("stratum")) : std::nullopt;

  std::vector<StudyArm> arms;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto f = split_fields(line);
    if (f.size() != header.size()) {
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                    std::to_string(f.size()));
    }
    StudyArm a;
    a.study_id = f[column.at("study_id")];
    if (a.study_id.empty()) throw ParseError(line_no, "empty study_id");
    const std::int64_t test = parse_int(f[column.at("test_id")], line_no, "test_id");
    if (test > std::numeric_limits<int>::max() || test < std::numeric_limits<int>::min()) {
      throw ParseError(line_no, "test_id out of range");
    }
    a.test_id = static_cast<int>(test);
    a.tp = parse_int(f[column.at("tp")], line_no, "tp");
    a.n_diseased = parse_int(f[column.at("n_diseased")], line_no, "n_diseased");
    a.tn = parse_int(f[column.at("tn")], line_no, "tn");
    a.n_healthy = parse_int(f[column.at("n_healthy")], line_no, "n_healthy");
    for (std::size_t p = 0; p < cov_columns.size(); ++p) {
      a.covariates.push_back(parse_real(f[cov_columns[p]], line_no, header[cov_columns[p]]));
    }
    if (stratum_col) a.stratum = f[*stratum_col];
    if (stratum_filter && a.stratum.value_or("") != *stratum_filter) continue;
    arms.push_back(std::move(a));
  }
  return NetworkDataset::from_arms(std::move(arms));
}

NetworkDataset read_dataset(const std::string& path, const std::optional<std::string>& stratum_filter) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return parse_dataset(in, stratum_filter);
}

void write_dataset(std::ostream& out, const NetworkDataset& ds) {
  const bool has_stratum = std::any_of(ds.arms().begin(), ds.arms().end(),
                                       [](const StudyArm& a) { return a.stratum.has_value(); });
  out << "study_id,test_id,tp,n_diseased,tn,n_healthy";
  if (has_stratum) out << ",stratum";
  for (std::size_t p = 0; p < ds.n_covariates(); ++p) out << ",cov_" << (p + 1);
  out << '\n';
  for (const auto& a : ds.arms()) {
    out << a.study_id << ',' << a.test_id << ',' << a.tp << ',' << a.n_diseased << ',' << a.tn
        << ',' << a.n_healthy;
    if (has_stratum) out << ',' << a.stratum.value_or("");
    for (double x : a.covariates) out << ',' << format_real(x);
    out << '\n';
  }
}

NetworkGraph::NetworkGraph(std::vector<int> labels, std::vector<int> node_weights,
                           std::vector<int> edge_weights)
    : labels_(std::move(labels)), nodes_(std::move(node_weights)), edges_(std::move(edge_weights)) {}

std::vector<NetworkGraph::Edge> NetworkGraph::edges() const {
  std::vector<Edge> out;
  const std::size_t k = labels_.size();
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      if (edge_weight(a, b) > 0) out.push_back({a, b, edge_weight(a, b)});
    }
  }
  return out;
}

NetworkGraph build_network(const NetworkDataset& ds) {
  const auto& r = ds.missingness();
  const std::size_t k = ds.n_tests();
  std::vector<int> nodes(k, 0);
  std::vector<int> edges(k * k, 0);
  for (std::size_t i = 0; i < ds.n_studies(); ++i) {
    for (std::size_t a = 0; a < k; ++a) {
      if (!r(i, a)) continue;
      ++nodes[a];
      for (std::size_t b = a + 1; b < k; ++b) {
        if (r(i, b)) {
          ++edges[a * k + b];
          ++edges[b * k + a];
        }
      }
    }
  }
  return NetworkGraph(ds.test_labels(), std::move(nodes), std::move(edges));
}

ConnectivityReport check_connected(const NetworkGraph& g) {
  const std::size_t k = g.n_tests();
  ConnectivityReport rep;
  rep.component.assign(k, -1);
  int next = 0;
  for (std::size_t s = 0; s < k; ++s) {
    if (g.node_weight(s) == 0 || rep.component[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    rep.component[s] = next;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < k; ++b) {
        if (b != a && g.edge_weight(a, b) > 0 && rep.component[b] < 0) {
          rep.component[b] = next;
          stack.push_back(b);
        }
      }
    }
    ++next;
  }
  rep.n_components = static_cast<std::size_t>(next);
  rep.connected = next <= 1;
  return rep;
}

std::pair<NetworkDataset, std::vector<std::string>> comparator_subset(const NetworkDataset& ds,
                                                                      int baseline_label) {
  const auto base = ds.test_index(baseline_label);
  std::vector<bool> keep(ds.n_studies(), false);
  std::vector<std::string> dropped;
  for (std::size_t i = 0; i < ds.n_studies(); ++i) {
    keep[i] = base && ds.missingness()(i, *base) && ds.missingness().row_sum(i) >= 2;
    if (!keep[i]) dropped.push_back(ds.study_labels()[i]);
  }
  std::vector<StudyArm> arms;
  for (std::size_t a = 0; a < ds.arms().size(); ++a) {
    if (keep[ds.observed()[a].study]) arms.push_back(ds.arms()[a]);
  }
  return {NetworkDataset::from_arms(std::move(arms)), std::move(dropped)};
}

}  // namespace dta_nma
