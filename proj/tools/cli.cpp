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


#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dta_nma/ab_model.hpp"
#include "dta_nma/cb_model.hpp"
#include "dta_nma/dataset.hpp"
#include "dta_nma/errors.hpp"
#include "dta_nma/posterior.hpp"
#include "dta_nma/report.hpp"
#include "dta_nma/sampler.hpp"
#include "dta_nma/simulate.hpp"

namespace dta_nma::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string data;
  std::optional<std::string> stratum;
  std::string draws;
  std::string truth;
  std::vector<std::string> summaries;
  std::vector<std::string> labels;
  std::string outdir = ".";
  std::string model = "ab";
  std::string covariance = "cs";
  std::string prior = "eq14";
  int chains = 3;
  int warmup = 1000;
  int samples = 1000;
  int thin = 1;
  int max_depth = 10;
  double target_accept = 0.8;
  std::uint64_t seed = 20260101;
  std::optional<int> baseline;
  std::optional<int> reference;
  std::optional<double> fixed_tau;
  std::optional<double> keep_prob;
  int mc_samples = 1000;
  double tie_tol = 0.0;
  bool serial = false;
};

ojson to_json(const RunConfig& c) {
  ojson j;
  j["command"] = c.command;
  auto opt = [](const auto& o) -> ojson {
    if (o) return *o;
    return nullptr;
  };
  if (c.command == "fit") {
    j["data"] = c.data;
    j["stratum"] = opt(c.stratum);
    j["model"] = c.model;
    j["covariance"] = c.covariance;
    j["prior"] = c.prior;
    j["chains"] = c.chains;
    j["warmup"] = c.warmup;
    j["samples"] = c.samples;
    j["thin"] = c.thin;
    j["max_depth"] = c.max_depth;
    j["target_accept"] = c.target_accept;
    j["seed"] = c.seed;
    j["baseline"] = opt(c.baseline);
    j["reference"] = opt(c.reference);
    j["fixed_tau"] = opt(c.fixed_tau);
    j["mc_samples"] = c.mc_samples;
    j["tie_tol"] = c.tie_tol;
  }
  return j;
}

void apply_json(RunConfig& c, const ojson& j) {
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  static const std::map<std::string, std::function<void(RunConfig&, const ojson&)>> setters = {
      {"data", [](RunConfig& r, const ojson& v) { r.data = v.get<std::string>(); }},
      {"stratum", [](RunConfig& r, const ojson& v) { r.stratum = v.get<std::string>(); }},
      {"draws", [](RunConfig& r, const ojson& v) { r.draws = v.get<std::string>(); }},
      {"truth", [](RunConfig& r, const ojson& v) { r.truth = v.get<std::string>(); }},
      {"outdir", [](RunConfig& r, const ojson& v) { r.outdir = v.get<std::string>(); }},
      {"model", [](RunConfig& r, const ojson& v) { r.model = v.get<std::string>(); }},
      {"covariance", [](RunConfig& r, const ojson& v) { r.covariance = v.get<std::string>(); }},
      {"prior", [](RunConfig& r, const ojson& v) { r.prior = v.get<std::string>(); }},
      {"chains", [](RunConfig& r, const ojson& v) { r.chains = v.get<int>(); }},
      {"warmup", [](RunConfig& r, const ojson& v) { r.warmup = v.get<int>(); }},
      {"samples", [](RunConfig& r, const ojson& v) { r.samples = v.get<int>(); }},
      {"thin", [](RunConfig& r, const ojson& v) { r.thin = v.get<int>(); }},
      {"max_depth", [](RunConfig& r, const ojson& v) { r.max_depth = v.get<int>(); }},
      {"target_accept", [](RunConfig& r, const ojson& v) { r.target_accept = v.get<double>(); }},
      {"seed", [](RunConfig& r, const ojson& v) { r.seed = v.get<std::uint64_t>(); }},
      {"baseline", [](RunConfig& r, const ojson& v) { r.baseline = v.get<int>(); }},
      {"reference", [](RunConfig& r, const ojson& v) { r.reference = v.get<int>(); }},
      {"fixed_tau", [](RunConfig& r, const ojson& v) { r.fixed_tau = v.get<double>(); }},
      {"keep_prob", [](RunConfig& r, const ojson& v) { r.keep_prob = v.get<double>(); }},
      {"mc_samples", [](RunConfig& r, const ojson& v) { r.mc_samples = v.get<int>(); }},
      {"tie_tol", [](RunConfig& r, const ojson& v) { r.tie_tol = v.get<double>(); }},
      {"serial", [](RunConfig& r, const ojson& v) { r.serial = v.get<bool>(); }},
  };
  for (const auto& [key, value] : j.items()) {
    if (value.is_null()) continue;
    auto it = setters.find(key);
    if (it == setters.end()) throw UsageError("unknown config key '" + key + "'");
    try {
      it->second(c, value);
    } catch (const nlohmann::json::exception&) {
      throw UsageError("config key '" + key + "' has the wrong type");
    }
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write '" + p.string() + "'");
  return f;
}

// Flag values land here; only flags actually given are copied over the
// config assembled from defaults, environment and config file.
struct Flags {
  RunConfig values;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> bound;

  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& name, T RunConfig::*field, const std::string& help) {
    auto* opt = app->add_option(name, values.*field, help);
    bound.emplace_back(opt, [this, field](RunConfig& c) { c.*field = values.*field; });
    return opt;
  }

  CLI::Option* add_flag(CLI::App* app, const std::string& name, bool RunConfig::*field, const std::string& help) {
    auto* opt = app->add_flag(name, values.*field, help);
    bound.emplace_back(opt, [this, field](RunConfig& c) { c.*field = values.*field; });
    return opt;
  }

  void apply(RunConfig& c) const {
    for (const auto& [opt, set] : bound) {
      if (opt->count() > 0) set(c);
    }
  }
};

void add_sampler_flags(CLI::App* app, Flags& f) {
  f.add(app, "--chains", &RunConfig::chains, "number of chains");
  f.add(app, "--warmup", &RunConfig::warmup, "warmup iterations per chain");
  f.add(app, "--samples", &RunConfig::samples, "post-warmup iterations per chain");
  f.add(app, "--thin", &RunConfig::thin, "keep every n-th draw");
  f.add(app, "--max-depth", &RunConfig::max_depth, "maximum tree depth");
  f.add(app, "--target-accept", &RunConfig::target_accept, "target acceptance statistic");
  f.add(app, "--seed", &RunConfig::seed, "random seed");
  f.add_flag(app, "--serial", &RunConfig::serial, "run chains one after another");
}

SamplerConfig sampler_config(const RunConfig& c) {
  SamplerConfig s;
  s.n_chains = c.chains;
  s.n_warmup = c.warmup;
  s.n_samples = c.samples;
  s.thin = c.thin;
  s.max_tree_depth = c.max_depth;
  s.target_accept = c.target_accept;
  s.seed = c.seed;
  s.parallel = !c.serial;
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  return s;
}

void require(bool cond, const std::string& what) {
  if (!cond) throw UsageError(what);
}

bool usable_for_diagnostics(const Draws& d) { return d.n_chains() >= 2 && d.draws_per_chain() >= 4; }

std::string diagnostics_text(const Draws& d) {
  if (usable_for_diagnostics(d)) return diagnostics_json(diagnostics(d));
  ojson j;
  j["all_rhat_ok"] = false;
  j["error"] = "diagnostics need at least 2 chains and 4 draws per chain";
  j["divergences"] = d.divergences();
  return j.dump(2);
}

void write_text(const fs::path& p, const std::string& text) {
  auto f = open_out(p);
  f << text << '\n';
  if (!f) throw IoError("failed writing '" + p.string() + "'");
}

int cmd_fit(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require(!c.data.empty(), "fit requires --data");
  require(c.model == "ab" || c.model == "cb", "--model must be ab or cb");
  require(c.covariance == "cs" || c.covariance == "un", "--covariance must be cs or un");
  require(c.prior == "eq14" || c.prior == "eq15" || c.prior == "lkj1" || c.prior == "lkj2",
          "--prior must be one of eq14, eq15, lkj1, lkj2");
  require(c.model != "cb" || c.baseline.has_value(), "--model cb requires --baseline");
  require(c.mc_samples >= 1, "--mc-samples must be >= 1");
  require(c.tie_tol >= 0.0, "--tie-tol must be >= 0");
  const SamplerConfig sc = sampler_config(c);
  const PriorSpec priors = PriorSpec::from_preset(c.prior);

  NetworkDataset ds = read_dataset(c.data, c.stratum);
  if (ds.empty()) throw ValidationError("no arms selected from '" + c.data + "'");
  require(c.covariance != "un" || ds.n_tests() >= 2, "--covariance un requires at least two tests");

  const fs::path outdir(c.outdir);
  fs::create_directories(outdir);

  Draws draws;
  AccuracyDraws acc;
  std::optional<VarianceReport> variance;
  std::vector<int> labels;
  int reference = 0;

  if (c.model == "ab") {
    CovarianceSpec cov;
    cov.structure = c.covariance == "un" ? CovarianceStructure::unstructured : CovarianceStructure::compound_symmetry;
    cov.fixed_tau = c.fixed_tau;
    const ABModel model(ds, priors, cov);
    draws = run_chains([&model](std::span<const double> u, std::span<double> g) { return model.log_density_gradient(u, g); },
                       model.dim(), sc);
    draws.attach_constrained(model.parameter_names(), [&model](std::span<const double> u) {
      return model.flatten(model.to_constrained(u));
    });
    const auto params = ab_parameter_draws(model, draws);
    MarginalOptions mo;
    mo.mc_samples = c.mc_samples;
    mo.seed = c.seed;
    acc = marginal_accuracy(params, mo);
    labels = ds.test_labels();
    if (params.size() >= 2) variance = variance_partition(params, labels);
    reference = c.reference.value_or(labels.front());
  } else {
    auto [subset, dropped] = comparator_subset(ds, *c.baseline);
    if (!dropped.empty()) {
      out << "dropped " << dropped.size() << " studies without the baseline test:";
      for (const auto& s : dropped) out << ' ' << s;
      out << '\n';
    }
    const CBModel model(std::move(subset), *c.baseline, priors);
    draws = run_chains([&model](std::span<const double> u, std::span<double> g) { return model.log_density_gradient(u, g); },
                       model.dim(), sc);
    draws.attach_constrained(model.parameter_names(), [&model](std::span<const double> u) {
      return model.flatten(model.to_constrained(u));
    });
    acc = cb_accuracy_draws(model, draws);
    labels = model.data().test_labels();
    reference = c.reference.value_or(*c.baseline);
  }
  require(std::find(labels.begin(), labels.end(), reference) != labels.end(),
          "--reference " + std::to_string(reference) + " is not a test in the data");

  {
    auto f = open_out(outdir / "draws.csv");
    write_draws_csv(f, draws);
    if (!f) throw IoError("failed writing draws.csv");
  }
  write_text(outdir / "diagnostics.json", diagnostics_text(draws));

  ExportContext ctx;
  ctx.stratum = c.stratum.value_or("");
  ctx.config_json = to_json(c).dump();
  ctx.variance = variance;
  if (usable_for_diagnostics(draws)) ctx.diagnostics = diagnostics(draws);
  if (acc.size() >= 2) {
    export_results(summarize_accuracy(acc, labels, reference, c.tie_tol), ctx, outdir);
  } else {
    err << "warning: fewer than two draws; summary.csv and results.json not written\n";
  }

  out << "draws: " << draws.n_chains() << " chains x " << draws.draws_per_chain() << '\n';
  out << "divergences: " << draws.divergences() << '\n';
  if (ctx.diagnostics) {
    out << "max_rhat: " << ctx.diagnostics->max_rhat << '\n';
    out << "all_rhat_ok: " << (ctx.diagnostics->all_rhat_ok ? "true" : "false") << '\n';
    if (!ctx.diagnostics->all_rhat_ok) err << "warning: some R-hat values exceed 1.1\n";
  }
  out << "wrote " << (outdir / "draws.csv").string() << '\n';
  return kExitOk;
}

Draws load_draws(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read '" + path + "'");
  return read_draws_csv(f);
}

// Rebuilds per-draw accuracies from a draws CSV written by fit.
std::pair<AccuracyDraws, std::vector<int>> accuracy_from_draws(const Draws& d, const RunConfig& c) {
  const auto& names = d.names;
  auto has = [&names](const std::string& n) { return std::find(names.begin(), names.end(), n) != names.end(); };
  auto label_of = [](const std::string& name, const std::string& prefix) {
    return std::stoi(name.substr(prefix.size(), name.size() - prefix.size() - 1));
  };
  AccuracyDraws acc;
  std::vector<int> labels;
  if (has("sigma[sens]")) {
    for (const auto& n : names) {
      if (n.rfind("mu[sens,", 0) == 0) labels.push_back(label_of(n, "mu[sens,"));
    }
    const bool per_test_tau = !has("tau[sens]");
    const std::size_t k_tests = labels.size();
    std::vector<ABParams> params;
    for (const auto& m : d.constrained) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        ABParams p = ABParams::zeros(0, k_tests, 0, per_test_tau ? k_tests : 1);
        auto at = [&](const std::string& n) { return m(r, static_cast<Eigen::Index>(d.column_index(n))); };
        for (std::size_t j = 0; j < 2; ++j) {
          const std::string o = kOutcomeNames[j];
          p.sigma(j) = at("sigma[" + o + "]");
          for (std::size_t k = 0; k < k_tests; ++k) {
            const std::string lab = std::to_string(labels[k]);
            p.mu(j, k) = at("mu[" + o + "," + lab + "]");
            if (per_test_tau) p.tau(j, k) = at("tau[" + o + "," + lab + "]");
          }
          if (!per_test_tau) p.tau(j, 0) = at("tau[" + o + "]");
        }
        p.rho = at("rho");
        params.push_back(std::move(p));
      }
    }
    MarginalOptions mo;
    mo.mc_samples = c.mc_samples;
    mo.seed = c.seed;
    acc = marginal_accuracy(params, mo);
  } else if (has("m[sens]")) {
    require(c.baseline.has_value(), "ranking CB draws requires --baseline");
    std::vector<int> order;
    for (const auto& n : names) {
      if (n.rfind("nu[sens,", 0) == 0) order.push_back(label_of(n, "nu[sens,"));
    }
    order.push_back(*c.baseline);
    labels = order;
    std::sort(labels.begin(), labels.end());
    for (const auto& m : d.constrained) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto at = [&](const std::string& n) { return m(r, static_cast<Eigen::Index>(d.column_index(n))); };
        Eigen::Vector2d mm;
        Eigen::Matrix2Xd nu(2, static_cast<Eigen::Index>(order.size() - 1));
        for (std::size_t j = 0; j < 2; ++j) {
          const std::string o = kOutcomeNames[j];
          mm(j) = at("m[" + o + "]");
          for (std::size_t q = 0; q + 1 < order.size(); ++q) nu(j, q) = at("nu[" + o + "," + std::to_string(order[q]) + "]");
        }
        const Eigen::Matrix2Xd rec = recover_accuracy_cb(mm, nu);
        Eigen::Matrix2Xd a(2, rec.cols());
        for (std::size_t q = 0; q < order.size(); ++q) {
          const auto dest = std::find(labels.begin(), labels.end(), order[q]) - labels.begin();
          a.col(dest) = rec.col(q);
        }
        acc.push_back(std::move(a));
      }
    }
  } else {
    throw ValidationError("draws file holds neither AB nor CB parameters");
  }
  return {std::move(acc), std::move(labels)};
}

std::string real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

int cmd_rank(const RunConfig& c, std::ostream& out) {
  require(!c.draws.empty(), "rank requires --draws");
  require(c.tie_tol >= 0.0, "--tie-tol must be >= 0");
  require(c.mc_samples >= 1, "--mc-samples must be >= 1");
  const Draws d = load_draws(c.draws);
  auto [acc, labels] = accuracy_from_draws(d, c);
  require(labels.size() >= 2, "ranking needs at least two tests");
  const auto sup = superiority_index(acc, c.tie_tol);

  const fs::path outdir(c.outdir);
  fs::create_directories(outdir);
  auto f = open_out(outdir / "ranking.csv");
  f << "test,measure,estimate,lower,upper,n_infinite,n_undefined\n";
  for (std::size_t k = 0; k < labels.size(); ++k) {
    std::vector<double> v;
    for (const auto& a : acc) v.push_back(dor(a(0, k), a(1, k)));
    const Summary s = summarize(v);
    f << labels[k] << ",dor," << real(s.mean) << ',' << real(s.lower) << ',' << real(s.upper) << ",0,0\n";
  }
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const auto& s = sup[k];
    f << labels[k] << ",superiority_index," << real(s.median) << ',' << real(s.lower) << ',' << real(s.upper)
      << ',' << s.n_infinite << ',' << s.n_undefined << '\n';
  }
  if (!f) throw IoError("failed writing ranking.csv");
  out << "wrote " << (outdir / "ranking.csv").string() << '\n';
  return kExitOk;
}

int cmd_diagnose(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require(!c.draws.empty(), "diagnose requires --draws");
  require(c.thin >= 1, "--thin must be >= 1");
  Draws d = load_draws(c.draws);
  if (c.thin > 1) d = thin_draws(d, c.thin);
  const Diagnostics diag = diagnostics(d);
  const fs::path outdir(c.outdir);
  fs::create_directories(outdir);
  write_text(outdir / "diagnostics.json", diagnostics_json(diag));
  out << "draws: " << d.n_chains() << " chains x " << d.draws_per_chain() << '\n';
  out << "divergences: " << diag.divergences << '\n';
  out << "max_rhat: " << diag.max_rhat << '\n';
  out << "all_rhat_ok: " << (diag.all_rhat_ok ? "true" : "false") << '\n';
  for (const auto& p : diag.parameters) {
    if (p.rhat > 1.1) err << "warning: " << p.name << " rhat " << p.rhat << '\n';
  }
  return kExitOk;
}

AccuracySummary summary_from_rows(const std::vector<SummaryRow>& rows) {
  AccuracySummary s;
  for (const auto& r : rows) {
    const bool sens = r.measure == "sensitivity";
    if (!sens && r.measure != "specificity") continue;
    auto it = std::find_if(s.tests.begin(), s.tests.end(), [&](const TestAccuracy& t) { return t.test == r.test; });
    if (it == s.tests.end()) {
      s.tests.push_back(TestAccuracy{});
      s.tests.back().test = r.test;
      it = s.tests.end() - 1;
    }
    it->accuracy[sens ? 0 : 1] = {r.mean, r.lower, r.upper};
  }
  return s;
}

int cmd_plot(const RunConfig& c, std::ostream& out) {
  require(!c.data.empty() || !c.summaries.empty(), "plot requires --data and/or --summary");
  require(c.summaries.size() <= 3, "at most three --summary files");
  const fs::path outdir(c.outdir);
  fs::create_directories(outdir);
  std::optional<NetworkDataset> ds;
  if (!c.data.empty()) {
    ds = read_dataset(c.data, c.stratum);
    network_plot(build_network(*ds), outdir / "network.svg");
    out << "wrote " << (outdir / "network.svg").string() << '\n';
  }
  if (!c.summaries.empty()) {
    std::vector<ForestSeries> series;
    for (std::size_t i = 0; i < c.summaries.size(); ++i) {
      std::ifstream f(c.summaries[i]);
      if (!f) throw IoError("cannot read '" + c.summaries[i] + "'");
      auto rows = read_summary_csv(f);
      if (c.stratum) {
        std::erase_if(rows, [&](const SummaryRow& r) { return r.stratum != *c.stratum; });
      }
      const std::string label = i < c.labels.size() ? c.labels[i] : fs::path(c.summaries[i]).stem().string();
      series.push_back({label, summary_from_rows(rows)});
      if (series.back().summary.tests.empty()) throw ValidationError("no accuracy rows in '" + c.summaries[i] + "'");
    }
    const auto points = ds ? study_proportions(*ds) : std::vector<StudyProportion>{};
    forest_plot(series, points, outdir / "forest.svg");
    out << "wrote " << (outdir / "forest.svg").string() << '\n';
  }
  return kExitOk;
}

int cmd_validate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require(!c.data.empty(), "validate requires --data");
  const NetworkDataset ds = read_dataset(c.data, c.stratum);
  const NetworkGraph g = build_network(ds);
  const ConnectivityReport rep = check_connected(g);
  out << "studies: " << ds.n_studies() << '\n';
  out << "tests: " << ds.n_tests() << '\n';
  out << "arms: " << ds.n_arms() << '\n';
  out << "covariates: " << ds.n_covariates() << '\n';
  for (std::size_t k = 0; k < g.n_tests(); ++k) {
    out << "node " << g.labels()[k] << ": " << g.node_weight(k) << " studies\n";
  }
  for (const auto& e : g.edges()) {
    out << "edge " << g.labels()[e.a] << '-' << g.labels()[e.b] << ": " << e.weight << " studies\n";
  }
  out << "connected: " << (rep.connected ? "true" : "false") << '\n';
  out << "components: " << rep.n_components << '\n';
  if (!rep.connected) err << "warning: the test network is disconnected\n";
  return kExitOk;
}

int cmd_simulate(const RunConfig& c, std::uint64_t seed_override, bool seed_given, std::ostream& out) {
  require(!c.truth.empty(), "simulate requires --truth");
  TruthSpec t = TruthSpec::from_json(read_file(c.truth));
  if (seed_given) t.seed = seed_override;
  Simulation sim = simulate_network(t);
  NetworkDataset data = sim.data;
  if (c.keep_prob) {
    require(*c.keep_prob >= 0.0 && *c.keep_prob <= 1.0, "--keep-prob must lie in [0, 1]");
    const std::vector<double> keep(data.n_tests(), *c.keep_prob);
    auto mar = impose_mar(data, keep, t.seed ^ 0x6d6172ULL);
    data = std::move(mar.data);
    out << "dropped studies: " << mar.dropped_studies << '\n';
  }
  const fs::path outdir(c.outdir);
  fs::create_directories(outdir);
  {
    auto f = open_out(outdir / "simulated.csv");
    write_dataset(f, data);
  }
  {
    auto f = open_out(outdir / "latent.csv");
    write_latent_csv(f, sim);
  }
  out << "wrote " << (outdir / "simulated.csv").string() << " and " << (outdir / "latent.csv").string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian network meta-analysis of diagnostic test accuracy", "dta_nma"};
  app.require_subcommand(1);
  Flags flags;
  std::string config_path;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON file of option values");
    flags.add(sub, "--outdir", &RunConfig::outdir, "directory for output files");
  };

  auto* fit = app.add_subcommand("fit", "fit a model and summarise the posterior");
  common(fit);
  flags.add(fit, "--data", &RunConfig::data, "study-arm CSV");
  flags.add(fit, "--stratum", &RunConfig::stratum, "analyse only this stratum");
  flags.add(fit, "--model", &RunConfig::model, "ab or cb");
  flags.add(fit, "--covariance", &RunConfig::covariance, "cs or un");
  flags.add(fit, "--prior", &RunConfig::prior, "eq14, eq15, lkj1 or lkj2");
  flags.add(fit, "--baseline", &RunConfig::baseline, "baseline test (cb)");
  flags.add(fit, "--reference", &RunConfig::reference, "reference test for relative measures");
  flags.add(fit, "--fixed-tau", &RunConfig::fixed_tau, "hold every tau at this value");
  flags.add(fit, "--mc-samples", &RunConfig::mc_samples, "Monte Carlo size for marginal accuracy");
  flags.add(fit, "--tie-tol", &RunConfig::tie_tol, "tie tolerance for the superiority index");
  add_sampler_flags(fit, flags);

  auto* sim = app.add_subcommand("simulate", "simulate a network from known parameters");
  common(sim);
  flags.add(sim, "--truth", &RunConfig::truth, "truth JSON");
  flags.add(sim, "--keep-prob", &RunConfig::keep_prob, "keep each arm with this probability");
  auto* sim_seed = flags.add(sim, "--seed", &RunConfig::seed, "override the truth seed");

  auto* rank = app.add_subcommand("rank", "DOR and superiority index from fitted draws");
  common(rank);
  flags.add(rank, "--draws", &RunConfig::draws, "draws CSV written by fit");
  flags.add(rank, "--baseline", &RunConfig::baseline, "baseline test of a cb fit");
  flags.add(rank, "--mc-samples", &RunConfig::mc_samples, "Monte Carlo size for marginal accuracy");
  flags.add(rank, "--tie-tol", &RunConfig::tie_tol, "tie tolerance for the superiority index");
  flags.add(rank, "--seed", &RunConfig::seed, "random seed");

  auto* diag = app.add_subcommand("diagnose", "convergence diagnostics for a draws CSV");
  common(diag);
  flags.add(diag, "--draws", &RunConfig::draws, "draws CSV");
  flags.add(diag, "--thin", &RunConfig::thin, "thin before diagnosing");

  auto* plot = app.add_subcommand("plot", "network and forest plots as SVG");
  common(plot);
  flags.add(plot, "--data", &RunConfig::data, "study-arm CSV");
  flags.add(plot, "--stratum", &RunConfig::stratum, "stratum to plot");
  flags.add(plot, "--summary", &RunConfig::summaries, "summary CSV (repeat up to three times)");
  flags.add(plot, "--label", &RunConfig::labels, "legend label per summary");

  auto* val = app.add_subcommand("validate", "check a dataset and report its network");
  common(val);
  flags.add(val, "--data", &RunConfig::data, "study-arm CSV");
  flags.add(val, "--stratum", &RunConfig::stratum, "stratum to check");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    err << app.help();
    return kExitUsage;
  }

  try {
    RunConfig cfg;
    cfg.command = app.get_subcommands().front()->get_name();
    if (const char* env = std::getenv("DTA_NMA_SEED"); env != nullptr && *env != '\0') {
      const std::string s(env);
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) throw UsageError("DTA_NMA_SEED must be an unsigned integer");
      cfg.seed = v;
    }
    if (!config_path.empty()) {
      ojson j;
      try {
        j = ojson::parse(read_file(config_path));
      } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(std::string("config file is not valid JSON: ") + e.what());
      }
      apply_json(cfg, j);
    }
    flags.apply(cfg);

    if (cfg.command == "fit") return cmd_fit(cfg, out, err);
    if (cfg.command == "simulate") return cmd_simulate(cfg, cfg.seed, sim_seed->count() > 0, out);
    if (cfg.command == "rank") return cmd_rank(cfg, out);
    if (cfg.command == "diagnose") return cmd_diagnose(cfg, out, err);
    if (cfg.command == "plot") return cmd_plot(cfg, out);
    return cmd_validate(cfg, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InitializationError& e) {
    err << "initialization failed: " << e.what() << '\n';
    return kExitInitialization;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace dta_nma::cli
