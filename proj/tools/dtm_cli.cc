// Copyright 2026 The DTM Authors
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

// Command-line driver: reads an INI config, runs one analysis, and writes
// its artifacts next to --out.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "CLI11.hpp"
#include "dtm/auction.h"
#include "dtm/core_model.h"
#include "dtm/equilibrium.h"
#include "dtm/operator_optimizer.h"
#include "dtm/simulation.h"

namespace dtm {
namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitRuntime = 4;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Allowed keys per section; "" is the top level.
const std::map<std::string, std::set<std::string>>& Schema() {
  static const std::map<std::string, std::set<std::string>> kSchema = {
      {"", {"seed"}},
      {"market",
       {"kappa", "theta", "eps", "e", "alpha", "beta", "c", "build_cost",
        "n_users", "horizons", "quota", "d_high", "d_low"}},
      {"population", {"p", "quota", "d_high", "d_low"}},
      {"clear", {"book"}},
      {"equilibrium", {"mode"}},
      {"optimize", {"alphas", "grid_step", "profit_step"}},
      {"sweep", {"parameter", "grid", "replications", "metrics"}},
      {"user", {"p", "quota", "d_high", "d_low"}},
      {"verify", {"sample", "prices"}},
  };
  return kSchema;
}

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Drops a trailing "; comment" or "# comment" preceded by whitespace.
std::string StripComment(const std::string& value) {
  for (std::size_t k = 1; k < value.size(); ++k) {
    if ((value[k] == ';' || value[k] == '#') &&
        (value[k - 1] == ' ' || value[k - 1] == '\t')) {
      return Trim(value.substr(0, k));
    }
  }
  return Trim(value);
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Config {
 public:
  Config(const std::string& path) : dir_(fs::path(path).parent_path()) {
    try {
      pt::read_ini(path, tree_);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError(e.what());
    }
    for (const auto& [key, child] : tree_) {
      if (child.empty()) {
        CheckKey("", key);
        continue;
      }
      auto it = Schema().find(key);
      if (it == Schema().end() || key.empty()) {
        throw ConfigError("unknown section [" + key + "]");
      }
      for (const auto& entry : child) CheckKey(key, entry.first);
    }
  }

  std::optional<std::string> Get(const std::string& section,
                                 const std::string& key) const {
    const std::string path = section.empty() ? key : section + "." + key;
    auto value = tree_.get_optional<std::string>(pt::ptree::path_type(path, '.'));
    if (!value) return std::nullopt;
    return StripComment(*value);
  }

  double Number(const std::string& section, const std::string& key,
                double fallback) const {
    auto text = Get(section, key);
    return text ? ParseDouble(*text, section + "." + key) : fallback;
  }

  std::int64_t Integer(const std::string& section, const std::string& key,
                       std::int64_t fallback) const {
    auto text = Get(section, key);
    if (!text) return fallback;
    std::size_t used = 0;
    std::int64_t value = 0;
    try {
      value = std::stoll(*text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (text->empty() || used != text->size()) {
      throw ConfigError(section + "." + key + ": expected an integer, got '" +
                        *text + "'");
    }
    return value;
  }

  std::string Required(const std::string& section,
                       const std::string& key) const {
    auto text = Get(section, key);
    if (!text || text->empty()) {
      throw ConfigError("missing required key " + section + "." + key);
    }
    return *text;
  }

  fs::path Resolve(const std::string& relative) const {
    fs::path p(relative);
    return p.is_absolute() ? p : dir_ / p;
  }

  static double ParseDouble(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (text.empty() || used != text.size() || !std::isfinite(value)) {
      throw ConfigError(what + ": expected a number, got '" + text + "'");
    }
    return value;
  }

 private:
  static void CheckKey(const std::string& section, const std::string& key) {
    const auto& keys = Schema().at(section);
    if (!keys.count(key)) {
      throw ConfigError("unknown key '" + key + "'" +
                        (section.empty() ? "" : " in [" + section + "]"));
    }
  }

  pt::ptree tree_;
  fs::path dir_;
};

// "a, b, c" or "linspace(from, to, points)".
std::vector<double> ParseGrid(const std::string& text, const std::string& what) {
  const std::string t = Trim(text);
  std::vector<double> grid;
  if (t.rfind("linspace(", 0) == 0 && t.back() == ')') {
    auto parts = SplitList(t.substr(9, t.size() - 10));
    if (parts.size() != 3) throw ConfigError(what + ": linspace needs 3 values");
    const double from = Config::ParseDouble(parts[0], what);
    const double to = Config::ParseDouble(parts[1], what);
    const double points = Config::ParseDouble(parts[2], what);
    if (points < 1 || points != std::floor(points)) {
      throw ConfigError(what + ": linspace point count must be a positive "
                               "integer");
    }
    const auto n = static_cast<int>(points);
    for (int k = 0; k < n; ++k) {
      grid.push_back(n == 1 ? from : from + (to - from) * k / (n - 1));
    }
    return grid;
  }
  for (const std::string& item : SplitList(t)) {
    grid.push_back(Config::ParseDouble(item, what));
  }
  if (grid.empty()) throw ConfigError(what + ": empty list");
  return grid;
}

Distribution ParseDistribution(const Config& cfg, const std::string& key,
                               Distribution fallback) {
  auto text = cfg.Get("population", key);
  if (!text) return fallback;
  try {
    return Distribution::Parse(*text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("population." + key + ": " + e.what());
  }
}

MarketParams ReadMarket(const Config& cfg) {
  MarketParams m;
  m.kappa = cfg.Number("market", "kappa", m.kappa);
  m.theta = cfg.Number("market", "theta", m.theta);
  m.eps = cfg.Number("market", "eps", m.eps);
  m.switch_cost_rate = cfg.Number("market", "e", m.switch_cost_rate);
  m.alpha = cfg.Number("market", "alpha", m.alpha);
  m.beta = cfg.Number("market", "beta", m.beta);
  m.unit_cost = cfg.Number("market", "c", m.unit_cost);
  m.build_cost = cfg.Number("market", "build_cost", m.build_cost);
  m.n_users = cfg.Integer("market", "n_users", m.n_users);
  m.horizons = cfg.Integer("market", "horizons", m.horizons);
  m.mean_quota = cfg.Number("market", "quota", m.mean_quota);
  m.mean_d_high = cfg.Number("market", "d_high", m.mean_d_high);
  m.mean_d_low = cfg.Number("market", "d_low", m.mean_d_low);
  return m;
}

// Population shapes default to point masses at the market means.
PopulationSpec ReadPopulation(const Config& cfg, const MarketParams& m,
                              std::uint64_t seed) {
  PopulationSpec spec = PopulationSpec::FromParams(m, seed);
  spec.p = ParseDistribution(cfg, "p", spec.p);
  spec.quota = ParseDistribution(cfg, "quota", spec.quota);
  spec.d_high = ParseDistribution(cfg, "d_high", spec.d_high);
  spec.d_low = ParseDistribution(cfg, "d_low", spec.d_low);
  return spec;
}

bool ContinuumMode(const Config& cfg) {
  const std::string mode = cfg.Get("equilibrium", "mode").value_or("finite");
  if (mode != "finite" && mode != "continuum") {
    throw ConfigError("equilibrium.mode must be 'finite' or 'continuum'");
  }
  return mode == "continuum";
}

struct Options {
  std::string command;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

// Artifacts are rendered in memory and written only after the command
// succeeds.
using Artifacts = std::vector<std::pair<fs::path, std::string>>;

Artifacts RunClear(const Config& cfg, const MarketParams& m,
                   const fs::path& out) {
  const fs::path book_path = cfg.Resolve(cfg.Required("clear", "book"));
  std::ifstream in(book_path);
  if (!in) throw ConfigError("cannot read bid book " + book_path.string());
  BidBook book;
  try {
    book = ReadBidBook(in, m);
  } catch (const ParameterError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(book_path.string() + ": " + e.what());
  }
  const Allocation alloc = ClearMarket(book);
  std::ostringstream csv;
  WriteAllocation(csv, book, alloc, m);
  std::ostringstream summary;
  const auto sell = TransactionSellingPrice(book);
  const auto buy = TransactionBuyingPrice(book);
  summary << "seller_volume=" << alloc.seller_volume.ToString()
          << "\nbuyer_volume=" << alloc.buyer_volume.ToString()
          << "\ngap_revenue=" << FormatNumber(alloc.GapRevenue(m.eps))
          << "\ntransaction_selling_price="
          << (sell ? FormatNumber(m.PriceOf(*sell)) : "none")
          << "\ntransaction_buying_price="
          << (buy ? FormatNumber(m.PriceOf(*buy)) : "none") << '\n';
  return {{out, csv.str()}, {out.string() + ".summary", summary.str()}};
}

Artifacts RunEquilibrium(const Config& cfg, const MarketParams& m,
                         const fs::path& out, std::uint64_t seed,
                         bool stage2) {
  EquilibriumOutcome outcome;
  if (ContinuumMode(cfg)) {
    PopulationModel pop = PopulationModel::Continuum();
    outcome = stage2 ? Stage2Equilibrium(pop, m)
                     : Stage3Equilibrium(pop, {}, m);
  } else {
    PopulationModel pop =
        PopulationModel::Finite(SamplePopulation(ReadPopulation(cfg, m, seed)));
    if (stage2) {
      outcome = Stage2Equilibrium(pop, m);
    } else {
      std::vector<std::size_t> everyone(pop.users().size());
      for (std::size_t i = 0; i < everyone.size(); ++i) everyone[i] = i;
      outcome = Stage3Equilibrium(pop, everyone, m);
    }
  }
  std::ostringstream record;
  WriteOutcomeRecord(record, outcome, m);
  const WelfareResult w = Welfare(outcome, m);
  record << "user_welfare=" << FormatNumber(w.users)
         << "\nsocial_welfare=" << FormatNumber(w.social) << '\n';
  Artifacts artifacts = {{out, record.str()}};
  if (!outcome.continuum) {
    std::ostringstream users;
    WriteOutcomeUsers(users, outcome, m);
    artifacts.push_back({out.string() + ".users.csv", users.str()});
  }
  return artifacts;
}

Artifacts RunOptimize(const Config& cfg, const MarketParams& m,
                      const fs::path& out) {
  std::vector<double> alphas = {m.alpha};
  if (auto text = cfg.Get("optimize", "alphas")) {
    alphas = ParseGrid(*text, "optimize.alphas");
  }
  const double grid_step = cfg.Number("optimize", "grid_step", m.kappa / 10000);
  const double profit_step = cfg.Number("optimize", "profit_step", m.kappa / 60);
  if (!(grid_step > 0) || !(profit_step > 0)) {
    throw ConfigError("optimize: steps must be positive");
  }
  std::ostringstream table;
  table << "alpha,theta_star,closed_form,closed_form_trusted,numeric,"
           "reference,profit,baseline_profit\n";
  for (double alpha : alphas) {
    MarketParams at = m;
    at.alpha = alpha;
    at.Validate();
    const FeeSolution sol = SolveOptimalFee(at, grid_step);
    table << FormatNumber(alpha) << ',' << FormatNumber(sol.theta) << ','
          << FormatNumber(sol.closed_form) << ','
          << (sol.closed_form_trusted ? 1 : 0) << ','
          << FormatNumber(sol.numeric) << ','
          << FormatNumber(OptimalFeeReference(at)) << ','
          << FormatNumber(sol.profit) << ','
          << FormatNumber(BaselineProfit(at)) << '\n';
  }
  std::vector<ProfitBreakdown> rows;
  const auto steps = static_cast<std::int64_t>(std::floor(m.kappa / profit_step + 1e-9));
  for (std::int64_t k = 0; k <= steps; ++k) {
    rows.push_back(TotalProfit(std::min(m.kappa, k * profit_step), m));
  }
  if (steps * profit_step < m.kappa) rows.push_back(TotalProfit(m.kappa, m));
  std::ostringstream profit;
  WriteProfitCsv(profit, rows);
  return {{out, table.str()}, {out.string() + ".profit.csv", profit.str()}};
}

Artifacts RunDeployCheck(const MarketParams& m, const fs::path& out) {
  const DeployDecision d = ShouldDeploy(m);
  const ThresholdResult t = MarketShareThreshold(m);
  std::ostringstream s;
  s << "decision=" << (d.deploy ? "deploy" : "do not deploy")
    << "\nmargin=" << FormatNumber(d.margin)
    << "\ntheta_star=" << FormatNumber(d.theta_star)
    << "\nalpha=" << FormatNumber(m.alpha) << "\nthreshold_kind=";
  switch (t.kind) {
    case ThresholdResult::Kind::kCrossing:
      s << "crossing\nalpha_threshold=" << FormatNumber(t.alpha)
        << "\ndeploy_below=" << (t.deploy_below ? 1 : 0);
      break;
    case ThresholdResult::Kind::kAlwaysDeploy:
      s << "always_deploy\nalpha_threshold=none";
      break;
    case ThresholdResult::Kind::kNeverDeploy:
      s << "never_deploy\nalpha_threshold=none";
      break;
  }
  s << "\nreference_threshold=";
  try {
    s << FormatNumber(MarketShareThresholdReference(m));
  } catch (const DegenerateParameters&) {
    s << "undefined";
  }
  s << '\n';
  return {{out, s.str()}};
}

Artifacts RunSweep(const Config& cfg, const MarketParams& m,
                   const fs::path& out, std::uint64_t seed, unsigned threads) {
  SweepSpec spec;
  spec.parameter = cfg.Required("sweep", "parameter");
  spec.grid = ParseGrid(cfg.Required("sweep", "grid"), "sweep.grid");
  spec.metrics = SplitList(cfg.Required("sweep", "metrics"));
  spec.replications =
      static_cast<int>(cfg.Integer("sweep", "replications", 1));
  spec.fixed = m;
  spec.population = ReadPopulation(cfg, m, seed);
  spec.seed = seed;
  spec.threads = threads;
  spec.probe_user.p = cfg.Number("user", "p", spec.probe_user.p);
  spec.probe_user.quota = cfg.Number("user", "quota", m.mean_quota);
  spec.probe_user.d_high = cfg.Number("user", "d_high", m.mean_d_high);
  spec.probe_user.d_low = cfg.Number("user", "d_low", m.mean_d_low);
  try {
    spec.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const SweepTable table = Sweep(spec);
  std::ostringstream csv, meta;
  WriteSweepCsv(csv, table);
  WriteSweepMeta(meta, spec);
  return {{out, csv.str()}, {out.string() + ".meta", meta.str()}};
}

Artifacts RunVerify(const Config& cfg, const MarketParams& m,
                    const fs::path& out, std::uint64_t seed,
                    unsigned threads) {
  const PopulationModel pop =
      PopulationModel::Finite(SamplePopulation(ReadPopulation(cfg, m, seed)));
  const EquilibriumOutcome outcome = Stage2Equilibrium(pop, m);
  NashScanOptions options;
  options.sample = static_cast<std::size_t>(cfg.Integer("verify", "sample", 0));
  options.seed = seed;
  options.threads = threads;
  if (auto prices = cfg.Get("verify", "prices")) {
    for (double price : ParseGrid(*prices, "verify.prices")) {
      try {
        options.price_grid.push_back(m.TickOf(price));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("verify.prices: ") + e.what());
      }
    }
  }
  const NashReport report = VerifyNash(outcome, pop, m, options);
  std::ostringstream s;
  WriteNashReport(s, report, m);
  return {{out, s.str()}};
}

void WriteArtifacts(const Artifacts& artifacts) {
  for (const auto& [path, content] : artifacts) {
    const fs::path tmp = path.string() + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      f << content;
      f.flush();
      if (!f) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
  }
}

int Run(const Options& opts) {
  try {
    const Config cfg(opts.config);
    MarketParams m = ReadMarket(cfg);
    const std::uint64_t seed =
        opts.seed ? *opts.seed
                  : static_cast<std::uint64_t>(cfg.Integer("", "seed", 0));
    m.Validate();
    const fs::path out(opts.out);
    Artifacts artifacts;
    const std::string& c = opts.command;
    if (c == "clear") {
      artifacts = RunClear(cfg, m, out);
    } else if (c == "stage3" || c == "stage2") {
      artifacts = RunEquilibrium(cfg, m, out, seed, c == "stage2");
    } else if (c == "optimize") {
      artifacts = RunOptimize(cfg, m, out);
    } else if (c == "deploy-check") {
      artifacts = RunDeployCheck(m, out);
    } else if (c == "sweep") {
      artifacts = RunSweep(cfg, m, out, seed, opts.threads);
    } else {
      artifacts = RunVerify(cfg, m, out, seed, opts.threads);
    }
    WriteArtifacts(artifacts);
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParameterError& e) {
    std::cerr << "infeasible parameters: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace
}  // namespace dtm

int main(int argc, char** argv) {
  CLI::App app{"Data trading market analysis"};
  app.require_subcommand(1);
  dtm::Options opts;
  std::uint64_t seed = 0;
  for (const char* name : {"clear", "stage3", "stage2", "optimize",
                           "deploy-check", "sweep", "verify"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opts.config, "INI configuration file")
        ->required();
    sub->add_option("--out", opts.out, "Output path")->required();
    sub->add_option("--seed", seed, "Overrides the configured seed");
    sub->add_option("--threads", opts.threads, "Worker threads")
        ->check(CLI::PositiveNumber);
    sub->callback([&opts, &seed, sub, name]() {
      opts.command = name;
      if (sub->count("--seed") > 0) opts.seed = seed;
    });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dtm::kExitConfig;
  }
  return dtm::Run(opts);
}
