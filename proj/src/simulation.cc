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

#include "dtm/simulation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dtm/auction.h"
#include "dtm/equilibrium.h"
#include "dtm/operator_optimizer.h"
#include "dtm/parallel.h"

namespace dtm {
namespace {

constexpr int kMaxRedraws = 10000;
constexpr char kVersion[] = "0.1.0";

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

double ParseNumber(const std::string& text) {
  const std::string t = Trim(text);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size() || !std::isfinite(value)) {
    throw std::invalid_argument("distribution: bad number '" + text + "'");
  }
  return value;
}

std::string Exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Per-horizon payoff of a DTM member in `role` whose order fills
// completely at `price`.
double FullFillPayoff(const UserType& u, TradeRole role, double price,
                      const MarketParams& params, bool switched) {
  const double kappa = params.kappa;
  double quota = u.quota;
  double money = 0.0;
  if (role == TradeRole::kSeller) {
    quota = u.d_low;
    money = (price - params.theta) * u.SellQuantity();
  } else if (role == TradeRole::kBuyer) {
    quota = u.d_high;
    money = -price * u.BuyQuantity();
  }
  const double switching =
      switched ? params.switch_cost_rate * u.ExpectedUsage() : 0.0;
  return money + u.p * SatisfactionLoss(quota, u.d_high, kappa) +
         (1.0 - u.p) * SatisfactionLoss(quota, u.d_low, kappa) - switching;
}

// Integral over p in [from, to] of a function that is linear between
// consecutive `cuts`.
double IntegratePieces(const std::function<double(double)>& f, double from,
                       double to, std::vector<double> cuts) {
  if (to <= from) return 0.0;
  cuts.push_back(from);
  cuts.push_back(to);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    const double a = std::max(from, cuts[k - 1]);
    const double b = std::min(to, cuts[k]);
    if (b > a) total += (b - a) * f(0.5 * (a + b));
  }
  return total;
}

double ExpectedOverage(const UserType& u, double quota, double kappa) {
  return -(u.p * SatisfactionLoss(quota, u.d_high, kappa) +
           (1.0 - u.p) * SatisfactionLoss(quota, u.d_low, kappa));
}

MarketParams WithParameter(MarketParams params, UserType& probe,
                           const std::string& name, double value) {
  static const std::map<std::string, std::function<void(MarketParams&,
                                                         UserType&, double)>>
      kSetters = {
          {"kappa", [](MarketParams& m, UserType&, double v) { m.kappa = v; }},
          {"theta", [](MarketParams& m, UserType&, double v) { m.theta = v; }},
          {"eps", [](MarketParams& m, UserType&, double v) { m.eps = v; }},
          {"e", [](MarketParams& m, UserType&,
                   double v) { m.switch_cost_rate = v; }},
          {"alpha", [](MarketParams& m, UserType&, double v) { m.alpha = v; }},
          {"beta", [](MarketParams& m, UserType&, double v) { m.beta = v; }},
          {"c", [](MarketParams& m, UserType&, double v) { m.unit_cost = v; }},
          {"build_cost",
           [](MarketParams& m, UserType&, double v) { m.build_cost = v; }},
          {"n_users",
           [](MarketParams& m, UserType&, double v) {
             m.n_users = std::llround(v);
           }},
          {"horizons",
           [](MarketParams& m, UserType&, double v) {
             m.horizons = std::llround(v);
           }},
          {"quota",
           [](MarketParams& m, UserType&, double v) { m.mean_quota = v; }},
          {"d_high",
           [](MarketParams& m, UserType&, double v) { m.mean_d_high = v; }},
          {"d_low",
           [](MarketParams& m, UserType&, double v) { m.mean_d_low = v; }},
          {"user_p", [](MarketParams&, UserType& u, double v) { u.p = v; }},
          {"user_quota",
           [](MarketParams&, UserType& u, double v) { u.quota = v; }},
          {"user_d_high",
           [](MarketParams&, UserType& u, double v) { u.d_high = v; }},
          {"user_d_low",
           [](MarketParams&, UserType& u, double v) { u.d_low = v; }},
      };
  auto it = kSetters.find(name);
  if (it == kSetters.end()) {
    throw std::invalid_argument("sweep: unknown parameter '" + name + "'");
  }
  it->second(params, probe, value);
  return params;
}

const std::vector<std::string>& AnalyticMetrics() {
  static const std::vector<std::string> kNames = {
      "theta_star", "profit_star", "baseline_profit", "profit_gain",
      "profit",     "clearing_price", "w_u",          "w_t",
      "user_gain"};
  return kNames;
}

const std::vector<std::string>& SimulatedMetrics() {
  static const std::vector<std::string> kNames = {
      "sim_price",         "sim_members",       "sim_switchers",
      "sim_sellers",       "sim_buyers",        "sim_volume",
      "sim_subscriptions", "sim_fees",          "sim_overage_sellers",
      "sim_overage_no_trade", "sim_overage_buyers", "sim_gap",
      "sim_profit",        "sim_w_u",           "sim_w_t",
      "sim_conservation"};
  return kNames;
}

bool Contains(const std::vector<std::string>& names, const std::string& n) {
  return std::find(names.begin(), names.end(), n) != names.end();
}

double SimulatedMetric(const std::string& name, const ScenarioReport& r) {
  if (name == "sim_price") return r.outcome.clearing_price;
  if (name == "sim_members") return static_cast<double>(r.members);
  if (name == "sim_switchers") return static_cast<double>(r.switchers);
  if (name == "sim_sellers") return static_cast<double>(r.sellers);
  if (name == "sim_buyers") return static_cast<double>(r.buyers);
  if (name == "sim_volume") return r.traded_volume;
  if (name == "sim_subscriptions") return r.subscriptions;
  if (name == "sim_fees") return r.fees;
  if (name == "sim_overage_sellers") return r.overage_sellers;
  if (name == "sim_overage_no_trade") return r.overage_no_trade;
  if (name == "sim_overage_buyers") return r.overage_buyers;
  if (name == "sim_gap") return r.gap_revenue;
  if (name == "sim_profit") return r.profit;
  if (name == "sim_w_u") return r.user_welfare;
  if (name == "sim_w_t") return r.social_welfare;
  return r.conservation_residual;  // sim_conservation
}

std::uint64_t ReplicationSeed(std::uint64_t seed, int replication) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replication)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

Distribution Distribution::Uniform(double low, double high) {
  if (!(low <= high) || !std::isfinite(low) || !std::isfinite(high)) {
    throw std::invalid_argument("distribution: need low <= high");
  }
  return {Kind::kUniform, low, high};
}

Distribution Distribution::Parse(const std::string& text) {
  const std::string t = Trim(text);
  const auto open = t.find('(');
  if (open == std::string::npos) return Point(ParseNumber(t));
  if (t.back() != ')') {
    throw std::invalid_argument("distribution: missing ')' in '" + text + "'");
  }
  const std::string name = Trim(t.substr(0, open));
  const std::string args = t.substr(open + 1, t.size() - open - 2);
  if (name == "point") return Point(ParseNumber(args));
  if (name == "uniform") {
    const auto comma = args.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("distribution: uniform needs two bounds");
    }
    return Uniform(ParseNumber(args.substr(0, comma)),
                   ParseNumber(args.substr(comma + 1)));
  }
  throw std::invalid_argument("distribution: unknown kind '" + name + "'");
}

double Distribution::Sample(std::mt19937_64& rng) const {
  if (kind == Kind::kPoint || low == high) return low;
  return std::uniform_real_distribution<double>(low, high)(rng);
}

Distribution Distribution::WithMean(double mean) const {
  const double shift = mean - Mean();
  return {kind, low + shift, high + shift};
}

std::string Distribution::ToString() const {
  if (kind == Kind::kPoint) return "point(" + Exact(low) + ")";
  return "uniform(" + Exact(low) + "," + Exact(high) + ")";
}

PopulationSpec PopulationSpec::FromParams(const MarketParams& params,
                                          std::uint64_t seed) {
  PopulationSpec spec;
  spec.n_users = params.n_users;
  spec.quota = Distribution::Point(params.mean_quota);
  spec.d_high = Distribution::Point(params.mean_d_high);
  spec.d_low = Distribution::Point(params.mean_d_low);
  spec.alpha = params.alpha;
  spec.seed = seed;
  return spec;
}

std::vector<UserType> SamplePopulation(const PopulationSpec& spec) {
  if (spec.n_users < 1) throw ParameterError("population: n_users must be >= 1");
  if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) {
    throw ParameterError("population: alpha must lie in [0,1]");
  }
  if (spec.p.low < 0.0 || spec.p.high > 1.0) {
    throw ParameterError("population: p must be supported on [0,1]");
  }
  // With independent draws the constraint has probability zero exactly
  // when one of these holds.
  if (spec.quota.high <= spec.d_low.low || spec.quota.low >= spec.d_high.high ||
      spec.d_low.high <= 0.0 ||
      (spec.quota.kind == Distribution::Kind::kPoint &&
       (spec.quota.low <= spec.d_low.low || spec.quota.low >= spec.d_high.high))) {
    throw ParameterError(
        "population: type supports cannot satisfy 0 < d_low < quota < d_high");
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<UserType> users(static_cast<std::size_t>(spec.n_users));
  for (UserType& u : users) {
    u.p = spec.p.Sample(rng);
    int tries = 0;
    do {
      if (++tries > kMaxRedraws) {
        throw ParameterError("population: rejection sampling did not succeed");
      }
      u.quota = spec.quota.Sample(rng);
      u.d_high = spec.d_high.Sample(rng);
      u.d_low = spec.d_low.Sample(rng);
    } while (!(0.0 < u.d_low && u.d_low < u.quota && u.quota < u.d_high));
  }
  std::vector<std::size_t> order(users.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto originals = static_cast<std::size_t>(
      std::floor(spec.alpha * static_cast<double>(spec.n_users) + 1e-9));
  for (std::size_t k = 0; k < originals; ++k) users[order[k]].original_dtm = true;
  return users;
}

ScenarioReport RunScenario(const std::vector<UserType>& users,
                           const MarketParams& params) {
  ScenarioReport r;
  r.outcome = Stage2Equilibrium(PopulationModel::Finite(users), params);
  const double kappa = params.kappa;
  for (const UserOutcome& uo : r.outcome.users) {
    if (!uo.dtm_member) continue;
    const UserType& u = users[uo.user];
    ++r.members;
    if (uo.switched) ++r.switchers;
    r.user_welfare += uo.payoff;
    r.subscriptions += params.beta - params.unit_cost * u.ExpectedUsage();
    const double amount = uo.transacted.ToDouble();
    const double price = params.PriceOf(uo.bid.price);
    if (uo.role == TradeRole::kSeller) {
      ++r.sellers;
      r.fees += params.theta * amount;
      r.seller_receipts += (price - params.theta) * amount;
      r.overage_sellers += ExpectedOverage(u, u.quota - amount, kappa);
    } else if (uo.role == TradeRole::kBuyer) {
      ++r.buyers;
      r.buyer_payments += price * amount;
      r.overage_buyers += ExpectedOverage(u, u.quota + amount, kappa);
    } else {
      ++r.idle;
      r.overage_no_trade += ExpectedOverage(u, u.quota, kappa);
    }
  }
  r.traded_volume = r.outcome.traded_volume;
  r.gap_revenue = r.outcome.gap_revenue;
  r.build_cost = params.build_cost;
  r.profit = r.subscriptions + r.fees + r.overage_sellers + r.overage_no_trade +
             r.overage_buyers + r.gap_revenue - r.build_cost;
  r.conservation_residual =
      r.buyer_payments - r.seller_receipts - r.fees - r.gap_revenue;
  r.social_welfare = r.user_welfare + r.profit;
  return r;
}

WelfareResult Welfare(const EquilibriumOutcome& outcome,
                      const MarketParams& params) {
  MarketParams at = params;
  at.theta = outcome.theta;
  WelfareResult w;
  if (!outcome.continuum) {
    for (const UserOutcome& uo : outcome.users) {
      if (uo.dtm_member) w.users += uo.payoff;
    }
    at.n_users = static_cast<std::int64_t>(outcome.population);
    w.social = w.users + TotalProfit(at.theta, at).total;
    return w;
  }

  const double price = outcome.clearing_price;
  const Thresholds t = Stage3Thresholds(price, at);
  const Thresholds s = Stage2Thresholds(price, at);
  const std::vector<double> cuts = {t.p_low, t.p_high, s.p_low, s.p_high};
  auto member = [&](bool switched) {
    return [&, switched](double p) {
      UserType u{p, at.mean_quota, at.mean_d_high, at.mean_d_low, !switched};
      return FullFillPayoff(u, Stage3Role(p, price, at), price, at, switched);
    };
  };
  const double alpha = at.alpha;
  const double per_user =
      alpha * IntegratePieces(member(false), 0.0, 1.0, cuts) +
      (1.0 - alpha) * (IntegratePieces(member(true), 0.0, s.p_low, cuts) +
                       IntegratePieces(member(true), s.p_high, 1.0, cuts));
  w.users = static_cast<double>(at.n_users) * per_user;
  w.social = w.users + TotalProfit(at.theta, at).total;
  return w;
}

double UserGain(const UserType& user, const MarketParams& params,
                double price) {
  const TradeRole role = Stage3Role(user.p, price, params);
  return FullFillPayoff(user, role, price, params, false) -
         PayoffNonDtm(user, params, false);
}

void SweepSpec::Validate() const {
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  if (replications < 1) {
    throw std::invalid_argument("sweep: replications must be >= 1");
  }
  if (!Contains(SweepParameters(), parameter)) {
    throw std::invalid_argument("sweep: unknown parameter '" + parameter + "'");
  }
  if (metrics.empty()) throw std::invalid_argument("sweep: no metrics");
  for (const std::string& m : metrics) {
    if (!Contains(AnalyticMetrics(), m) && !Contains(SimulatedMetrics(), m)) {
      throw std::invalid_argument("sweep: unknown metric '" + m + "'");
    }
  }
}

std::vector<std::string> SweepParameters() {
  return {"kappa",  "theta",  "eps",   "e",          "alpha",       "beta",
          "c",      "build_cost", "n_users", "horizons", "quota",   "d_high",
          "d_low",  "user_p", "user_quota", "user_d_high", "user_d_low"};
}

std::vector<std::string> SweepMetrics() {
  std::vector<std::string> all = AnalyticMetrics();
  all.insert(all.end(), SimulatedMetrics().begin(), SimulatedMetrics().end());
  return all;
}

std::size_t SweepTable::Column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) {
    throw std::out_of_range("sweep table: no column '" + name + "'");
  }
  return static_cast<std::size_t>(it - columns.begin());
}

SweepTable Sweep(const SweepSpec& spec) {
  spec.Validate();
  bool simulate = false;
  for (const std::string& m : spec.metrics) {
    simulate = simulate || Contains(SimulatedMetrics(), m);
  }

  const std::size_t points = spec.grid.size();
  const auto reps = static_cast<std::size_t>(spec.replications);
  std::vector<MarketParams> row_params(points);
  std::vector<UserType> probes(points, spec.probe_user);
  for (std::size_t g = 0; g < points; ++g) {
    row_params[g] = WithParameter(spec.fixed, probes[g], spec.parameter,
                                  spec.grid[g]);
    row_params[g].Validate();
  }

  // Analytic metrics per grid point, then simulated ones per replication.
  std::vector<std::map<std::string, double>> analytic(points);
  ParallelFor(points, spec.threads, [&](std::size_t g) {
    const MarketParams& params = row_params[g];
    auto want = [&](const char* name) { return Contains(spec.metrics, name); };
    auto& out = analytic[g];
    if (want("theta_star") || want("profit_star") || want("profit_gain")) {
      const FeeSolution sol = SolveOptimalFee(params);
      out["theta_star"] = sol.theta;
      out["profit_star"] = sol.profit;
      out["profit_gain"] = sol.profit - BaselineProfit(params);
    }
    out["baseline_profit"] = BaselineProfit(params);
    out["profit"] = TotalProfit(params.theta, params).total;
    const EquilibriumOutcome eq =
        Stage2Equilibrium(PopulationModel::Continuum(), params);
    out["clearing_price"] = eq.clearing_price;
    if (want("w_u") || want("w_t")) {
      const WelfareResult w = Welfare(eq, params);
      out["w_u"] = w.users;
      out["w_t"] = w.social;
    }
    if (want("user_gain")) {
      probes[g].Validate();
      out["user_gain"] = UserGain(probes[g], params, eq.clearing_price);
    }
  });

  SweepTable table;
  table.columns = {spec.parameter, "replication"};
  table.columns.insert(table.columns.end(), spec.metrics.begin(),
                       spec.metrics.end());
  table.rows.assign(points * reps, {});
  ParallelFor(points * reps, spec.threads, [&](std::size_t job) {
    const std::size_t g = job / reps;
    const std::size_t rep = job % reps;
    std::vector<double>& row = table.rows[job];
    row.push_back(spec.grid[g]);
    row.push_back(static_cast<double>(rep));
    ScenarioReport report;
    if (simulate) {
      const MarketParams& params = row_params[g];
      PopulationSpec pop = spec.population;
      pop.n_users = params.n_users;
      pop.alpha = params.alpha;
      pop.quota = pop.quota.WithMean(params.mean_quota);
      pop.d_high = pop.d_high.WithMean(params.mean_d_high);
      pop.d_low = pop.d_low.WithMean(params.mean_d_low);
      pop.seed = ReplicationSeed(spec.seed, static_cast<int>(rep));
      report = RunScenario(SamplePopulation(pop), params);
    }
    for (const std::string& m : spec.metrics) {
      row.push_back(Contains(SimulatedMetrics(), m) ? SimulatedMetric(m, report)
                                                    : analytic[g].at(m));
    }
  });
  return table;
}

void WriteSweepCsv(std::ostream& out, const SweepTable& table) {
  for (std::size_t k = 0; k < table.columns.size(); ++k) {
    out << (k ? "," : "") << table.columns[k];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      out << (k ? "," : "") << FormatNumber(row[k]);
    }
    out << '\n';
  }
}

std::string CanonicalSpecText(const SweepSpec& spec) {
  std::ostringstream s;
  const MarketParams& m = spec.fixed;
  s << "parameter=" << spec.parameter << "\ngrid=";
  for (std::size_t k = 0; k < spec.grid.size(); ++k) {
    s << (k ? "," : "") << Exact(spec.grid[k]);
  }
  s << "\nkappa=" << Exact(m.kappa) << "\ntheta=" << Exact(m.theta)
    << "\neps=" << Exact(m.eps) << "\ne=" << Exact(m.switch_cost_rate)
    << "\nalpha=" << Exact(m.alpha) << "\nbeta=" << Exact(m.beta)
    << "\nc=" << Exact(m.unit_cost) << "\nbuild_cost=" << Exact(m.build_cost)
    << "\nn_users=" << m.n_users << "\nhorizons=" << m.horizons
    << "\nquota=" << Exact(m.mean_quota) << "\nd_high=" << Exact(m.mean_d_high)
    << "\nd_low=" << Exact(m.mean_d_low)
    << "\np_dist=" << spec.population.p.ToString()
    << "\nquota_dist=" << spec.population.quota.ToString()
    << "\nd_high_dist=" << spec.population.d_high.ToString()
    << "\nd_low_dist=" << spec.population.d_low.ToString()
    << "\nreplications=" << spec.replications << "\nmetrics=";
  for (std::size_t k = 0; k < spec.metrics.size(); ++k) {
    s << (k ? "," : "") << spec.metrics[k];
  }
  const UserType& u = spec.probe_user;
  s << "\nuser=" << Exact(u.p) << ',' << Exact(u.quota) << ','
    << Exact(u.d_high) << ',' << Exact(u.d_low) << "\nseed=" << spec.seed
    << '\n';
  return s.str();
}

void WriteSweepMeta(std::ostream& out, const SweepSpec& spec) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char ch : CanonicalSpecText(spec)) {
    hash ^= ch;
    hash *= 1099511628211ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(hash));
  out << "seed=" << spec.seed << "\nspec_hash=" << hex
      << "\nversion=" << kVersion << '\n';
}

void WriteScenarioReport(std::ostream& out, const ScenarioReport& r,
                         const MarketParams& params) {
  WriteOutcomeRecord(out, r.outcome, params);
  out << "members=" << r.members << "\nswitchers=" << r.switchers
      << "\nsellers=" << r.sellers << "\nbuyers=" << r.buyers
      << "\nidle=" << r.idle
      << "\nsubscriptions=" << FormatNumber(r.subscriptions)
      << "\nfees=" << FormatNumber(r.fees)
      << "\noverage_sellers=" << FormatNumber(r.overage_sellers)
      << "\noverage_no_trade=" << FormatNumber(r.overage_no_trade)
      << "\noverage_buyers=" << FormatNumber(r.overage_buyers)
      << "\nbuild_cost=" << FormatNumber(r.build_cost)
      << "\nprofit=" << FormatNumber(r.profit)
      << "\nbuyer_payments=" << FormatNumber(r.buyer_payments)
      << "\nseller_receipts=" << FormatNumber(r.seller_receipts)
      << "\nconservation_residual=" << FormatNumber(r.conservation_residual)
      << "\nuser_welfare=" << FormatNumber(r.user_welfare)
      << "\nsocial_welfare=" << FormatNumber(r.social_welfare) << '\n';
}

const char* Version() { return kVersion; }

}  // namespace dtm
