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

#ifndef DTM_SIMULATION_H_
#define DTM_SIMULATION_H_

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "dtm/core_model.h"

// Finite-population experiments: sampling user types, running one
// operator-selection / trading / billing round, welfare metrics and
// parameter sweeps.
namespace dtm {

// A point mass or a uniform distribution on [low, high].
struct Distribution {
  enum class Kind { kPoint, kUniform };
  Kind kind = Kind::kPoint;
  double low = 0.0;
  double high = 0.0;

  static Distribution Point(double value) { return {Kind::kPoint, value, value}; }
  static Distribution Uniform(double low, double high);  // requires low <= high
  // Accepts "20", "point(20)" and "uniform(0,1)".
  static Distribution Parse(const std::string& text);

  double Mean() const { return 0.5 * (low + high); }
  double Sample(std::mt19937_64& rng) const;
  // Same shape shifted so that its mean is `mean`.
  Distribution WithMean(double mean) const;
  std::string ToString() const;
};

struct PopulationSpec {
  std::int64_t n_users = 1000;
  Distribution p = Distribution::Uniform(0.0, 1.0);
  Distribution quota = Distribution::Point(20.0);
  Distribution d_high = Distribution::Point(25.0);
  Distribution d_low = Distribution::Point(15.0);
  double alpha = 0.5;  // share of users originally with the DTM operator
  std::uint64_t seed = 0;

  // Point masses at the means of `params`, with n_users and alpha copied.
  static PopulationSpec FromParams(const MarketParams& params,
                                   std::uint64_t seed);
};

// Draws n_users types; a draw violating d_low < quota < d_high is redrawn.
// Exactly floor(alpha n) users, chosen uniformly, are original DTM
// subscribers. Throws ParameterError when the supports make the type
// constraints unsatisfiable.
std::vector<UserType> SamplePopulation(const PopulationSpec& spec);

// One round: operator selection, trading among DTM members, clearing, and
// billing of each member's expected overage at the post-trade quota.
struct ScenarioReport {
  EquilibriumOutcome outcome;

  std::size_t members = 0;
  std::size_t switchers = 0;
  std::size_t sellers = 0;
  std::size_t buyers = 0;
  std::size_t idle = 0;
  double traded_volume = 0.0;  // GB

  // Operator profit terms, money per trading horizon.
  double subscriptions = 0.0;     // beta per member minus service cost
  double fees = 0.0;              // theta per GB sold
  double overage_sellers = 0.0;
  double overage_no_trade = 0.0;  // members who did not trade
  double overage_buyers = 0.0;
  double gap_revenue = 0.0;
  double build_cost = 0.0;
  double profit = 0.0;  // all of the above, build cost subtracted

  double buyer_payments = 0.0;
  double seller_receipts = 0.0;  // net of fees
  // buyer_payments - seller_receipts - fees - gap_revenue; zero up to
  // rounding.
  double conservation_residual = 0.0;

  double user_welfare = 0.0;    // sum of member payoffs
  double social_welfare = 0.0;  // user_welfare + profit
};

ScenarioReport RunScenario(const std::vector<UserType>& users,
                           const MarketParams& params);

struct WelfareResult {
  double users = 0.0;   // W_u
  double social = 0.0;  // W_t
};

// W_u sums the per-horizon payoffs of DTM members; W_t adds the operator
// profit of TotalProfit at the outcome's fee. Continuum outcomes integrate
// over the uniform-p population of size params.n_users.
WelfareResult Welfare(const EquilibriumOutcome& outcome,
                      const MarketParams& params);

// Payoff with DTM at the user's trading role (full fill at `price`) minus
// the payoff without DTM, neither side paying a switching cost.
double UserGain(const UserType& user, const MarketParams& params,
                double price);

struct SweepSpec {
  std::string parameter;  // see SweepParameters()
  std::vector<double> grid;
  MarketParams fixed;
  // Shapes of the type distributions; quota and demand distributions are
  // re-centred on the row's MarketParams means.
  PopulationSpec population;
  int replications = 1;
  std::vector<std::string> metrics;  // see SweepMetrics()
  std::uint64_t seed = 0;
  unsigned threads = 1;

  // The user probed by the user_gain metric.
  UserType probe_user{0.5, 20.0, 25.0, 15.0, true};

  // Throws std::invalid_argument on an empty grid, an unknown parameter or
  // metric, or replications < 1.
  void Validate() const;
};

std::vector<std::string> SweepParameters();
std::vector<std::string> SweepMetrics();

struct SweepTable {
  std::vector<std::string> columns;  // parameter, replication, metrics...
  std::vector<std::vector<double>> rows;

  // Index of `name` in columns; throws std::out_of_range.
  std::size_t Column(const std::string& name) const;
};

// One row per (grid point, replication), grid-major. Replication r uses the
// same population seed at every grid point. Parallel and serial runs give
// identical tables.
SweepTable Sweep(const SweepSpec& spec);

void WriteSweepCsv(std::ostream& out, const SweepTable& table);
// key=value lines: seed, spec_hash (FNV-1a over the canonical spec text),
// version.
void WriteSweepMeta(std::ostream& out, const SweepSpec& spec);
std::string CanonicalSpecText(const SweepSpec& spec);

void WriteScenarioReport(std::ostream& out, const ScenarioReport& report,
                         const MarketParams& params);

// Library version string.
const char* Version();

}  // namespace dtm

#endif  // DTM_SIMULATION_H_
