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

#ifndef DTM_CORE_MODEL_H_
#define DTM_CORE_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtm/rational.h"

// Domain types and per-user payoff formulas for the mobile data trading
// market: users hold a monthly quota, face a two-point demand, and may sell
// or buy quota on the operator's trading platform.
namespace dtm {

// Absolute tolerance for comparisons between real-valued payoffs.
inline constexpr double kPayoffTolerance = 1e-9;

// Parameters outside the model's feasible region (e.g. D_l >= Q). The CLI
// maps this to its "infeasible parameters" exit code.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A closed form whose denominator vanishes for the given parameters.
class DegenerateParameters : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

enum class Role { kSeller, kBuyer };

// Outcome-level role; kNoTrade covers the zero bid.
enum class TradeRole { kSeller, kBuyer, kNoTrade };

char RoleCode(Role role);  // 's' / 'b'
std::string TradeRoleName(TradeRole role);

// Prices live on the grid {0, eps, 2 eps, ..., kappa}; a PriceTick counts
// grid steps.
using PriceTick = std::int64_t;

struct UserType {
  double p = 0.0;       // probability of the high-demand month
  double quota = 0.0;   // monthly quota Q_i (GB)
  double d_high = 0.0;  // high-demand realization (GB)
  double d_low = 0.0;   // low-demand realization (GB)
  bool original_dtm = false;  // subscribed to the DTM operator last horizon

  double ExpectedUsage() const { return p * d_high + (1.0 - p) * d_low; }
  double SellQuantity() const { return quota - d_low; }
  double BuyQuantity() const { return d_high - quota; }

  // Requires 0 <= p <= 1 and 0 < d_low < quota < d_high.
  void Validate() const;
};

struct Bid {
  Role role = Role::kSeller;
  PriceTick price = 0;
  Rational quantity;

  // Non-participation: price 0, quantity 0, either role.
  static Bid Zero(Role role = Role::kSeller) { return {role, 0, Rational()}; }
  bool IsZero() const { return quantity.IsZero(); }
};

struct MarketParams {
  double kappa = 60.0;            // overage fee per GB
  double theta = 0.0;             // operation fee per GB sold
  double eps = 1.0;               // price grid step
  double switch_cost_rate = 50.0; // e
  double alpha = 0.5;             // DTM operator's initial market share
  double beta = 500.0;            // subscription revenue per user
  double unit_cost = 20.0;        // service cost per GB
  double build_cost = 100.0;      // C_b
  std::int64_t n_users = 1000;    // I
  std::int64_t horizons = 12;     // trading horizons per subscription
  double mean_quota = 20.0;       // Q
  double mean_d_high = 25.0;      // D_h
  double mean_d_low = 15.0;       // D_l

  // Throws ParameterError. D_l < Q < D_h is strict: the threshold and
  // optimal-fee closed forms divide by both gaps.
  void Validate() const;

  PriceTick MaxTick() const;  // kappa / eps
  double PriceOf(PriceTick tick) const { return static_cast<double>(tick) * eps; }
  // Grid tick for an on-grid price; throws std::invalid_argument otherwise.
  PriceTick TickOf(double price) const;
  // Nearest grid tick, clamped to [0, MaxTick()].
  PriceTick NearestTick(double price) const;

  double SellGap() const { return mean_quota - mean_d_low; }   // Q - D_l
  double BuyGap() const { return mean_d_high - mean_quota; }   // D_h - Q
};

// Per-user transacted quantities aligned with the cleared book's entries,
// plus the operator's revenue from buyer/seller price gaps.
struct Allocation {
  std::vector<Rational> transacted;
  Rational seller_volume;
  Rational buyer_volume;
  // Sum over matches of (buyer price - seller price) * quantity, in price
  // ticks times GB. Multiply by eps for money.
  Rational gap_revenue_ticks;

  double GapRevenue(double eps) const {
    return gap_revenue_ticks.ToDouble() * eps;
  }
};

struct UserOutcome {
  std::size_t user = 0;  // index into the population
  bool dtm_member = false;
  bool switched = false;  // chose an operator different from last horizon
  TradeRole role = TradeRole::kNoTrade;
  Bid bid;
  Rational transacted;
  double payoff = 0.0;  // per trading horizon: U_{i,1} members, U_{i,0} others
};

struct EquilibriumOutcome {
  bool continuum = false;
  bool no_trade = false;
  double clearing_price = 0.0;
  std::optional<PriceTick> price_tick;  // finite mode only
  double theta = 0.0;

  // Finite mode: one entry per considered user. Empty in continuum mode.
  std::vector<UserOutcome> users;

  // Aggregates. Shares are fractions of the whole population in both modes.
  // Volumes are GB in finite mode and GB per unit population mass in
  // continuum mode.
  double supply = 0.0;
  double demand = 0.0;
  double traded_volume = 0.0;
  double seller_share = 0.0;
  double buyer_share = 0.0;
  double idle_share = 0.0;    // DTM members who do not trade
  double member_share = 0.0;  // DTM members over the whole population
  double switcher_share = 0.0;
  std::size_t population = 0;
  double gap_revenue = 0.0;
};

// L(Q - d) = -kappa [d - Q]^+.
double SatisfactionLoss(double quota_remaining, double demand, double kappa);

// e [p d_h + (1-p) d_l] when `choice` differs from the original operator.
double SwitchingCost(const UserType& user, bool choice, double rate);

// Per-horizon payoff of a DTM member given its bid and transacted quantity.
// The subscription fee is not part of user payoffs. Throws
// std::invalid_argument unless 0 <= transacted <= bid.quantity.
double PayoffDtm(const UserType& user, const Bid& bid,
                 const Rational& transacted, const MarketParams& params,
                 bool switched);

// Per-horizon payoff with a non-DTM operator.
double PayoffNonDtm(const UserType& user, const MarketParams& params,
                    bool switched);

// Subscription-horizon payoff: horizons * U_{i,0} for choice 0 (switching
// cost charged when the user leaves the DTM operator), horizons *
// trading_payoff for choice 1.
double Stage2Payoff(const UserType& user, bool choice,
                    std::optional<double> trading_payoff,
                    const MarketParams& params);

}  // namespace dtm

#endif  // DTM_CORE_MODEL_H_
