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

#include "dtm/core_model.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dtm {
namespace {

std::string Describe(const char* what, double value) {
  std::ostringstream out;
  out << what << " (got " << value << ")";
  return out.str();
}

}  // namespace

char RoleCode(Role role) { return role == Role::kSeller ? 's' : 'b'; }

std::string TradeRoleName(TradeRole role) {
  switch (role) {
    case TradeRole::kSeller:
      return "seller";
    case TradeRole::kBuyer:
      return "buyer";
    case TradeRole::kNoTrade:
      return "no_trade";
  }
  return "unknown";
}

void UserType::Validate() const {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError(Describe("user: p must lie in [0,1]", p));
  }
  if (!(d_low > 0.0 && d_low < quota && quota < d_high)) {
    throw ParameterError("user: requires 0 < d_low < quota < d_high");
  }
}

void MarketParams::Validate() const {
  if (!(kappa > 0.0)) throw ParameterError(Describe("kappa must be > 0", kappa));
  if (!(theta >= 0.0 && theta <= kappa)) {
    throw ParameterError(Describe("theta must lie in [0, kappa]", theta));
  }
  if (!(eps > 0.0)) throw ParameterError(Describe("eps must be > 0", eps));
  double steps = kappa / eps;
  if (std::fabs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
    throw ParameterError("kappa must be a whole number of price steps eps");
  }
  if (!(switch_cost_rate >= 0.0)) {
    throw ParameterError(
        Describe("switching cost rate must be >= 0", switch_cost_rate));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ParameterError(Describe("alpha must lie in [0,1]", alpha));
  }
  if (!(unit_cost >= 0.0)) {
    throw ParameterError(Describe("unit cost must be >= 0", unit_cost));
  }
  if (!(build_cost >= 0.0)) {
    throw ParameterError(Describe("build cost must be >= 0", build_cost));
  }
  if (n_users < 1) throw ParameterError("n_users must be >= 1");
  if (horizons < 1) throw ParameterError("horizons must be >= 1");
  if (!(mean_d_low > 0.0 && mean_d_low < mean_quota &&
        mean_quota < mean_d_high)) {
    throw ParameterError("requires 0 < D_l < Q < D_h");
  }
}

PriceTick MarketParams::MaxTick() const {
  return static_cast<PriceTick>(std::llround(kappa / eps));
}

PriceTick MarketParams::TickOf(double price) const {
  double steps = price / eps;
  double rounded = std::round(steps);
  if (std::fabs(steps - rounded) > 1e-9 * std::max(1.0, std::fabs(steps))) {
    throw std::invalid_argument(Describe("price is not on the eps grid", price));
  }
  return static_cast<PriceTick>(rounded);
}

PriceTick MarketParams::NearestTick(double price) const {
  auto tick = static_cast<PriceTick>(std::llround(price / eps));
  return std::clamp<PriceTick>(tick, 0, MaxTick());
}

double SatisfactionLoss(double quota_remaining, double demand, double kappa) {
  return -kappa * std::max(0.0, demand - quota_remaining);
}

double SwitchingCost(const UserType& user, bool choice, double rate) {
  if (choice == user.original_dtm) return 0.0;
  return rate * user.ExpectedUsage();
}

double PayoffDtm(const UserType& user, const Bid& bid,
                 const Rational& transacted, const MarketParams& params,
                 bool switched) {
  if (transacted.IsNegative() || bid.quantity < transacted) {
    throw std::invalid_argument(
        "payoff: transacted quantity must lie in [0, bid quantity]");
  }
  const double r = transacted.ToDouble();
  const double price = params.PriceOf(bid.price);
  const double kappa = params.kappa;
  const double switching =
      switched ? params.switch_cost_rate * user.ExpectedUsage() : 0.0;
  if (bid.role == Role::kSeller) {
    const double remaining = user.quota - r;
    return (price - params.theta) * r +
           user.p * SatisfactionLoss(remaining, user.d_high, kappa) +
           (1.0 - user.p) * SatisfactionLoss(remaining, user.d_low, kappa) -
           switching;
  }
  const double remaining = user.quota + r;
  return -price * r +
         user.p * SatisfactionLoss(remaining, user.d_high, kappa) +
         (1.0 - user.p) * SatisfactionLoss(remaining, user.d_low, kappa) -
         switching;
}

double PayoffNonDtm(const UserType& user, const MarketParams& params,
                    bool switched) {
  const double switching =
      switched ? params.switch_cost_rate * user.ExpectedUsage() : 0.0;
  return user.p * SatisfactionLoss(user.quota, user.d_high, params.kappa) +
         (1.0 - user.p) *
             SatisfactionLoss(user.quota, user.d_low, params.kappa) -
         switching;
}

double Stage2Payoff(const UserType& user, bool choice,
                    std::optional<double> trading_payoff,
                    const MarketParams& params) {
  const auto horizons = static_cast<double>(params.horizons);
  if (!choice) {
    return horizons * PayoffNonDtm(user, params, user.original_dtm);
  }
  if (!trading_payoff) {
    throw std::invalid_argument(
        "stage-2 payoff: a trading payoff is required for choice 1");
  }
  return horizons * *trading_payoff;
}

}  // namespace dtm
