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

#ifndef DTM_OPERATOR_OPTIMIZER_H_
#define DTM_OPERATOR_OPTIMIZER_H_

#include <iosfwd>
#include <vector>

#include "dtm/core_model.h"

// Operator-side analysis in the continuum limit: profit as a function of the
// operation fee, the optimal fee, the profit without a trading platform,
// and the market share below which launching the platform pays off.
namespace dtm {

struct ProfitBreakdown {
  double theta = 0.0;
  double base = 0.0;              // subscriptions minus service cost
  double fee_revenue = 0.0;       // operation fee on sold data
  double overage_sellers = 0.0;   // overage charged to sellers
  double overage_no_trade = 0.0;  // overage charged to idle DTM members
  double build_cost = 0.0;
  double total = 0.0;
};

// Profit components at fee `theta`, with the clearing price from
// ClearingPriceClosedForm and all population fractions clamped to [0,1].
double BaseProfit(double theta, const MarketParams& params);
double FeeRevenue(double theta, const MarketParams& params);

struct OverageRevenue {
  double sellers = 0.0;
  double no_trade = 0.0;
  double Total() const { return sellers + no_trade; }
};
OverageRevenue OverageRevenueAt(double theta, const MarketParams& params);

ProfitBreakdown TotalProfit(double theta, const MarketParams& params);

// Coefficients of the unclamped profit c0 + c1 theta + c2 theta^2. It
// coincides with TotalProfit wherever every fraction is inside [0,1].
struct ProfitQuadratic {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double operator()(double theta) const {
    return c0 + theta * (c1 + theta * c2);
  }
};
ProfitQuadratic UnclampedProfit(const MarketParams& params);

// Stationary point of the unclamped profit, clamped to [0, kappa]. Throws
// DegenerateParameters when the profit is linear in theta.
double OptimalFee(const MarketParams& params);

// Reference closed form for the fee, clamped to [0, kappa]. Kept for
// comparison; it does not solve the first-order condition of TotalProfit.
double OptimalFeeReference(const MarketParams& params);

// Grid argmax of TotalProfit over {0, step, 2 step, ...} plus kappa; ties go
// to the smaller fee.
double OptimalFeeNumeric(const MarketParams& params, double grid_step);

struct FeeSolution {
  double theta = 0.0;        // authoritative choice
  double closed_form = 0.0;  // OptimalFee
  double numeric = 0.0;      // grid argmax refined by a bracketed search
  bool closed_form_trusted = false;
  double profit = 0.0;       // TotalProfit(theta).total
};

// Uses the closed form when the unclamped profit is concave, every fraction
// is interior at the closed-form fee, and no grid point does better;
// otherwise the refined numeric maximizer.
FeeSolution SolveOptimalFee(const MarketParams& params, double grid_step = 0.0);

// Profit without the trading platform.
double BaselineProfit(const MarketParams& params);

// Reference closed form for the market-share threshold. Throws
// DegenerateParameters on a zero denominator.
double MarketShareThresholdReference(const MarketParams& params);

struct ThresholdResult {
  enum class Kind { kCrossing, kAlwaysDeploy, kNeverDeploy };
  Kind kind = Kind::kNeverDeploy;
  double alpha = 0.0;  // the crossing, when kind == kCrossing
  // True when the margin is positive just below the crossing.
  bool deploy_below = true;
};

// Root in alpha of P(theta*(alpha)) - P_0(alpha), located by a sign scan on
// `scan_points` shares in (0,1] and refined with a bracketing solver.
ThresholdResult MarketShareThreshold(const MarketParams& params,
                                     int scan_points = 200);

struct DeployDecision {
  bool deploy = false;
  double margin = 0.0;  // P(theta*) - P_0
  double theta_star = 0.0;
};
DeployDecision ShouldDeploy(const MarketParams& params);

// CSV with columns theta,base,fee_revenue,overage_sellers,overage_no_trade,
// build_cost,total.
void WriteProfitCsv(std::ostream& out, const std::vector<ProfitBreakdown>& rows);

}  // namespace dtm

#endif  // DTM_OPERATOR_OPTIMIZER_H_
