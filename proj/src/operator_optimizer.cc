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

#include "dtm/operator_optimizer.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "dtm/auction.h"
#include "dtm/equilibrium.h"

namespace dtm {
namespace {

constexpr double kRelativeTolerance = 1e-12;

double Clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Population fractions at fee theta.
struct Fractions {
  double low = 0.0;         // P_L
  double high = 0.0;        // P_H
  double switch_low = 0.0;  // P_L'
  double switch_high = 0.0; // P_H'
};

Fractions RawFractions(double theta, const MarketParams& params) {
  MarketParams at = params;
  at.theta = theta;
  const double price = ClearingPriceClosedForm(theta, at);
  Thresholds t = RawStage3Thresholds(price, at);
  Thresholds s = RawStage2Thresholds(price, at);
  return {t.p_low, t.p_high, s.p_low, s.p_high};
}

Fractions ClampedFractions(double theta, const MarketParams& params) {
  Fractions f = RawFractions(theta, params);
  return {Clamp01(f.low), Clamp01(f.high), Clamp01(f.switch_low),
          Clamp01(f.switch_high)};
}

double Margin(const MarketParams& params) {
  return params.beta - 0.5 * params.unit_cost *
                           (params.mean_d_high + params.mean_d_low);
}

// Polynomial of degree at most two in theta.
struct Poly {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

Poly operator+(Poly a, const Poly& b) {
  return {a.c0 + b.c0, a.c1 + b.c1, a.c2 + b.c2};
}
Poly operator-(Poly a, const Poly& b) {
  return {a.c0 - b.c0, a.c1 - b.c1, a.c2 - b.c2};
}
Poly operator*(double k, const Poly& a) { return {k * a.c0, k * a.c1, k * a.c2}; }
// Product of two linear polynomials.
Poly Times(const Poly& a, const Poly& b) {
  return {a.c0 * b.c0, a.c0 * b.c1 + a.c1 * b.c0, a.c1 * b.c1};
}

}  // namespace

double BaseProfit(double theta, const MarketParams& params) {
  const Fractions f = ClampedFractions(theta, params);
  const double users = static_cast<double>(params.n_users);
  const double movers = std::max(0.0, f.switch_low + 1.0 - f.switch_high);
  return Margin(params) *
         (params.alpha * users + movers * (1.0 - params.alpha) * users);
}

double FeeRevenue(double theta, const MarketParams& params) {
  const Fractions f = ClampedFractions(theta, params);
  const double users = static_cast<double>(params.n_users);
  return theta * params.SellGap() * users *
         (params.alpha * f.low + (1.0 - params.alpha) * f.switch_low);
}

OverageRevenue OverageRevenueAt(double theta, const MarketParams& params) {
  const Fractions f = ClampedFractions(theta, params);
  const double users = static_cast<double>(params.n_users);
  const double spread = params.mean_d_high - params.mean_d_low;
  const double kappa = params.kappa;
  OverageRevenue out;
  out.sellers = params.alpha * users * kappa * spread * f.low * f.low / 2.0 +
                (1.0 - params.alpha) * users * kappa * spread * f.switch_low *
                    f.switch_low / 2.0;
  out.no_trade = params.alpha * users * kappa * params.BuyGap() *
                 std::max(0.0, f.high - f.low) * (f.low + f.high) / 2.0;
  return out;
}

ProfitBreakdown TotalProfit(double theta, const MarketParams& params) {
  ProfitBreakdown row;
  row.theta = theta;
  row.base = BaseProfit(theta, params);
  row.fee_revenue = FeeRevenue(theta, params);
  OverageRevenue overage = OverageRevenueAt(theta, params);
  row.overage_sellers = overage.sellers;
  row.overage_no_trade = overage.no_trade;
  row.build_cost = params.build_cost;
  row.total = row.base + row.fee_revenue + row.overage_sellers +
              row.overage_no_trade - row.build_cost;
  return row;
}

ProfitQuadratic UnclampedProfit(const MarketParams& params) {
  const double a = params.BuyGap();
  const double b = params.SellGap();
  const double h = a + b;
  const double kappa = params.kappa;
  const double alpha = params.alpha;
  const double users = static_cast<double>(params.n_users);
  const double cost =
      0.5 * params.switch_cost_rate * (params.mean_d_high + params.mean_d_low);

  const Poly one{1.0, 0.0, 0.0};
  const Poly theta{0.0, 1.0, 0.0};
  const Poly low{a / h, -a / (h * kappa), 0.0};
  const Poly high{a / h, b / (h * kappa), 0.0};
  const Poly switch_low = low - Poly{cost / (kappa * b), 0.0, 0.0};
  const Poly switch_high = high + Poly{cost / (kappa * a), 0.0, 0.0};

  const Poly base =
      Margin(params) * (alpha * users * one +
                        (1.0 - alpha) * users * (switch_low + one - switch_high));
  const Poly fee = users * b *
                   (alpha * Times(theta, low) +
                    (1.0 - alpha) * Times(theta, switch_low));
  const Poly sellers =
      0.5 * users * kappa * h *
      (alpha * Times(low, low) + (1.0 - alpha) * Times(switch_low, switch_low));
  const Poly idle =
      0.5 * alpha * users * kappa * a * Times(high - low, low + high);
  const Poly total =
      base + fee + sellers + idle - Poly{params.build_cost, 0.0, 0.0};
  return {total.c0, total.c1, total.c2};
}

double OptimalFee(const MarketParams& params) {
  params.Validate();
  const ProfitQuadratic p = UnclampedProfit(params);
  const double scale = std::fabs(p.c1) + std::fabs(p.c2) * params.kappa + 1.0;
  if (std::fabs(p.c2) * params.kappa <= kRelativeTolerance * scale) {
    throw DegenerateParameters("optimal fee: profit is linear in the fee");
  }
  return std::clamp(-p.c1 / (2.0 * p.c2), 0.0, params.kappa);
}

double OptimalFeeReference(const MarketParams& params) {
  params.Validate();
  const double a = params.BuyGap();
  const double b = params.SellGap();
  const double h = a + b;
  const double kappa = params.kappa;
  const double alpha = params.alpha;
  const double num = Margin(params) * (alpha - 1.0) * b * b -
                     0.5 * a * a * h * kappa + 0.5 * alpha * a * b * b * kappa;
  const double den =
      (2.0 - alpha) * a * b * b + 2.0 * alpha * a * a * b - a * a * h;
  if (den == 0.0) {
    throw DegenerateParameters("reference optimal fee: zero denominator");
  }
  return std::clamp(kappa / 2.0 + num / den, 0.0, kappa);
}

double OptimalFeeNumeric(const MarketParams& params, double grid_step) {
  params.Validate();
  if (!(grid_step > 0.0)) {
    throw std::invalid_argument("optimal fee: grid step must be positive");
  }
  const auto steps =
      static_cast<std::int64_t>(std::floor(params.kappa / grid_step + 1e-9));
  double best_theta = 0.0;
  double best = TotalProfit(0.0, params).total;
  auto consider = [&](double theta) {
    double value = TotalProfit(theta, params).total;
    if (value > best) {
      best = value;
      best_theta = theta;
    }
  };
  for (std::int64_t k = 1; k <= steps; ++k) {
    consider(std::min(params.kappa, static_cast<double>(k) * grid_step));
  }
  if (static_cast<double>(steps) * grid_step < params.kappa) {
    consider(params.kappa);
  }
  return best_theta;
}

FeeSolution SolveOptimalFee(const MarketParams& params, double grid_step) {
  params.Validate();
  if (grid_step <= 0.0) grid_step = params.kappa / 10000.0;
  FeeSolution sol;
  const double grid = OptimalFeeNumeric(params, grid_step);
  auto negative = [&](double theta) { return -TotalProfit(theta, params).total; };
  const double lo = std::max(0.0, grid - grid_step);
  const double hi = std::min(params.kappa, grid + grid_step);
  auto refined = boost::math::tools::brent_find_minima(negative, lo, hi, 50);
  sol.numeric = -refined.second > TotalProfit(grid, params).total
                    ? refined.first
                    : grid;
  const double numeric_profit = TotalProfit(sol.numeric, params).total;

  const ProfitQuadratic quad = UnclampedProfit(params);
  bool concave = quad.c2 < 0.0;
  try {
    sol.closed_form = OptimalFee(params);
  } catch (const DegenerateParameters&) {
    sol.closed_form = sol.numeric;
    concave = false;
  }
  const Fractions f = RawFractions(sol.closed_form, params);
  const bool interior = f.low >= 0.0 && f.low <= 1.0 && f.high >= 0.0 &&
                        f.high <= 1.0 && f.switch_low >= 0.0 &&
                        f.switch_low <= 1.0 && f.switch_high >= 0.0 &&
                        f.switch_high <= 1.0;
  const double closed_profit = TotalProfit(sol.closed_form, params).total;
  const double slack = 1e-9 * (1.0 + std::fabs(numeric_profit));
  sol.closed_form_trusted =
      concave && interior && closed_profit >= numeric_profit - slack;
  sol.theta = sol.closed_form_trusted ? sol.closed_form : sol.numeric;
  sol.profit = TotalProfit(sol.theta, params).total;
  return sol;
}

double BaselineProfit(const MarketParams& params) {
  const double users = static_cast<double>(params.n_users);
  return params.alpha * users *
         (params.kappa * params.BuyGap() / 2.0 -
          (params.mean_d_high + params.mean_d_low) * params.unit_cost / 2.0 +
          params.beta);
}

double MarketShareThresholdReference(const MarketParams& params) {
  const double dh = params.mean_d_high;
  const double dl = params.mean_d_low;
  const double q = params.mean_quota;
  const double beta = params.beta;
  const double cb = params.build_cost;
  const double kappa = params.kappa;
  const double num = (dl - q) * (-2.0 * beta + cb * (dh + dl) +
                                 2.0 * kappa * (q - dh));
  const double den = -2.0 * dh * dh * kappa - 2.0 * beta * dl + cb * dl * dl +
                     2.0 * beta * q - cb * dl * q + 2.0 * kappa * dl * q -
                     4.0 * kappa * q * q +
                     dh * (cb * dl - 2.0 * kappa * dl - cb * q + 2.0 * kappa * q);
  if (den == 0.0) {
    throw DegenerateParameters("reference market-share threshold: zero "
                               "denominator");
  }
  return num / den;
}

ThresholdResult MarketShareThreshold(const MarketParams& params,
                                     int scan_points) {
  params.Validate();
  if (scan_points < 2) {
    throw std::invalid_argument("market-share threshold: need >= 2 points");
  }
  const double grid_step = params.kappa / 2000.0;
  auto margin = [&](double alpha) {
    MarketParams at = params;
    at.alpha = alpha;
    return SolveOptimalFee(at, grid_step).profit - BaselineProfit(at);
  };
  const double first = 1e-6;
  std::vector<double> alphas;
  alphas.push_back(first);
  for (int k = 1; k <= scan_points; ++k) {
    alphas.push_back(static_cast<double>(k) / scan_points);
  }
  std::vector<double> values;
  values.reserve(alphas.size());
  for (double a : alphas) values.push_back(margin(a));

  ThresholdResult result;
  for (std::size_t k = 1; k < alphas.size(); ++k) {
    const bool before = values[k - 1] > 0.0;
    const bool after = values[k] > 0.0;
    if (before == after) continue;
    result.kind = ThresholdResult::Kind::kCrossing;
    result.deploy_below = before;
    if (values[k] == 0.0) {
      result.alpha = alphas[k];
      return result;
    }
    std::uintmax_t iterations = 200;
    auto bracket = boost::math::tools::toms748_solve(
        margin, alphas[k - 1], alphas[k], values[k - 1], values[k],
        boost::math::tools::eps_tolerance<double>(40), iterations);
    result.alpha = 0.5 * (bracket.first + bracket.second);
    return result;
  }
  result.kind = values.front() > 0.0 ? ThresholdResult::Kind::kAlwaysDeploy
                                     : ThresholdResult::Kind::kNeverDeploy;
  result.deploy_below = values.front() > 0.0;
  return result;
}

DeployDecision ShouldDeploy(const MarketParams& params) {
  FeeSolution sol = SolveOptimalFee(params);
  DeployDecision d;
  d.theta_star = sol.theta;
  d.margin = sol.profit - BaselineProfit(params);
  d.deploy = d.margin > 0.0;
  return d;
}

void WriteProfitCsv(std::ostream& out, const std::vector<ProfitBreakdown>& rows) {
  out << "theta,base,fee_revenue,overage_sellers,overage_no_trade,build_cost,"
         "total\n";
  for (const ProfitBreakdown& r : rows) {
    out << FormatNumber(r.theta) << ',' << FormatNumber(r.base) << ','
        << FormatNumber(r.fee_revenue) << ',' << FormatNumber(r.overage_sellers)
        << ',' << FormatNumber(r.overage_no_trade) << ','
        << FormatNumber(r.build_cost) << ',' << FormatNumber(r.total) << '\n';
  }
}

}  // namespace dtm
