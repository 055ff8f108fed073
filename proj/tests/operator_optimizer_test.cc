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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "dtm/operator_optimizer.h"

namespace dtm {
namespace {

// Exact second derivative of the unclamped profit in the fee, derived by
// hand from the component formulas with the closed-form clearing price.
double Curvature(const MarketParams& p) {
  const double a = p.mean_d_high - p.mean_quota;
  const double b = p.mean_quota - p.mean_d_low;
  return -static_cast<double>(p.n_users) * a *
         (a * (p.alpha - 1.0) + b * (2.0 - p.alpha)) / (p.kappa * (a + b));
}

MarketParams RandomParams(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MarketParams p;
  p.kappa = std::round(30.0 + 60.0 * u(rng));
  p.mean_d_low = 5.0 + 15.0 * u(rng);
  p.mean_quota = p.mean_d_low + 1.0 + 10.0 * u(rng);
  p.mean_d_high = p.mean_quota + 1.0 + 10.0 * u(rng);
  p.alpha = 0.05 + 0.9 * u(rng);
  p.beta = 300.0 + 500.0 * u(rng);
  p.unit_cost = 5.0 + 20.0 * u(rng);
  p.switch_cost_rate = 0.0;
  p.build_cost = 100.0;
  return p;
}

TEST_CASE("base profit") {
  MarketParams p;
  p.switch_cost_rate = 0;
  CHECK(BaseProfit(0, p) == doctest::Approx(100000));
  p.alpha = 1;
  for (double theta : {0.0, 10.0, 45.0}) {
    CHECK(BaseProfit(theta, p) == doctest::Approx((500 - 400) * 1000.0));
  }
  p.alpha = 0.5;
  p.switch_cost_rate = 60;
  CHECK(BaseProfit(12, p) == doctest::Approx(100.0 * 500.0));
}

TEST_CASE("fee revenue") {
  MarketParams p;
  CHECK(FeeRevenue(0, p) == 0.0);
  CHECK(FeeRevenue(60, p) == doctest::Approx(0.0));
  p.alpha = 1;
  p.switch_cost_rate = 0;
  CHECK(FeeRevenue(12, p) == doctest::Approx(24000));
}

TEST_CASE("overage revenue") {
  MarketParams p;
  p.alpha = 1;
  OverageRevenue o = OverageRevenueAt(0, p);
  CHECK(o.no_trade == doctest::Approx(0.0));
  CHECK(o.sellers == doctest::Approx(1000.0 * 30 * 30 * 10 / (2 * 60)));
  // theta = 12: sellers p <= 0.4, idle 0.4 < p < 0.6.
  o = OverageRevenueAt(12, p);
  CHECK(o.sellers == doctest::Approx(1000.0 * 60 * 10 * 0.4 * 0.4 / 2));
  CHECK(o.no_trade == doctest::Approx(1000.0 * 60 * 5 * 0.2 * 0.5));
}

TEST_CASE("profit decomposition") {
  MarketParams p;
  for (double theta = 0; theta <= 60; theta += 1.5) {
    ProfitBreakdown r = TotalProfit(theta, p);
    CHECK(r.total == doctest::Approx(r.base + r.fee_revenue +
                                     r.overage_sellers + r.overage_no_trade -
                                     r.build_cost));
  }
  p.build_cost = 0;
  p.alpha = 1;
  ProfitBreakdown r = TotalProfit(60, p);
  CHECK(r.fee_revenue == doctest::Approx(0.0));
  CHECK(r.total == doctest::Approx(r.base + r.overage_sellers + r.overage_no_trade));
}

TEST_CASE("unclamped profit matches where fractions are interior") {
  std::mt19937_64 rng(5);
  for (int draw = 0; draw < 50; ++draw) {
    MarketParams p = RandomParams(rng);
    ProfitQuadratic q = UnclampedProfit(p);
    CHECK(2.0 * q.c2 == doctest::Approx(Curvature(p)).epsilon(1e-9));
    for (double theta = 0; theta <= p.kappa; theta += p.kappa / 17) {
      CHECK(q(theta) == doctest::Approx(TotalProfit(theta, p).total));
    }
  }
}

TEST_CASE("closed-form and numeric optimal fees agree") {
  std::mt19937_64 rng(17);
  int interior = 0;
  for (int draw = 0; draw < 400 && interior < 100; ++draw) {
    MarketParams p = RandomParams(rng);
    if (Curvature(p) >= 0) continue;
    double cf = OptimalFee(p);
    if (cf <= 0 || cf >= p.kappa) continue;
    ++interior;
    double step = p.kappa / 10000;
    CHECK(std::fabs(cf - OptimalFeeNumeric(p, step)) <= step);
    FeeSolution sol = SolveOptimalFee(p);
    CHECK(sol.closed_form_trusted);
    CHECK(sol.theta == doctest::Approx(cf));
  }
  CHECK(interior >= 100);
}

TEST_CASE("clamped optimal fees") {
  MarketParams p;
  p.switch_cost_rate = 0;
  p.alpha = 1;
  // With alpha = 1 the stationary point lies beyond kappa for the defaults.
  CHECK(OptimalFee(p) == doctest::Approx(60));
  CHECK(OptimalFeeNumeric(p, 0.01) == doctest::Approx(60));
  double reference = OptimalFeeReference(p);
  CHECK(reference >= 0.0);
  CHECK(reference <= p.kappa);
}

TEST_CASE("numeric search ties go to the smaller fee") {
  MarketParams p;
  p.alpha = 0;  // nobody trades without switchers: flat profit
  p.switch_cost_rate = 60;
  CHECK(OptimalFeeNumeric(p, 1.0) == 0.0);
  CHECK_THROWS_AS(OptimalFeeNumeric(p, 0.0), std::invalid_argument);
}

TEST_CASE("profit is concave on the grid for e = 0") {
  std::mt19937_64 rng(23);
  for (int draw = 0; draw < 50; ++draw) {
    MarketParams p = RandomParams(rng);
    if (Curvature(p) > 0) continue;
    const double h = p.kappa / 200;
    for (int k = 1; k < 200; ++k) {
      double second = TotalProfit((k + 1) * h, p).total -
                      2 * TotalProfit(k * h, p).total +
                      TotalProfit((k - 1) * h, p).total;
      CHECK(second <= 1e-6 * std::fabs(TotalProfit(k * h, p).total) + 1e-6);
    }
  }
}

TEST_CASE("baseline profit") {
  MarketParams p;
  CHECK(BaselineProfit(p) == doctest::Approx(125000));
  MarketParams double_share = p;
  double_share.alpha = 1.0;
  CHECK(BaselineProfit(double_share) == doctest::Approx(2 * BaselineProfit(p)));
  p.alpha = 0;
  CHECK(BaselineProfit(p) == 0.0);
}

TEST_CASE("market-share threshold sign consistency") {
  MarketParams p;
  p.mean_quota = 22;
  p.switch_cost_rate = 0;
  p.beta = 600;
  ThresholdResult r = MarketShareThreshold(p);
  REQUIRE(r.kind == ThresholdResult::Kind::kCrossing);
  CHECK(r.deploy_below);
  auto margin = [&](double alpha) {
    MarketParams at = p;
    at.alpha = alpha;
    return ShouldDeploy(at).margin;
  };
  CHECK(margin(r.alpha / 2) > 0);
  CHECK(margin(std::min(1.0, 1.5 * r.alpha)) < 0);
  CHECK(std::fabs(margin(r.alpha)) < 1.0);
}

TEST_CASE("deployment decision") {
  MarketParams p;
  p.mean_quota = 22;
  p.switch_cost_rate = 0;
  p.beta = 600;
  p.alpha = 0.01;
  CHECK(ShouldDeploy(p).deploy);
  p.alpha = 1;
  p.build_cost = 1e9;
  DeployDecision d = ShouldDeploy(p);
  CHECK_FALSE(d.deploy);
  CHECK(d.margin < 0);
}

TEST_CASE("reference threshold rejects a vanishing denominator") {
  MarketParams p;
  // The denominator is linear in beta; pick beta at its root.
  p.build_cost = 0;
  p.kappa = 60;
  const double dh = p.mean_d_high, dl = p.mean_d_low, q = p.mean_quota;
  const double rest = -2 * dh * dh * p.kappa + 2 * p.kappa * dl * q -
                      4 * p.kappa * q * q + dh * (-2 * p.kappa * dl +
                                                   2 * p.kappa * q);
  p.beta = -rest / (2 * (q - dl));
  CHECK_THROWS_AS(MarketShareThresholdReference(p), DegenerateParameters);
}

TEST_CASE("profit csv") {
  std::ostringstream out;
  WriteProfitCsv(out, {TotalProfit(0, MarketParams())});
  CHECK(out.str().rfind(
            "theta,base,fee_revenue,overage_sellers,overage_no_trade,"
            "build_cost,total\n0,",
            0) == 0);
}

}  // namespace
}  // namespace dtm
