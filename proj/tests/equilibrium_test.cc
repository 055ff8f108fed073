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
#include <numeric>
#include <random>
#include <sstream>

#include "dtm/equilibrium.h"

namespace dtm {
namespace {

// Uniform p, point-mass quota and demands, the first floor(alpha n) users
// subscribed to the DTM operator.
std::vector<UserType> Uniform(std::size_t n, std::uint64_t seed,
                              double alpha = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  std::vector<UserType> users(n);
  const auto originals = static_cast<std::size_t>(std::floor(alpha * n));
  for (std::size_t i = 0; i < n; ++i) {
    users[i] = {p(rng), 20.0, 25.0, 15.0, i < originals};
  }
  return users;
}

std::vector<std::size_t> All(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

BidEntry S(UserId id, PriceTick price, std::int64_t q) {
  return {id, {Role::kSeller, price, Rational(q)}};
}
BidEntry B(UserId id, PriceTick price, std::int64_t q) {
  return {id, {Role::kBuyer, price, Rational(q)}};
}

TEST_CASE("trading thresholds") {
  MarketParams params;
  Thresholds t = Stage3Thresholds(30, params);
  CHECK(t.p_low == doctest::Approx(0.5));
  CHECK(t.p_high == doctest::Approx(0.5));
  params.theta = 12;
  t = Stage3Thresholds(12, params);
  CHECK(t.p_low == 0.0);
  CHECK(t.p_high == doctest::Approx(0.2));
  params.theta = 2;
  t = Stage3Thresholds(14, params);
  CHECK(t.p_low == doctest::Approx(0.2));
  CHECK(t.p_high == doctest::Approx(7.0 / 30.0));
}

TEST_CASE("switching thresholds") {
  MarketParams params;
  params.switch_cost_rate = 50;
  Thresholds s = Stage2Thresholds(35, params);
  CHECK(RawStage2Thresholds(35, params).p_low < 0.0);
  CHECK(s.p_low == 0.0);
  params.switch_cost_rate = 6;
  s = Stage2Thresholds(35, params);
  CHECK(s.p_low == doctest::Approx(11.0 / 60.0));
  params.switch_cost_rate = 0;
  for (double theta : {0.0, 7.0, 30.0}) {
    params.theta = theta;
    for (double price = theta; price <= 60; price += 2.5) {
      Thresholds a = Stage2Thresholds(price, params);
      Thresholds b = Stage3Thresholds(price, params);
      CHECK(a.p_low == doctest::Approx(b.p_low));
      CHECK(a.p_high == doctest::Approx(b.p_high));
    }
  }
}

TEST_CASE("closed-form clearing price") {
  MarketParams params;
  CHECK(ClearingPriceClosedForm(0, params) == doctest::Approx(30));
  CHECK(ClearingPriceClosedForm(12, params) == doctest::Approx(36));
  CHECK(ClearingPriceClosedForm(60, params) == doctest::Approx(60));
}

TEST_CASE("continuum trading equilibrium") {
  MarketParams params;
  auto pop = PopulationModel::Continuum();
  EquilibriumOutcome out = Stage3Equilibrium(pop, {}, params);
  CHECK(out.clearing_price == doctest::Approx(30).epsilon(1e-12));
  CHECK(out.supply == doctest::Approx(out.demand));
  CHECK_FALSE(out.no_trade);
  params.theta = 60;
  out = Stage3Equilibrium(pop, {}, params);
  CHECK(out.no_trade);
  CHECK(out.seller_share == 0.0);
}

TEST_CASE("finite trading equilibrium") {
  MarketParams params;
  auto users = Uniform(1000, 3);
  auto pop = PopulationModel::Finite(users);
  EquilibriumOutcome out = Stage3Equilibrium(pop, All(users.size()), params);
  CHECK(std::fabs(out.clearing_price - 30) <= 2 * params.eps);

  SUBCASE("single price and balance") {
    Rational sold, bought;
    for (const UserOutcome& uo : out.users) {
      if (!uo.transacted.IsZero()) CHECK(uo.bid.price == *out.price_tick);
      if (uo.role == TradeRole::kSeller) sold += uo.transacted;
      if (uo.role == TradeRole::kBuyer) bought += uo.transacted;
    }
    CHECK(sold == bought);
    CHECK(out.traded_volume == doctest::Approx(std::min(out.supply, out.demand)));
  }

  SUBCASE("chosen price balances best on the grid") {
    double best = std::fabs(out.supply - out.demand);
    for (PriceTick t = 0; t <= params.MaxTick(); ++t) {
      Thresholds raw = RawStage3Thresholds(params.PriceOf(t), params);
      double s = 0, d = 0;
      for (const UserType& u : users) {
        if (u.p <= raw.p_low) {
          s += u.SellQuantity();
        } else if (u.p >= raw.p_high) {
          d += u.BuyQuantity();
        }
      }
      CHECK(best <= std::fabs(s - d) + 1e-9);
    }
  }

  SUBCASE("prohibitive fee stops trade") {
    params.theta = 60;
    EquilibriumOutcome none = Stage3Equilibrium(pop, All(users.size()), params);
    CHECK(none.no_trade);
    for (const UserOutcome& uo : none.users) CHECK(uo.bid.IsZero());
  }

  SUBCASE("empty member set") {
    CHECK_THROWS_AS(Stage3Equilibrium(pop, {}, params), std::invalid_argument);
  }
}

TEST_CASE("price is nondecreasing in the fee") {
  MarketParams params;
  params.eps = 0.5;
  auto users = Uniform(500, 9);
  auto pop = PopulationModel::Finite(users);
  double last_finite = -1, last_continuum = -1;
  for (double theta = 0; theta <= 60; theta += 2) {
    params.theta = theta;
    double f = Stage3Equilibrium(pop, All(users.size()), params).clearing_price;
    double c = Stage2Equilibrium(PopulationModel::Continuum(), params)
                   .clearing_price;
    CHECK(f >= last_finite);
    CHECK(c >= last_continuum - 1e-9);
    last_finite = f;
    last_continuum = c;
  }
}

TEST_CASE("finite price approaches the continuum price") {
  MarketParams params;
  params.eps = 0.01;
  double previous = 1e9;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    double err = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto pop = PopulationModel::Finite(Uniform(n, 1000 + seed));
      err += std::fabs(Stage3Equilibrium(pop, All(n), params).clearing_price -
                       30);
    }
    err /= 20;
    CHECK(err <= previous);
    previous = err;
  }
  // Median-of-p sampling noise: about 60 * 0.4 / sqrt(n) at n = 10000.
  CHECK(previous < 0.5);
}

TEST_CASE("operator selection") {
  MarketParams params;
  UserType stay{0.5, 20, 25, 15, true};
  CHECK(Stage2BestResponse(stay, 0, params));
  CHECK(Stage2BestResponse(stay, 60, params));
  UserType middle{0.5, 20, 25, 15, false};
  CHECK_FALSE(Stage2BestResponse(middle, 36, params));
  params.switch_cost_rate = 1;
  UserType light{0.0, 20, 25, 15, false};
  CHECK(Stage2BestResponse(light, 36, params));
}

TEST_CASE("operator-selection equilibrium") {
  MarketParams params;
  params.theta = 12;
  EquilibriumOutcome c = Stage2Equilibrium(PopulationModel::Continuum(), params);
  CHECK(c.clearing_price == doctest::Approx(36).epsilon(1e-12));
  CHECK(c.switcher_share == 0.0);

  params.switch_cost_rate = 3;
  c = Stage2Equilibrium(PopulationModel::Continuum(), params);
  CHECK(c.clearing_price == doctest::Approx(36).epsilon(1e-12));
  CHECK(c.switcher_share > 0.0);
  CHECK(c.supply == doctest::Approx(c.demand));

  params.switch_cost_rate = 50;
  auto users = Uniform(2000, 5, 0.5);
  EquilibriumOutcome f = Stage2Equilibrium(PopulationModel::Finite(users), params);
  CHECK(std::fabs(f.clearing_price - 36) <= 2 * params.eps);
  CHECK(f.users.size() == users.size());

  SUBCASE("no switching once the cost rate reaches kappa") {
    params.switch_cost_rate = 60;
    for (double theta : {0.0, 12.0, 30.0}) {
      params.theta = theta;
      EquilibriumOutcome g =
          Stage2Equilibrium(PopulationModel::Finite(users), params);
      CHECK(g.switcher_share == 0.0);
      for (const UserOutcome& uo : g.users) {
        CHECK(uo.dtm_member == users[uo.user].original_dtm);
      }
      CHECK(Stage2Equilibrium(PopulationModel::Continuum(), params)
                .switcher_share == 0.0);
    }
  }
}

TEST_CASE("best response against the example book") {
  MarketParams params;
  BidBook book({S(1, 13, 10), S(2, 15, 15), S(3, 16, 5), B(4, 15, 5),
                B(5, 14, 15), B(6, 13, 10)});
  UserType light{0.0, 6, 8, 5, true};
  Bid sell = Stage3BestResponse(light, book, params);
  CHECK(sell.role == Role::kSeller);
  CHECK(sell.price == 14);
  CHECK(sell.quantity == Rational(1));

  UserType heavy{1.0, 20, 21, 15, true};
  Bid buy = Stage3BestResponse(heavy, book, params);
  CHECK(buy.role == Role::kBuyer);
  CHECK(buy.price == 14);
  CHECK(buy.quantity == Rational(1));

  UserType middle{0.22, 20, 25, 15, true};  // between 12/60 and 14/60
  params.theta = 2;
  Bid idle = Stage3BestResponse(middle, book, params);
  CHECK(idle.IsZero());
}

TEST_CASE("deviation scan") {
  MarketParams params;
  auto users = Uniform(60, 21);
  auto pop = PopulationModel::Finite(users);
  NashScanOptions options;
  options.threads = 4;
  for (double theta : {0.0, 12.0}) {
    params.theta = theta;
    EquilibriumOutcome out = Stage3Equilibrium(pop, All(users.size()), params);
    NashReport report = VerifyNash(out, pop, params, options);
    CHECK(report.users_checked == users.size());
    CHECK(report.max_gain <= params.eps * 5 + 1e-9);
  }

  SUBCASE("raised seller price is detected") {
    params.theta = 0;
    EquilibriumOutcome out = Stage3Equilibrium(pop, All(users.size()), params);
    std::size_t victim = out.users.size();
    for (std::size_t k = 0; k < out.users.size(); ++k) {
      if (out.users[k].role == TradeRole::kSeller) {
        victim = k;
        break;
      }
    }
    REQUIRE(victim < out.users.size());
    out.users[victim].bid.price += 3;
    NashReport report = VerifyNash(out, pop, params, options);
    CHECK(report.max_gain > 1.0);
    CHECK(report.worst_user == out.users[victim].user);
  }

  SUBCASE("no profitable deviation from the all-zero profile") {
    params.theta = 60;
    EquilibriumOutcome out = Stage3Equilibrium(pop, All(users.size()), params);
    REQUIRE(out.no_trade);
    NashReport report = VerifyNash(out, pop, params, options);
    CHECK(report.max_gain <= 1e-9);
  }

  SUBCASE("sampled scan is deterministic") {
    params.theta = 12;
    EquilibriumOutcome out = Stage3Equilibrium(pop, All(users.size()), params);
    options.sample = 10;
    options.seed = 4;
    NashReport a = VerifyNash(out, pop, params, options);
    options.threads = 1;
    NashReport b = VerifyNash(out, pop, params, options);
    CHECK(a.checked == b.checked);
    CHECK(a.gains == b.gains);
    CHECK(a.users_checked == 10);
  }
}

TEST_CASE("deviation quantities") {
  UserType u{0.5, 20, 25, 15, true};
  auto q = DefaultDeviationQuantities(u);
  CHECK(q == std::vector<Rational>{Rational(0), Rational(5, 2), Rational(5)});
  UserType v{0.5, 20, 28, 15, true};
  q = DefaultDeviationQuantities(v);
  CHECK(q == std::vector<Rational>{Rational(0), Rational(5, 2), Rational(4),
                                   Rational(5), Rational(13, 2), Rational(8)});
}

TEST_CASE("outcome record") {
  MarketParams params;
  EquilibriumOutcome out = Stage3Equilibrium(PopulationModel::Continuum(), {},
                                             params);
  std::ostringstream os;
  WriteOutcomeRecord(os, out, params);
  CHECK(os.str().find("mode=continuum\n") != std::string::npos);
  CHECK(os.str().find("clearing_price=30\n") != std::string::npos);
}

}  // namespace
}  // namespace dtm
