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

#include "dtm/equilibrium.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "dtm/parallel.h"
namespace dtm {
namespace {

// Slack for p-versus-threshold comparisons, so that a user whose p equals a
// cutoff up to rounding is treated as on the cutoff.
constexpr double kThresholdSlack = 1e-12;
constexpr int kContinuumIterations = 200;

double Clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Users sorted by p with prefix sums of a per-user quantity.
class Curve {
 public:
  void Add(double p, double quantity) { items_.emplace_back(p, quantity); }

  void Finish() {
    std::sort(items_.begin(), items_.end());
    prefix_.assign(items_.size() + 1, 0.0);
    for (std::size_t i = 0; i < items_.size(); ++i) {
      prefix_[i + 1] = prefix_[i] + items_[i].second;
    }
  }

  // Sum over users with p <= cutoff.
  double AtMost(double cutoff) const { return prefix_[UpperIndex(cutoff)]; }

  // Sum over users with p >= cutoff that are not already counted by
  // AtMost(sell_cutoff).
  double AtLeast(double cutoff, double sell_cutoff) const {
    auto it = std::lower_bound(
        items_.begin(), items_.end(), cutoff - kThresholdSlack,
        [](const std::pair<double, double>& item, double v) {
          return item.first < v;
        });
    std::size_t start = std::max<std::size_t>(it - items_.begin(),
                                              UpperIndex(sell_cutoff));
    return prefix_.back() - prefix_[start];
  }

 private:
  std::size_t UpperIndex(double cutoff) const {
    auto it = std::upper_bound(
        items_.begin(), items_.end(), cutoff + kThresholdSlack,
        [](double v, const std::pair<double, double>& item) {
          return v < item.first;
        });
    return static_cast<std::size_t>(it - items_.begin());
  }

  std::vector<std::pair<double, double>> items_;
  std::vector<double> prefix_;
};

// Lowest tick with excess >= 0, or its predecessor when that balances
// supply and demand more closely.
PriceTick SolveGrid(const std::function<double(PriceTick)>& excess,
                    PriceTick max_tick) {
  const double at_zero = excess(0);
  const double at_max = excess(max_tick);
  if (at_zero > at_max + 1e-9 * (1.0 + std::fabs(at_max))) {
    throw std::logic_error("equilibrium: excess supply is not monotone");
  }
  PriceTick t = max_tick;
  if (at_zero >= 0.0) {
    t = 0;
  } else if (at_max >= 0.0) {
    PriceTick lo = 0;  // excess(lo) < 0
    PriceTick hi = max_tick;
    while (hi - lo > 1) {
      PriceTick mid = lo + (hi - lo) / 2;
      if (excess(mid) >= 0.0) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    t = hi;
  }
  if (t > 0 && std::fabs(excess(t - 1)) <= std::fabs(excess(t))) --t;
  return t;
}

// Lowest price in [0, kappa] with excess >= 0 (kappa if none).
double SolveContinuum(const std::function<double(double)>& excess,
                      double kappa) {
  if (excess(0.0) >= 0.0) return 0.0;
  if (excess(kappa) < 0.0) return kappa;
  double lo = 0.0;
  double hi = kappa;
  for (int i = 0; i < kContinuumIterations && hi - lo > 0.0; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (excess(mid) >= 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

// Role profile of the members at `tick`, cleared through the engine.
// With `include_outsiders`, non-members are recorded as idle outsiders.
EquilibriumOutcome TradeAtTick(const std::vector<UserType>& users,
                               const std::vector<std::size_t>& members,
                               const std::vector<bool>& switched,
                               bool include_outsiders, PriceTick tick,
                               const MarketParams& params) {
  EquilibriumOutcome out;
  out.continuum = false;
  out.theta = params.theta;
  out.price_tick = tick;
  out.clearing_price = params.PriceOf(tick);
  out.population = users.size();

  std::vector<bool> is_member(users.size(), false);
  for (std::size_t i : members) is_member[i] = true;

  for (std::size_t i = 0; i < users.size(); ++i) {
    if (!is_member[i] && !include_outsiders) continue;
    const UserType& u = users[i];
    UserOutcome uo;
    uo.user = i;
    uo.dtm_member = is_member[i];
    uo.switched = switched[i];
    if (is_member[i]) {
      uo.role = Stage3Role(u.p, out.clearing_price, params);
      if (uo.role == TradeRole::kSeller) {
        uo.bid = {Role::kSeller, tick, Rational::FromDouble(u.SellQuantity())};
        out.supply += u.SellQuantity();
      } else if (uo.role == TradeRole::kBuyer) {
        uo.bid = {Role::kBuyer, tick, Rational::FromDouble(u.BuyQuantity())};
        out.demand += u.BuyQuantity();
      }
    }
    out.users.push_back(uo);
  }

  out.no_trade = out.supply <= 0.0 || out.demand <= 0.0;
  if (out.no_trade) {
    for (UserOutcome& uo : out.users) {
      if (!uo.dtm_member) continue;
      uo.role = TradeRole::kNoTrade;
      uo.bid = Bid::Zero();
    }
  }

  BidBook book = OutcomeBook(out);
  Allocation alloc = ClearMarket(book);
  std::size_t k = 0;
  std::size_t sellers = 0, buyers = 0, idle = 0, member_count = 0, movers = 0;
  for (UserOutcome& uo : out.users) {
    const UserType& u = users[uo.user];
    if (uo.switched) ++movers;
    if (!uo.dtm_member) {
      uo.payoff = PayoffNonDtm(u, params, uo.switched);
      continue;
    }
    ++member_count;
    uo.transacted = alloc.transacted[k++];
    uo.payoff = PayoffDtm(u, uo.bid, uo.transacted, params, uo.switched);
    if (uo.role == TradeRole::kSeller) {
      ++sellers;
    } else if (uo.role == TradeRole::kBuyer) {
      ++buyers;
    } else {
      ++idle;
    }
  }
  const double n = static_cast<double>(users.size());
  out.seller_share = static_cast<double>(sellers) / n;
  out.buyer_share = static_cast<double>(buyers) / n;
  out.idle_share = static_cast<double>(idle) / n;
  out.member_share = static_cast<double>(member_count) / n;
  out.switcher_share = static_cast<double>(movers) / n;
  out.traded_volume = alloc.seller_volume.ToDouble();
  out.gap_revenue = alloc.GapRevenue(params.eps);
  return out;
}

}  // namespace

Thresholds RawStage3Thresholds(double price, const MarketParams& params) {
  return {(price - params.theta) / params.kappa, price / params.kappa};
}

TradeRole Stage3Role(double p, double price, const MarketParams& params) {
  Thresholds raw = RawStage3Thresholds(price, params);
  if (p <= raw.p_low + kThresholdSlack) return TradeRole::kSeller;
  if (p >= raw.p_high - kThresholdSlack) return TradeRole::kBuyer;
  return TradeRole::kNoTrade;
}

Thresholds Stage3Thresholds(double price, const MarketParams& params) {
  Thresholds raw = RawStage3Thresholds(price, params);
  return {Clamp01(raw.p_low), Clamp01(raw.p_high)};
}

Thresholds RawStage2Thresholds(double price, const MarketParams& params) {
  const double sell_gap = params.SellGap();
  const double buy_gap = params.BuyGap();
  const double cost =
      0.5 * params.switch_cost_rate * (params.mean_d_high + params.mean_d_low);
  return {((price - params.theta) * sell_gap - cost) /
              (params.kappa * sell_gap),
          (price * buy_gap + cost) / (params.kappa * buy_gap)};
}

Thresholds Stage2Thresholds(double price, const MarketParams& params) {
  Thresholds raw = RawStage2Thresholds(price, params);
  return {Clamp01(raw.p_low), Clamp01(raw.p_high)};
}

PopulationModel PopulationModel::Finite(std::vector<UserType> users) {
  if (users.empty()) {
    throw std::invalid_argument("population: finite population is empty");
  }
  for (const UserType& u : users) u.Validate();
  PopulationModel pop;
  pop.continuum_ = false;
  pop.users_ = std::move(users);
  return pop;
}

Bid Stage3BestResponse(const UserType& user, const BidBook& others,
                       const MarketParams& params, bool switched) {
  const std::optional<PriceTick> sell_price = TransactionSellingPrice(others);
  const std::optional<PriceTick> buy_price = TransactionBuyingPrice(others);
  const Rational sell_q = Rational::FromDouble(user.SellQuantity());
  const Rational buy_q = Rational::FromDouble(user.BuyQuantity());

  std::vector<Bid> candidates;
  if (sell_price) {
    candidates.push_back({Role::kSeller, *sell_price, sell_q});
    if (*sell_price > 0) {
      candidates.push_back({Role::kSeller, *sell_price - 1, sell_q});
    }
  }
  if (buy_price) {
    candidates.push_back({Role::kBuyer, *buy_price, buy_q});
    if (*buy_price < params.MaxTick()) {
      candidates.push_back({Role::kBuyer, *buy_price + 1, buy_q});
    }
  }

  Bid best = Bid::Zero();
  double best_payoff = PayoffDtm(user, best, Rational(), params, switched);
  bool have_trade = false;
  for (const Bid& bid : candidates) {
    Rational r = ProbeAllocation(others, bid);
    if (r.IsZero()) continue;
    double payoff = PayoffDtm(user, bid, r, params, switched);
    bool better = have_trade ? payoff > best_payoff + kPayoffTolerance
                             : payoff >= best_payoff - kPayoffTolerance;
    if (better) {
      best = bid;
      best_payoff = payoff;
      have_trade = true;
    }
  }
  return best;
}

EquilibriumOutcome Stage3Equilibrium(const PopulationModel& pop,
                                     const std::vector<std::size_t>& dtm_members,
                                     const MarketParams& params) {
  params.Validate();
  if (pop.continuum()) {
    const double sell_gap = params.SellGap();
    const double buy_gap = params.BuyGap();
    auto excess = [&](double price) {
      Thresholds t = Stage3Thresholds(price, params);
      return t.p_low * sell_gap - (1.0 - t.p_high) * buy_gap;
    };
    EquilibriumOutcome out;
    out.continuum = true;
    out.theta = params.theta;
    out.clearing_price = SolveContinuum(excess, params.kappa);
    Thresholds t = Stage3Thresholds(out.clearing_price, params);
    out.seller_share = t.p_low;
    out.buyer_share = 1.0 - t.p_high;
    out.idle_share = std::max(0.0, t.p_high - t.p_low);
    out.member_share = 1.0;
    out.supply = out.seller_share * sell_gap;
    out.demand = out.buyer_share * buy_gap;
    out.traded_volume = std::min(out.supply, out.demand);
    out.no_trade = out.traded_volume <= kPayoffTolerance;
    return out;
  }

  const auto& users = pop.users();
  if (dtm_members.empty()) {
    throw std::invalid_argument("stage 3: no DTM members");
  }
  Curve supply;
  Curve demand;
  std::vector<bool> switched(users.size(), false);
  for (std::size_t i : dtm_members) {
    if (i >= users.size()) {
      throw std::out_of_range("stage 3: member index out of range");
    }
    supply.Add(users[i].p, users[i].SellQuantity());
    demand.Add(users[i].p, users[i].BuyQuantity());
    switched[i] = !users[i].original_dtm;
  }
  supply.Finish();
  demand.Finish();
  auto excess = [&](PriceTick tick) {
    Thresholds raw = RawStage3Thresholds(params.PriceOf(tick), params);
    return supply.AtMost(raw.p_low) - demand.AtLeast(raw.p_high, raw.p_low);
  };
  PriceTick tick = SolveGrid(excess, params.MaxTick());
  return TradeAtTick(users, dtm_members, switched, false, tick, params);
}

bool Stage2BestResponse(const UserType& user, double price,
                        const MarketParams& params) {
  if (user.original_dtm) return true;
  Thresholds raw = RawStage2Thresholds(price, params);
  return user.p <= raw.p_low + kThresholdSlack ||
         user.p >= raw.p_high - kThresholdSlack;
}

EquilibriumOutcome Stage2Equilibrium(const PopulationModel& pop,
                                     const MarketParams& params) {
  params.Validate();
  const double sell_gap = params.SellGap();
  const double buy_gap = params.BuyGap();
  if (pop.continuum()) {
    const double alpha = params.alpha;
    auto excess = [&](double price) {
      Thresholds t = Stage3Thresholds(price, params);
      Thresholds s = Stage2Thresholds(price, params);
      return alpha * (t.p_low * sell_gap - (1.0 - t.p_high) * buy_gap) +
             (1.0 - alpha) * (s.p_low * sell_gap - (1.0 - s.p_high) * buy_gap);
    };
    EquilibriumOutcome out;
    out.continuum = true;
    out.theta = params.theta;
    out.clearing_price = SolveContinuum(excess, params.kappa);
    Thresholds t = Stage3Thresholds(out.clearing_price, params);
    Thresholds s = Stage2Thresholds(out.clearing_price, params);
    const double movers_low = s.p_low;
    const double movers_high = 1.0 - s.p_high;
    out.switcher_share = (1.0 - alpha) * (movers_low + movers_high);
    out.member_share = alpha + out.switcher_share;
    out.seller_share = alpha * t.p_low + (1.0 - alpha) * movers_low;
    out.buyer_share = alpha * (1.0 - t.p_high) + (1.0 - alpha) * movers_high;
    out.idle_share = std::max(
        0.0, out.member_share - out.seller_share - out.buyer_share);
    out.supply = out.seller_share * sell_gap;
    out.demand = out.buyer_share * buy_gap;
    out.traded_volume = std::min(out.supply, out.demand);
    out.no_trade = out.traded_volume <= kPayoffTolerance;
    return out;
  }

  const auto& users = pop.users();
  const double quota = params.mean_quota;
  Curve stay_supply, stay_demand, move_supply, move_demand;
  for (const UserType& u : users) {
    if (u.original_dtm) {
      stay_supply.Add(u.p, quota - u.d_low);
      stay_demand.Add(u.p, u.d_high - quota);
    } else {
      move_supply.Add(u.p, quota - u.d_low);
      move_demand.Add(u.p, u.d_high - quota);
    }
  }
  stay_supply.Finish();
  stay_demand.Finish();
  move_supply.Finish();
  move_demand.Finish();
  auto excess = [&](PriceTick tick) {
    const double price = params.PriceOf(tick);
    Thresholds t = RawStage3Thresholds(price, params);
    Thresholds s = RawStage2Thresholds(price, params);
    return stay_supply.AtMost(t.p_low) + move_supply.AtMost(s.p_low) -
           stay_demand.AtLeast(t.p_high, t.p_low) -
           move_demand.AtLeast(s.p_high, s.p_low);
  };
  PriceTick tick = SolveGrid(excess, params.MaxTick());
  const double price = params.PriceOf(tick);

  std::vector<std::size_t> members;
  std::vector<bool> switched(users.size(), false);
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (Stage2BestResponse(users[i], price, params)) {
      members.push_back(i);
      switched[i] = !users[i].original_dtm;
    }
  }
  return TradeAtTick(users, members, switched, true, tick, params);
}

double ClearingPriceClosedForm(double theta, const MarketParams& params) {
  const double buy_gap = params.BuyGap();
  const double sell_gap = params.SellGap();
  const double spread = params.mean_d_high - params.mean_d_low;
  if (!(spread > 0.0)) {
    throw DegenerateParameters("clearing price: D_h must exceed D_l");
  }
  return (buy_gap * params.kappa + sell_gap * theta) / spread;
}

BidBook OutcomeBook(const EquilibriumOutcome& outcome) {
  std::vector<BidEntry> entries;
  for (const UserOutcome& uo : outcome.users) {
    if (uo.dtm_member) {
      entries.push_back({static_cast<UserId>(uo.user), uo.bid});
    }
  }
  return BidBook(std::move(entries));
}

std::vector<Rational> DefaultDeviationQuantities(const UserType& user) {
  std::vector<Rational> base = {Rational(),
                                Rational::FromDouble(user.SellQuantity()),
                                Rational::FromDouble(user.BuyQuantity())};
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end()), base.end());
  std::vector<Rational> grid = base;
  for (std::size_t i = 0; i < base.size(); ++i) {
    for (std::size_t j = i + 1; j < base.size(); ++j) {
      grid.push_back((base[i] + base[j]) / Rational(2));
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

NashReport VerifyNash(const EquilibriumOutcome& outcome,
                      const PopulationModel& pop, const MarketParams& params,
                      const NashScanOptions& options) {
  if (pop.continuum() || outcome.continuum) {
    throw std::invalid_argument("verify_nash: finite populations only");
  }
  const auto& users = pop.users();
  BidBook book = OutcomeBook(outcome);
  Allocation base = ClearMarket(book);

  std::vector<std::size_t> member_rows;  // positions in outcome.users
  for (std::size_t k = 0; k < outcome.users.size(); ++k) {
    if (outcome.users[k].dtm_member) member_rows.push_back(k);
  }
  if (options.sample > 0 && options.sample < member_rows.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(member_rows.begin(), member_rows.end(), rng);
    member_rows.resize(options.sample);
    std::sort(member_rows.begin(), member_rows.end());
  }

  std::vector<PriceTick> prices = options.price_grid;
  if (prices.empty()) {
    prices.resize(static_cast<std::size_t>(params.MaxTick() + 1));
    std::iota(prices.begin(), prices.end(), PriceTick{0});
  }

  const std::size_t n = member_rows.size();
  std::vector<double> gains(n, -std::numeric_limits<double>::infinity());
  std::vector<Bid> worst(n);
  std::vector<std::size_t> counts(n, 0);
  ParallelFor(n, options.threads, [&](std::size_t job) {
    const UserOutcome& uo = outcome.users[member_rows[job]];
    if (uo.user >= users.size()) {
      throw std::out_of_range("verify_nash: outcome user out of range");
    }
    const UserType& u = users[uo.user];
    const auto id = static_cast<UserId>(uo.user);
    const std::size_t row = *book.IndexOf(id);
    const double current =
        PayoffDtm(u, uo.bid, base.transacted[row], params, uo.switched);
    const std::vector<Rational> quantities =
        options.quantity_grid.empty() ? DefaultDeviationQuantities(u)
                                      : options.quantity_grid[uo.user];
    for (Role role : {Role::kSeller, Role::kBuyer}) {
      for (PriceTick price : prices) {
        for (const Rational& q : quantities) {
          Bid dev{role, price, q};
          BidBook moved = book.With(id, dev);
          Rational r = ClearMarket(moved).transacted[row];
          double gain = PayoffDtm(u, dev, r, params, uo.switched) - current;
          ++counts[job];
          if (gain > gains[job]) {
            gains[job] = gain;
            worst[job] = dev;
          }
        }
      }
    }
  });

  NashReport report;
  report.users_checked = n;
  for (std::size_t job = 0; job < n; ++job) {
    const std::size_t user = outcome.users[member_rows[job]].user;
    report.checked.push_back(user);
    report.gains.push_back(gains[job]);
    report.deviations += counts[job];
    if (!report.worst_user || gains[job] > report.max_gain) {
      report.max_gain = gains[job];
      report.worst_user = user;
      report.worst_deviation = worst[job];
    }
  }
  return report;
}

void WriteOutcomeRecord(std::ostream& out, const EquilibriumOutcome& outcome,
                        const MarketParams& params) {
  out << "mode=" << (outcome.continuum ? "continuum" : "finite") << '\n';
  out << "theta=" << FormatNumber(outcome.theta) << '\n';
  out << "clearing_price=" << FormatNumber(outcome.clearing_price) << '\n';
  if (outcome.price_tick) out << "price_tick=" << *outcome.price_tick << '\n';
  out << "no_trade=" << (outcome.no_trade ? 1 : 0) << '\n';
  if (!outcome.continuum) {
    std::size_t members = 0, movers = 0, sellers = 0, buyers = 0, idle = 0;
    for (const UserOutcome& uo : outcome.users) {
      if (uo.switched) ++movers;
      if (!uo.dtm_member) continue;
      ++members;
      if (uo.role == TradeRole::kSeller) ++sellers;
      if (uo.role == TradeRole::kBuyer) ++buyers;
      if (uo.role == TradeRole::kNoTrade) ++idle;
    }
    out << "population=" << outcome.population << '\n';
    out << "members=" << members << '\n';
    out << "switchers=" << movers << '\n';
    out << "sellers=" << sellers << '\n';
    out << "buyers=" << buyers << '\n';
    out << "idle=" << idle << '\n';
  }
  out << "member_share=" << FormatNumber(outcome.member_share) << '\n';
  out << "switcher_share=" << FormatNumber(outcome.switcher_share) << '\n';
  out << "seller_share=" << FormatNumber(outcome.seller_share) << '\n';
  out << "buyer_share=" << FormatNumber(outcome.buyer_share) << '\n';
  out << "idle_share=" << FormatNumber(outcome.idle_share) << '\n';
  out << "supply=" << FormatNumber(outcome.supply) << '\n';
  out << "demand=" << FormatNumber(outcome.demand) << '\n';
  out << "traded_volume=" << FormatNumber(outcome.traded_volume) << '\n';
  out << "gap_revenue=" << FormatNumber(outcome.gap_revenue) << '\n';
  out << "eps=" << FormatNumber(params.eps) << '\n';
}

void WriteOutcomeUsers(std::ostream& out, const EquilibriumOutcome& outcome,
                       const MarketParams& params) {
  out << "user,member,switched,role,price,quantity,transacted,payoff\n";
  for (const UserOutcome& uo : outcome.users) {
    out << uo.user << ',' << (uo.dtm_member ? 1 : 0) << ','
        << (uo.switched ? 1 : 0) << ',' << TradeRoleName(uo.role) << ','
        << FormatNumber(params.PriceOf(uo.bid.price)) << ','
        << uo.bid.quantity.ToDecimal(6) << ',' << uo.transacted.ToDecimal(6)
        << ',' << FormatNumber(uo.payoff) << '\n';
  }
}

void WriteNashReport(std::ostream& out, const NashReport& report,
                     const MarketParams& params) {
  out << "users_checked=" << report.users_checked << '\n';
  out << "deviations=" << report.deviations << '\n';
  out << "max_gain=" << FormatNumber(report.max_gain) << '\n';
  if (report.worst_user) {
    out << "worst_user=" << *report.worst_user << '\n';
    const Bid& b = report.worst_deviation;
    out << "worst_deviation=" << RoleCode(b.role) << ','
        << FormatNumber(params.PriceOf(b.price)) << ','
        << b.quantity.ToDecimal(6) << '\n';
  }
}

}  // namespace dtm
