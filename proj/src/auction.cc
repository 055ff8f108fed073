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

#include "dtm/auction.h"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>

namespace dtm {
namespace {

// Bids sharing a role and a price.
struct Level {
  PriceTick price = 0;
  std::vector<std::size_t> members;
  Rational total;
  Rational matched;
};

std::vector<Level> BuildLevels(const BidBook& book, Role role) {
  std::vector<std::size_t> idx;
  const auto& entries = book.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].bid.role == role && !entries[i].bid.IsZero()) {
      idx.push_back(i);
    }
  }
  // Best prices first: ascending for sellers, descending for buyers.
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    PriceTick pa = entries[a].bid.price;
    PriceTick pb = entries[b].bid.price;
    if (pa != pb) return role == Role::kSeller ? pa < pb : pa > pb;
    return a < b;
  });
  std::vector<Level> levels;
  for (std::size_t i : idx) {
    const Bid& bid = entries[i].bid;
    if (levels.empty() || levels.back().price != bid.price) {
      levels.push_back({bid.price, {}, Rational(), Rational()});
    }
    levels.back().members.push_back(i);
    levels.back().total += bid.quantity;
  }
  return levels;
}

// Divides `level.matched` equally, capping each member at its quantity and
// sharing the surplus among the rest.
void WaterFill(const BidBook& book, const Level& level,
               std::vector<Rational>& transacted) {
  const auto& entries = book.entries();
  if (level.matched.IsZero()) return;
  if (level.matched == level.total) {
    for (std::size_t i : level.members) transacted[i] = entries[i].bid.quantity;
    return;
  }
  std::vector<std::size_t> order = level.members;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return entries[a].bid.quantity < entries[b].bid.quantity;
  });
  Rational remaining = level.matched;
  const std::size_t n = order.size();
  for (std::size_t k = 0; k < n; ++k) {
    Rational share = remaining / Rational(static_cast<std::int64_t>(n - k));
    const Rational& q = entries[order[k]].bid.quantity;
    if (q <= share) {
      transacted[order[k]] = q;
      remaining -= q;
      continue;
    }
    for (std::size_t m = k; m < n; ++m) transacted[order[m]] = share;
    break;
  }
}

std::vector<UserId> Sorted(std::vector<UserId> ids) {
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string Trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(Trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

BidBook::BidBook(std::vector<BidEntry> entries) : entries_(std::move(entries)) {
  std::unordered_set<UserId> seen;
  for (const auto& e : entries_) {
    if (!seen.insert(e.user).second) {
      throw std::invalid_argument("bid book: duplicate user id " +
                                  std::to_string(e.user));
    }
    if (e.bid.price < 0) {
      throw std::invalid_argument("bid book: negative price for user " +
                                  std::to_string(e.user));
    }
    if (e.bid.quantity.IsNegative()) {
      throw std::invalid_argument("bid book: negative quantity for user " +
                                  std::to_string(e.user));
    }
  }
}

std::optional<std::size_t> BidBook::IndexOf(UserId user) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].user == user) return i;
  }
  return std::nullopt;
}

const Bid& BidBook::BidOf(UserId user) const {
  auto idx = IndexOf(user);
  if (!idx) {
    throw std::out_of_range("bid book: unknown user " + std::to_string(user));
  }
  return entries_[*idx].bid;
}

BidBook BidBook::With(UserId user, const Bid& bid) const {
  if (bid.price < 0 || bid.quantity.IsNegative()) {
    throw std::invalid_argument("bid book: malformed bid for user " +
                                std::to_string(user));
  }
  std::vector<BidEntry> copy = entries_;
  if (auto idx = IndexOf(user)) {
    copy[*idx].bid = bid;
  } else {
    copy.push_back({user, bid});
  }
  return BidBook(std::move(copy), Trusted{});
}

BidBook BidBook::Without(UserId user) const {
  std::vector<BidEntry> copy;
  copy.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (e.user != user) copy.push_back(e);
  }
  return BidBook(std::move(copy), Trusted{});
}

UserId BidBook::FreshId() const {
  UserId max_id = -1;
  for (const auto& e : entries_) max_id = std::max(max_id, e.user);
  return max_id + 1;
}

void BidBook::CheckPriceRange(PriceTick max_tick) const {
  for (const auto& e : entries_) {
    if (e.bid.price > max_tick) {
      throw std::invalid_argument("bid book: price above kappa for user " +
                                  std::to_string(e.user));
    }
  }
}

PeerSets PartitionSets(const BidBook& book, UserId focal) {
  const Bid& me = book.BidOf(focal);
  const bool seller = me.role == Role::kSeller;
  PeerSets sets;
  Rational hb_total;
  Rational ls_total;
  // Same-level bids including the focal one, for the ES_j computation.
  std::vector<const BidEntry*> level;
  for (const auto& e : book.entries()) {
    const Bid& b = e.bid;
    if (b.role == me.role && b.price == me.price) level.push_back(&e);
    if (e.user == focal) continue;
    if (b.role == Role::kSeller) {
      bool higher = seller ? b.price < me.price : b.price <= me.price;
      if (higher) {
        sets.ls.push_back(e.user);
        ls_total += b.quantity;
      }
    } else {
      bool higher = seller ? b.price >= me.price : b.price > me.price;
      if (higher) {
        sets.hb.push_back(e.user);
        hb_total += b.quantity;
      }
    }
    if (b.role == me.role && b.price == me.price) {
      sets.eq.push_back(e.user);
      if (b.quantity < me.quantity) sets.eq_smaller.push_back(e.user);
    }
  }
  const Rational residual = seller ? hb_total - ls_total : ls_total - hb_total;
  const auto group = static_cast<std::int64_t>(sets.eq.size() + 1);
  for (UserId j : sets.eq_smaller) {
    const Rational& qj = book.BidOf(j).quantity;
    Rational smaller_total;
    std::int64_t smaller_count = 0;
    for (const BidEntry* e : level) {
      if (e->user != j && e->bid.quantity < qj) {
        smaller_total += e->bid.quantity;
        ++smaller_count;
      }
    }
    if (qj * Rational(group - smaller_count) <= residual - smaller_total) {
      sets.eq_tiny.push_back(j);
    }
  }
  sets.ls = Sorted(std::move(sets.ls));
  sets.hb = Sorted(std::move(sets.hb));
  sets.eq = Sorted(std::move(sets.eq));
  sets.eq_smaller = Sorted(std::move(sets.eq_smaller));
  sets.eq_tiny = Sorted(std::move(sets.eq_tiny));
  return sets;
}

Allocation ClearMarket(const BidBook& book) {
  Allocation out;
  out.transacted.assign(book.size(), Rational());
  std::vector<Level> sellers = BuildLevels(book, Role::kSeller);
  std::vector<Level> buyers = BuildLevels(book, Role::kBuyer);

  std::size_t s = 0;
  std::size_t b = 0;
  Rational s_left = sellers.empty() ? Rational() : sellers[0].total;
  Rational b_left = buyers.empty() ? Rational() : buyers[0].total;
  while (s < sellers.size() && b < buyers.size() &&
         sellers[s].price <= buyers[b].price) {
    Rational m = Min(s_left, b_left);
    sellers[s].matched += m;
    buyers[b].matched += m;
    out.gap_revenue_ticks += m * Rational(buyers[b].price - sellers[s].price);
    s_left -= m;
    b_left -= m;
    if (s_left.IsZero() && ++s < sellers.size()) s_left = sellers[s].total;
    if (b_left.IsZero() && ++b < buyers.size()) b_left = buyers[b].total;
  }
  for (const Level& level : sellers) {
    out.seller_volume += level.matched;
    WaterFill(book, level, out.transacted);
  }
  for (const Level& level : buyers) {
    out.buyer_volume += level.matched;
    WaterFill(book, level, out.transacted);
  }
  return out;
}

Rational ProbeAllocation(const BidBook& book, const Bid& probe) {
  BidBook with = book.With(book.FreshId(), probe);
  return ClearMarket(with).transacted.back();
}

std::optional<PriceTick> TransactionSellingPrice(const BidBook& book) {
  PriceTick hi = -1;
  for (const auto& e : book.entries()) {
    if (e.bid.role == Role::kBuyer && !e.bid.IsZero()) {
      hi = std::max(hi, e.bid.price);
    }
  }
  if (hi < 0) return std::nullopt;
  auto trades = [&](PriceTick p) {
    return !ProbeAllocation(book, {Role::kSeller, p, Rational(1)}).IsZero();
  };
  if (!trades(0)) return std::nullopt;
  // Largest p in [0, hi] with a positive allocation; monotone in p.
  PriceTick lo = 0;
  while (lo < hi) {
    PriceTick mid = lo + (hi - lo + 1) / 2;
    if (trades(mid)) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

std::optional<PriceTick> TransactionBuyingPrice(const BidBook& book) {
  bool any_seller = false;
  PriceTick hi = 0;
  for (const auto& e : book.entries()) {
    hi = std::max(hi, e.bid.price);
    if (e.bid.role == Role::kSeller && !e.bid.IsZero()) any_seller = true;
  }
  if (!any_seller) return std::nullopt;
  auto trades = [&](PriceTick p) {
    return !ProbeAllocation(book, {Role::kBuyer, p, Rational(1)}).IsZero();
  };
  if (!trades(hi)) return std::nullopt;
  // Smallest p in [0, hi] with a positive allocation; monotone in p.
  PriceTick lo = 0;
  while (lo < hi) {
    PriceTick mid = lo + (hi - lo) / 2;
    if (trades(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

std::string FormatNumber(double value) {
  if (value == 0.0) return "0";
  std::ostringstream out;
  out.precision(12);
  out << value;
  return out.str();
}

BidBook ReadBidBook(std::istream& in, const MarketParams& params) {
  const Rational eps = Rational::Parse(FormatNumber(params.eps));
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<BidEntry> entries;
  auto fail = [&](const std::string& what) {
    return std::invalid_argument("bid book line " + std::to_string(line_no) +
                                 ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string trimmed = Trim(line);
    if (trimmed.empty()) continue;
    std::vector<std::string> f = SplitCsv(trimmed);
    if (!header) {
      if (f != std::vector<std::string>{"user_id", "role", "price", "quantity"}) {
        throw fail("expected header user_id,role,price,quantity");
      }
      header = true;
      continue;
    }
    if (f.size() != 4) throw fail("expected 4 fields");
    BidEntry e;
    try {
      std::size_t used = 0;
      e.user = std::stoll(f[0], &used);
      if (used != f[0].size()) throw fail("bad user id");
    } catch (const std::logic_error&) {
      throw fail("bad user id '" + f[0] + "'");
    }
    if (f[1] == "s") {
      e.bid.role = Role::kSeller;
    } else if (f[1] == "b") {
      e.bid.role = Role::kBuyer;
    } else {
      throw fail("role must be s or b");
    }
    Rational price;
    try {
      price = Rational::Parse(f[2]);
      e.bid.quantity = Rational::Parse(f[3]);
    } catch (const std::invalid_argument& err) {
      throw fail(err.what());
    }
    Rational ticks = price / eps;
    if (!ticks.IsInteger()) throw fail("price " + f[2] + " is off the grid");
    if (ticks.IsNegative() || ticks.num() > params.MaxTick()) {
      throw fail("price " + f[2] + " outside [0, kappa]");
    }
    if (e.bid.quantity.IsNegative()) throw fail("negative quantity");
    e.bid.price = ticks.num();
    entries.push_back(e);
  }
  if (!header) throw std::invalid_argument("bid book: missing header");
  return BidBook(std::move(entries));
}

void WriteBidBook(std::ostream& out, const BidBook& book,
                  const MarketParams& params) {
  out << "user_id,role,price,quantity\n";
  for (const auto& e : book.entries()) {
    out << e.user << ',' << RoleCode(e.bid.role) << ','
        << FormatNumber(params.PriceOf(e.bid.price)) << ','
        << e.bid.quantity.ToString() << '\n';
  }
}

void WriteAllocation(std::ostream& out, const BidBook& book,
                     const Allocation& allocation, const MarketParams& params) {
  out << "user_id,role,price,quantity,transacted\n";
  for (std::size_t i = 0; i < book.size(); ++i) {
    const auto& e = book.entries()[i];
    out << e.user << ',' << RoleCode(e.bid.role) << ','
        << FormatNumber(params.PriceOf(e.bid.price)) << ','
        << e.bid.quantity.ToString() << ','
        << allocation.transacted[i].ToDecimal(6) << '\n';
  }
}

}  // namespace dtm
