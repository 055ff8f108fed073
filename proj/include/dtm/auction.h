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

#ifndef DTM_AUCTION_H_
#define DTM_AUCTION_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "dtm/core_model.h"

namespace dtm {

using UserId = std::int64_t;

struct BidEntry {
  UserId user = 0;
  Bid bid;
};

// Sealed bids submitted in one trading epoch. Immutable once built; the
// With/Without helpers return modified copies.
class BidBook {
 public:
  BidBook() = default;
  // Throws std::invalid_argument on duplicate ids, negative prices or
  // negative quantities.
  explicit BidBook(std::vector<BidEntry> entries);

  const std::vector<BidEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::optional<std::size_t> IndexOf(UserId user) const;
  const Bid& BidOf(UserId user) const;  // throws std::out_of_range

  // Copy with `user`'s bid replaced (or appended if absent).
  BidBook With(UserId user, const Bid& bid) const;
  BidBook Without(UserId user) const;
  // An id larger than every id in the book.
  UserId FreshId() const;

  // Throws std::invalid_argument if any price exceeds `max_tick`.
  void CheckPriceRange(PriceTick max_tick) const;

 private:
  struct Trusted {};
  BidBook(std::vector<BidEntry> entries, Trusted)
      : entries_(std::move(entries)) {}

  std::vector<BidEntry> entries_;
};

// Peer sets of a focal bid, as used by the closed-form allocation rule.
// Ids are sorted ascending.
struct PeerSets {
  std::vector<UserId> ls;          // higher-priority sellers
  std::vector<UserId> hb;          // higher-priority (or compatible) buyers
  std::vector<UserId> eq;          // same role and price, focal excluded
  std::vector<UserId> eq_smaller;  // eq members with strictly smaller quantity
  std::vector<UserId> eq_tiny;     // eq_smaller members fully satisfied
};

// Throws std::out_of_range for an unknown focal id.
PeerSets PartitionSets(const BidBook& book, UserId focal);

// Greedy best-first matching across price levels followed by equal-share
// water-filling within each level. Result is aligned with book.entries().
Allocation ClearMarket(const BidBook& book);

// Quantity a hypothetical extra bid would receive if added to `book`.
Rational ProbeAllocation(const BidBook& book, const Bid& probe);

// Highest seller price that still gets a positive quantity transacted;
// nullopt when no seller could trade at any price.
std::optional<PriceTick> TransactionSellingPrice(const BidBook& book);

// Lowest buyer price that still gets a positive quantity transacted;
// nullopt when no buyer could trade at any price.
std::optional<PriceTick> TransactionBuyingPrice(const BidBook& book);

// Line-oriented CSV: header "user_id,role,price,quantity", role in {s,b},
// price in money units, quantity as an exact decimal or a fraction.
// Prices must lie on the eps grid within [0, kappa].
BidBook ReadBidBook(std::istream& in, const MarketParams& params);
void WriteBidBook(std::ostream& out, const BidBook& book,
                  const MarketParams& params);

// "user_id,role,price,quantity,transacted" rows in book order. Transacted
// quantities are rendered as six-digit decimals.
void WriteAllocation(std::ostream& out, const BidBook& book,
                     const Allocation& allocation, const MarketParams& params);

// Formats a money or price value without trailing zeros.
std::string FormatNumber(double value);

}  // namespace dtm

#endif  // DTM_AUCTION_H_
