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

#ifndef DTM_EQUILIBRIUM_H_
#define DTM_EQUILIBRIUM_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "dtm/auction.h"
#include "dtm/core_model.h"

namespace dtm {

// Cutoffs on the high-demand probability p: users with p <= p_low sell,
// users with p >= p_high buy.
struct Thresholds {
  double p_low = 0.0;
  double p_high = 0.0;
};

// Trading thresholds (P_L, P_H), clamped to [0,1].
Thresholds Stage3Thresholds(double price, const MarketParams& params);
// Switching thresholds (P_L', P_H') for users of other operators, clamped
// to [0,1]. Uses the mean quota and demands from `params`.
Thresholds Stage2Thresholds(double price, const MarketParams& params);

// Unclamped versions; membership tests compare p against these so that a
// negative cutoff admits nobody.
Thresholds RawStage3Thresholds(double price, const MarketParams& params);
Thresholds RawStage2Thresholds(double price, const MarketParams& params);

// Trading role of a DTM member with high-demand probability p when the
// market clears at `price`: sell when p <= P_L, buy when p >= P_H.
TradeRole Stage3Role(double p, double price, const MarketParams& params);

// Either an explicit list of users or the continuum limit with p uniform on
// [0,1] and the mean quota and demands taken from MarketParams.
class PopulationModel {
 public:
  static PopulationModel Finite(std::vector<UserType> users);
  static PopulationModel Continuum() { return PopulationModel(); }

  bool continuum() const { return continuum_; }
  const std::vector<UserType>& users() const { return users_; }

 private:
  PopulationModel() = default;

  bool continuum_ = true;
  std::vector<UserType> users_;
};

// Best bid against the other users' bids, chosen among the five candidate
// forms (sell at the transaction selling price or one step below, buy at
// the transaction buying price or one step above, zero bid) by probing the
// clearing engine. Ties favour that order.
Bid Stage3BestResponse(const UserType& user, const BidBook& others,
                       const MarketParams& params, bool switched = false);

// Trading-stage equilibrium among `dtm_members` (indices into the finite
// population; ignored in continuum mode, where everyone is a member).
EquilibriumOutcome Stage3Equilibrium(const PopulationModel& pop,
                                     const std::vector<std::size_t>& dtm_members,
                                     const MarketParams& params);

// 1 iff the user joins (or stays with) the DTM operator at `price`.
bool Stage2BestResponse(const UserType& user, double price,
                        const MarketParams& params);

// Operator-selection equilibrium: original subscribers stay, others switch
// when their p lies outside the primed band, and the price balances the
// four-group supply and demand.
EquilibriumOutcome Stage2Equilibrium(const PopulationModel& pop,
                                     const MarketParams& params);

// ((D_h - Q) kappa + (Q - D_l) theta) / (D_h - D_l).
double ClearingPriceClosedForm(double theta, const MarketParams& params);

// The bids of the DTM members in `outcome`, keyed by population index.
BidBook OutcomeBook(const EquilibriumOutcome& outcome);

struct NashScanOptions {
  // Deviation prices; empty means the full grid 0..MaxTick().
  std::vector<PriceTick> price_grid;
  // Per-user deviation quantities; empty means {0, Q_i - d_l, d_h - Q_i}
  // plus midpoints.
  std::vector<std::vector<Rational>> quantity_grid;
  // Check only this many members, drawn with `seed`; 0 checks all.
  std::size_t sample = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct NashReport {
  double max_gain = 0.0;
  std::optional<std::size_t> worst_user;  // population index
  Bid worst_deviation;
  std::size_t users_checked = 0;
  std::size_t deviations = 0;
  std::vector<std::size_t> checked;  // population indices
  std::vector<double> gains;         // aligned with `checked`
};

// Unilateral-deviation scan over role x price x quantity for the DTM
// members of a finite-mode outcome. Payoffs are recomputed by clearing the
// book with the deviation substituted.
NashReport VerifyNash(const EquilibriumOutcome& outcome,
                      const PopulationModel& pop, const MarketParams& params,
                      const NashScanOptions& options = {});

std::vector<Rational> DefaultDeviationQuantities(const UserType& user);

// key=value record with the clearing price, group counts and volumes.
void WriteOutcomeRecord(std::ostream& out, const EquilibriumOutcome& outcome,
                        const MarketParams& params);
// One CSV row per user of a finite-mode outcome.
void WriteOutcomeUsers(std::ostream& out, const EquilibriumOutcome& outcome,
                       const MarketParams& params);
void WriteNashReport(std::ostream& out, const NashReport& report,
                     const MarketParams& params);

}  // namespace dtm

#endif  // DTM_EQUILIBRIUM_H_
