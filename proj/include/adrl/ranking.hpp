// Copyright 2026 The adrl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <vector>

#include "adrl/types.hpp"

namespace adrl {

/// The pieces of a rank score. The GSP price needs the revenue factor
/// ctr^a1 and the non-revenue part separately.
struct RankTerms {
  double ctr_power = 0.0;   // ctr^a1
  double revenue = 0.0;     // ctr^a1 * bid
  double nonrevenue = 0.0;  // a2 * (ctr*cvr)^a3 + a4 * cvr^a5 * price
  double score = 0.0;       // revenue + nonrevenue
};

RankTerms rank_terms(const AdCandidate& candidate, const ActionVector& action) noexcept;

/// ctr^a1 * bid + a2 * (ctr*cvr)^a3 + a4 * cvr^a5 * price, from predicted rates.
double rank_score(const AdCandidate& candidate, const ActionVector& action) noexcept;

/// Generalized second price for a winner whose runner-up scored
/// `runner_score`: the bid that would exactly tie the runner-up, clamped to
/// [reserve, bid]. A reserve above the bid charges the bid.
double gsp_click_price(double runner_score, const RankTerms& winner, double winner_bid,
                       double reserve) noexcept;

/// Deterministic ordering used everywhere: score, then bid, then id, all descending.
constexpr bool ranks_before(double score_a, double bid_a, CandidateId id_a, double score_b,
                            double bid_b, CandidateId id_b) noexcept {
  if (score_a != score_b) return score_a > score_b;
  if (bid_a != bid_b) return bid_a > bid_b;
  return id_a > id_b;
}

struct AuctionOutcome {
  std::vector<CandidateId> winner_ids;
  std::vector<std::size_t> winner_index;  // into record.candidates
  std::vector<double> click_prices;
  std::vector<double> scores;  // per candidate, record order
};

inline constexpr double kDefaultReserve = 0.01;

/// Ranks every candidate and prices the top `k` slots. A missing runner-up is
/// treated as a zero-score sentinel, which prices the slot at the reserve.
AuctionOutcome run_auction(const AuctionRecord& record, const ActionVector& action,
                           std::size_t k = 1, double reserve = kDefaultReserve);

/// Lahaie-McAfee squashed eCPM, ctr^e * bid.
double baseline_score(const AdCandidate& candidate, double squash_exponent);

/// The ranking-function action equivalent to the squashed baseline.
ActionVector baseline_action(double squash_exponent);

}  // namespace adrl
