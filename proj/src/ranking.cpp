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

#include "adrl/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adrl {

RankTerms rank_terms(const AdCandidate& c, const ActionVector& a) noexcept {
  RankTerms t;
  t.ctr_power = std::pow(c.pred_ctr, a[0]);
  t.revenue = t.ctr_power * c.bid;
  const double engagement = std::pow(c.pred_ctr * c.pred_cvr, a[2]);
  const double advertiser = std::pow(c.pred_cvr, a[4]) * c.product_price;
  t.nonrevenue = a[1] * engagement + a[3] * advertiser;
  t.score = t.revenue + t.nonrevenue;
  return t;
}

double rank_score(const AdCandidate& candidate, const ActionVector& action) noexcept {
  return rank_terms(candidate, action).score;
}

double gsp_click_price(double runner_score, const RankTerms& winner, double winner_bid,
                       double reserve) noexcept {
  const double raw = (runner_score - winner.nonrevenue) / winner.ctr_power;
  return std::min(std::max(raw, reserve), winner_bid);
}

AuctionOutcome run_auction(const AuctionRecord& record, const ActionVector& action,
                           std::size_t k, double reserve) {
  const auto& cands = record.candidates;
  if (cands.empty()) throw ContractError("run_auction: record has no candidates");
  if (k == 0) throw ContractError("run_auction: k must be >= 1");

  std::vector<RankTerms> terms(cands.size());
  AuctionOutcome out;
  out.scores.resize(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    terms[i] = rank_terms(cands[i], action);
    if (!std::isfinite(terms[i].score)) {
      throw ContractError("run_auction: non-finite rank score for candidate " +
                          std::to_string(cands[i].candidate_id));
    }
    out.scores[i] = terms[i].score;
  }

  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t need = std::min(cands.size(), k + 1);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(need), order.end(),
                    [&](std::size_t x, std::size_t y) {
                      return ranks_before(terms[x].score, cands[x].bid, cands[x].candidate_id,
                                          terms[y].score, cands[y].bid, cands[y].candidate_id);
                    });

  const std::size_t slots = std::min(k, cands.size());
  out.winner_ids.reserve(slots);
  out.winner_index.reserve(slots);
  out.click_prices.reserve(slots);
  for (std::size_t s = 0; s < slots; ++s) {
    const std::size_t w = order[s];
    const double runner = s + 1 < cands.size() ? terms[order[s + 1]].score : 0.0;
    out.winner_ids.push_back(cands[w].candidate_id);
    out.winner_index.push_back(w);
    out.click_prices.push_back(gsp_click_price(runner, terms[w], cands[w].bid, reserve));
  }
  return out;
}

double baseline_score(const AdCandidate& candidate, double squash_exponent) {
  if (!(squash_exponent > 0.0)) throw ContractError("baseline_score: exponent must be > 0");
  return std::pow(candidate.pred_ctr, squash_exponent) * candidate.bid;
}

ActionVector baseline_action(double squash_exponent) {
  if (!(squash_exponent > 0.0)) throw ContractError("baseline_action: exponent must be > 0");
  return ActionVector(squash_exponent, 0.0, 1.0, 0.0, 1.0);
}

}  // namespace adrl
