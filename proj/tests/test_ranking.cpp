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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adrl/ranking.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace adrl;
using adrl::testing::random_action;
using adrl::testing::random_record;

namespace {

AdCandidate cand(CandidateId id, double bid, double ctr, double cvr = 0.1, double price = 10.0) {
  AdCandidate c;
  c.candidate_id = id;
  c.bid = bid;
  c.pred_ctr = ctr;
  c.pred_cvr = cvr;
  c.product_price = price;
  return c;
}

// Independent re-implementation: full sort of every candidate, then price.
struct OracleOutcome {
  std::vector<CandidateId> winners;
  std::vector<double> prices;
};

OracleOutcome sort_then_price(const AuctionRecord& r, const ActionVector& a, std::size_t k,
                              double reserve) {
  struct Row {
    double score, revenue_factor, nonrev, bid;
    CandidateId id;
  };
  std::vector<Row> rows;
  for (const auto& c : r.candidates) {
    const double f1 = std::pow(c.pred_ctr, a[0]);
    const double nonrev = a[1] * std::pow(c.pred_ctr * c.pred_cvr, a[2]) +
                          a[3] * std::pow(c.pred_cvr, a[4]) * c.product_price;
    rows.push_back({f1 * c.bid + nonrev, f1, nonrev, c.bid, c.candidate_id});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.bid != y.bid) return x.bid > y.bid;
    return x.id > y.id;
  });
  OracleOutcome out;
  for (std::size_t s = 0; s < std::min(k, rows.size()); ++s) {
    const double runner = s + 1 < rows.size() ? rows[s + 1].score : 0.0;
    double p = (runner - rows[s].nonrev) / rows[s].revenue_factor;
    if (p < reserve) p = reserve;
    if (p > rows[s].bid) p = rows[s].bid;
    out.winners.push_back(rows[s].id);
    out.prices.push_back(p);
  }
  return out;
}

std::size_t rank_position(const AuctionRecord& r, const ActionVector& a, CandidateId id) {
  const auto out = run_auction(r, a, r.candidates.size());
  return static_cast<std::size_t>(
      std::find(out.winner_ids.begin(), out.winner_ids.end(), id) - out.winner_ids.begin());
}

}  // namespace

TEST_CASE("rank score reduces to eCPM with zero weights") {
  CHECK(rank_score(cand(1, 2.0, 0.05), ActionVector(1, 0, 1, 0, 1)) == doctest::Approx(0.10).epsilon(1e-12));
}

TEST_CASE("rank score hand evaluation with every term on") {
  const auto c = cand(1, 1.0, 0.1, 0.2, 50.0);
  // 0.1 * 1 + 1 * (0.02)^1 + 1 * 0.2 * 50
  CHECK(rank_score(c, ActionVector(1, 1, 1, 1, 1)) == doctest::Approx(10.12).epsilon(1e-12));
  const auto t = rank_terms(c, ActionVector(1, 1, 1, 1, 1));
  CHECK(t.revenue == doctest::Approx(0.1));
  CHECK(t.nonrevenue == doctest::Approx(10.02));
}

TEST_CASE("rank score never decreases with the bid") {
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    auto c = testing::random_record(rng, 1).candidates[0];
    const auto a = random_action(rng);
    const double s0 = rank_score(c, a);
    c.bid *= 1.0 + uniform01(rng);
    CHECK(rank_score(c, a) >= s0);
  }
}

TEST_CASE("classic GSP price") {
  AuctionRecord r;
  r.candidates = {cand(1, 3.0, 0.05), cand(2, 2.5, 0.04)};
  const auto out = run_auction(r, ActionVector(1, 0, 1, 0, 1));
  REQUIRE(out.winner_ids == std::vector<CandidateId>{1});
  CHECK(out.click_prices[0] == doctest::Approx(0.04 * 2.5 / 0.05).epsilon(1e-12));
}

TEST_CASE("negative numerator clamps to the reserve") {
  AuctionRecord r;
  // The winner's purchase term alone beats the runner-up.
  r.candidates = {cand(1, 1.0, 0.05, 0.5, 100.0), cand(2, 1.0, 0.05, 0.01, 1.0)};
  const auto out = run_auction(r, ActionVector(1, 0, 1, 1, 1), 1, 0.01);
  REQUIRE(out.winner_ids[0] == 1);
  CHECK(out.click_prices[0] == 0.01);
}

TEST_CASE("reserve above the bid charges the bid") {
  AuctionRecord r;
  r.candidates = {cand(1, 0.005, 0.05)};
  const auto out = run_auction(r, ActionVector(), 1, 0.01);
  CHECK(out.click_prices[0] == 0.005);
}

TEST_CASE("missing runner-up prices at the reserve") {
  AuctionRecord r;
  r.candidates = {cand(1, 2.0, 0.05)};
  const auto out = run_auction(r, ActionVector(), 1, 0.03);
  CHECK(out.click_prices[0] == 0.03);
}

TEST_CASE("ties break on bid then id") {
  AuctionRecord r;
  r.candidates = {cand(1, 1.0, 0.1), cand(2, 2.0, 0.05), cand(3, 2.0, 0.05)};
  const auto out = run_auction(r, ActionVector(), 3);
  CHECK(out.winner_ids == std::vector<CandidateId>{3, 2, 1});
}

TEST_CASE("empty record and k = 0 are contract violations") {
  AuctionRecord r;
  CHECK_THROWS_AS(run_auction(r, ActionVector()), ContractError);
  r.candidates = {cand(1, 1.0, 0.1)};
  CHECK_THROWS_AS(run_auction(r, ActionVector(), 0), ContractError);
}

TEST_CASE("run_auction matches the sort-then-price oracle") {
  Rng rng(11);
  for (int i = 0; i < 3000; ++i) {
    const auto r = random_record(rng, 1 + i % 25);
    const auto a = random_action(rng);
    const std::size_t k = 1 + static_cast<std::size_t>(i % 3);
    const double reserve = 0.01 * static_cast<double>(i % 4);
    const auto got = run_auction(r, a, k, reserve);
    const auto want = sort_then_price(r, a, k, reserve);
    REQUIRE(got.winner_ids == want.winners);
    for (std::size_t s = 0; s < want.prices.size(); ++s) {
      CHECK(got.click_prices[s] == doctest::Approx(want.prices[s]).epsilon(1e-12));
    }
  }
}

TEST_CASE("property: reserve <= click price <= winner bid") {
  Rng rng(5);
  for (int i = 0; i < 20000; ++i) {
    const auto r = random_record(rng, 2 + i % 20);
    const auto a = random_action(rng);
    const double reserve = 0.01;
    const auto out = run_auction(r, a, 1 + i % 2, reserve);
    for (std::size_t s = 0; s < out.winner_index.size(); ++s) {
      const double bid = r.candidates[out.winner_index[s]].bid;
      REQUIRE(out.click_prices[s] >= std::min(reserve, bid));
      REQUIRE(out.click_prices[s] <= bid);
    }
  }
}

TEST_CASE("property: raising a bid never lowers the rank position") {
  Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    auto r = random_record(rng, 2 + i % 12);
    const auto a = random_action(rng);
    const std::size_t j = static_cast<std::size_t>(i) % r.candidates.size();
    const CandidateId id = r.candidates[j].candidate_id;
    const auto before = rank_position(r, a, id);
    r.candidates[j].bid *= 1.0 + 2.0 * uniform01(rng);
    CHECK(rank_position(r, a, id) <= before);
  }
}

TEST_CASE("property: scaling every bid keeps the order and scales prices") {
  Rng rng(13);
  for (int i = 0; i < 2000; ++i) {
    auto r = random_record(rng, 2 + i % 15);
    ActionVector a = random_action(rng);
    a[1] = 0.0;
    a[3] = 0.0;
    const auto base = run_auction(r, a, 2, 0.0);
    // Powers of two scale without rounding; other factors up to rounding.
    const double c = i % 2 == 0 ? 4.0 : 0.1 + 3.0 * uniform01(rng);
    for (auto& cd : r.candidates) cd.bid *= c;
    const auto scaled = run_auction(r, a, 2, 0.0);
    REQUIRE(scaled.winner_ids == base.winner_ids);
    for (std::size_t s = 0; s < base.click_prices.size(); ++s) {
      if (i % 2 == 0) {
        CHECK(scaled.click_prices[s] == c * base.click_prices[s]);
      } else {
        CHECK(scaled.click_prices[s] == doctest::Approx(c * base.click_prices[s]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("property: identical inputs give identical outcomes") {
  Rng rng(17);
  const auto r = random_record(rng, 20);
  const auto a = random_action(rng);
  const auto x = run_auction(r, a, 2);
  const auto y = run_auction(r, a, 2);
  CHECK(x.winner_ids == y.winner_ids);
  CHECK(x.click_prices == y.click_prices);
  CHECK(x.scores == y.scores);
}

TEST_CASE("baseline score") {
  CHECK(baseline_score(cand(1, 5.0, 0.1), 2.0) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK_THROWS_AS(baseline_score(cand(1, 5.0, 0.1), 0.0), ContractError);
}

TEST_CASE("baseline with exponent 1 orders like eCPM") {
  Rng rng(19);
  for (int i = 0; i < 500; ++i) {
    const auto r = random_record(rng, 10);
    const auto out = run_auction(r, baseline_action(1.0), 10);
    for (std::size_t s = 1; s < out.winner_index.size(); ++s) {
      const auto& hi = r.candidates[out.winner_index[s - 1]];
      const auto& lo = r.candidates[out.winner_index[s]];
      CHECK(hi.pred_ctr * hi.bid >= lo.pred_ctr * lo.bid);
    }
  }
}

TEST_CASE("baseline exponent near zero orders by bid") {
  Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    const auto r = random_record(rng, 8);
    const auto out = run_auction(r, baseline_action(1e-9), 8);
    for (std::size_t s = 1; s < out.winner_index.size(); ++s) {
      CHECK(r.candidates[out.winner_index[s - 1]].bid >= r.candidates[out.winner_index[s]].bid);
    }
  }
}
