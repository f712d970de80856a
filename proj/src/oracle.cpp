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

#include "adrl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adrl/ranking.hpp"
#include "adrl/replay_data.hpp"

namespace adrl {

std::size_t GridAxis::count() const {
  if (!(step > 0.0) || !(hi >= lo)) throw ConfigError("grid axis: need step > 0 and hi >= lo");
  return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

void GridSpec::validate() const {
  const std::size_t n = size();
  if (n > max_points) {
    throw ConfigError("grid of " + std::to_string(n) + " points exceeds the cap of " +
                      std::to_string(max_points));
  }
}

std::size_t GridSpec::size() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.count();
  return n;
}

ActionVector GridSpec::point(std::size_t index) const {
  ActionVector a;
  for (std::size_t k = kActionDim; k-- > 0;) {
    const std::size_t c = axes[k].count();
    a[k] = axes[k].value(index % c);
    index /= c;
  }
  return a;
}

GridSpec GridSpec::single(const ActionVector& a) {
  GridSpec g;
  for (std::size_t k = 0; k < kActionDim; ++k) g.axes[k] = {a[k], a[k], 1.0};
  return g;
}

StateKey state_key_of(const SearchContext& c) noexcept { return {c.query_id, c.ad_position}; }

std::string to_string(const StateKey& k) {
  return "q" + std::to_string(k.query_id) + "/p" + std::to_string(k.ad_position);
}

double aggregate_reward(std::span<const AuctionRecord> records, const ActionVector& action,
                        const CalibrationSet& maps, const EnvConfig& env) {
  double total = 0.0;
  for (const auto& r : records) total += simulate_showing(r, r.context, action, maps, env).reward;
  return total;
}

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
constexpr double kMinRankRate = 1e-6;

// Candidate columns of a record set, flattened.
struct Columns {
  std::vector<std::size_t> offset;  // records + 1
  std::vector<double> rank_ctr, rank_cvr, bid, price, reward_ctr, reward_cvr;
  std::vector<CandidateId> id;
};

Columns columns_of(std::span<const AuctionRecord> records, const CalibrationSet& maps,
                   const EnvConfig& env) {
  Columns c;
  c.offset.push_back(0);
  for (const auto& r : records) {
    const PartitionKey key = maps.key_of(r.context);
    for (const auto& cand : r.candidates) {
      double ctr = cand.pred_ctr, cvr = cand.pred_cvr;
      if (env.calibrated_ranking) {
        ctr = std::max(kMinRankRate, maps.ctr(ctr, key));
        cvr = std::max(kMinRankRate, maps.cvr(cvr, key));
      }
      c.rank_ctr.push_back(ctr);
      c.rank_cvr.push_back(cvr);
      c.bid.push_back(cand.bid);
      c.price.push_back(cand.product_price);
      c.id.push_back(cand.candidate_id);
      c.reward_ctr.push_back(maps.ctr(cand.pred_ctr, key));
      c.reward_cvr.push_back(maps.cvr(cand.pred_cvr, key));
    }
    c.offset.push_back(c.rank_ctr.size());
  }
  return c;
}

std::vector<std::vector<double>> pow_table(const GridAxis& axis, std::span<const double> base,
                                           std::span<const double> factor) {
  std::vector<std::vector<double>> t(axis.count(), std::vector<double>(base.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double e = axis.value(i);
    for (std::size_t c = 0; c < base.size(); ++c) {
      t[i][c] = factor.empty() ? std::pow(base[c], e) : std::pow(base[c], e) * factor[c];
    }
  }
  return t;
}

// d outranks c at every point of a slice when it is no worse on each score
// term (a2, a4 >= 0) and wins the bid/id tie-break.
bool dominates(const Columns& col, std::span<const double> revenue, std::span<const double> eng,
               std::span<const double> adv, std::size_t d, std::size_t c) noexcept {
  return revenue[d] >= revenue[c] && eng[d] >= eng[c] && adv[d] >= adv[c] &&
         ranks_before(0.0, col.bid[d], col.id[d], 0.0, col.bid[c], col.id[c]);
}

// Rewards of every (a2, a4) pair for one fixed (a1, a3, a5).
void score_slice(const Columns& col, const EnvConfig& env, const GridSpec& grid,
                 std::span<const double> ctr_pow, std::span<const double> eng,
                 std::span<const double> adv, std::size_t i1, std::size_t i3, std::size_t i5,
                 std::vector<double>& rewards) {
  const std::size_t n2 = grid.axes[1].count(), n3 = grid.axes[2].count();
  const std::size_t n4 = grid.axes[3].count(), n5 = grid.axes[4].count();
  const std::size_t m = col.bid.size();
  std::vector<double> revenue(m);
  for (std::size_t c = 0; c < m; ++c) revenue[c] = ctr_pow[c] * col.bid[c];
  const bool signed_axes = grid.axes[1].lo < 0.0 || grid.axes[3].lo < 0.0;

  // Only candidates that can reach the top two somewhere in the slice matter.
  std::vector<std::size_t> live, live_offset{0};
  live.reserve(m);
  for (std::size_t r = 0; r + 1 < col.offset.size(); ++r) {
    const std::size_t lo = col.offset[r], hi = col.offset[r + 1];
    for (std::size_t c = lo; c < hi; ++c) {
      int beaten = 0;
      for (std::size_t d = lo; d < hi && beaten < 2 && !signed_axes; ++d) {
        if (d != c && dominates(col, revenue, eng, adv, d, c)) ++beaten;
      }
      if (beaten < 2) live.push_back(c);
    }
    live_offset.push_back(live.size());
  }
  std::vector<double> score(live.size()), live_rev(live.size()), live_eng(live.size()),
      live_adv(live.size());
  for (std::size_t j = 0; j < live.size(); ++j) {
    live_rev[j] = revenue[live[j]];
    live_eng[j] = eng[live[j]];
    live_adv[j] = adv[live[j]];
  }

  for (std::size_t i2 = 0; i2 < n2; ++i2) {
    const double a2 = grid.axes[1].value(i2);
    for (std::size_t i4 = 0; i4 < n4; ++i4) {
      const double a4 = grid.axes[3].value(i4);
      for (std::size_t j = 0; j < live.size(); ++j) {
        score[j] = live_rev[j] + (a2 * live_eng[j] + a4 * live_adv[j]);
      }

      double total = 0.0;
      for (std::size_t r = 0; r + 1 < live_offset.size(); ++r) {
        std::size_t best = kNone, second = kNone;
        double second_score = -std::numeric_limits<double>::infinity();
        for (std::size_t j = live_offset[r]; j < live_offset[r + 1]; ++j) {
          // Strictly below the runner-up: cannot enter the top two.
          if (score[j] < second_score) continue;
          const std::size_t c = live[j];
          if (best == kNone || ranks_before(score[j], col.bid[c], col.id[c], score[best],
                                            col.bid[live[best]], col.id[live[best]])) {
            second = best;
            best = j;
          } else if (second == kNone || ranks_before(score[j], col.bid[c], col.id[c], score[second],
                                                     col.bid[live[second]], col.id[live[second]])) {
            second = j;
          }
          if (second != kNone) second_score = score[second];
        }
        const std::size_t w = live[best];
        RankTerms t;
        t.ctr_power = ctr_pow[w];
        t.revenue = revenue[w];
        t.nonrevenue = a2 * eng[w] + a4 * adv[w];
        t.score = score[best];
        const double runner = second == kNone ? 0.0 : score[second];
        const double price = gsp_click_price(runner, t, col.bid[w], env.reserve);
        total += showing_reward(col.reward_ctr[w], col.reward_cvr[w], price, col.price[w], env);
      }
      rewards[(((i1 * n2 + i2) * n3 + i3) * n4 + i4) * n5 + i5] = total;
    }
  }
}

}  // namespace

std::vector<double> grid_rewards(std::span<const AuctionRecord> records, const CalibrationSet& maps,
                                 const EnvConfig& env, const GridSpec& grid, Exec exec) {
  grid.validate();
  env.validate();
  const std::size_t total = grid.size();
  std::vector<double> rewards(total, 0.0);
  const bool parallel = exec == Exec::Parallel;

  if (env.k != 1) {
    const auto n = static_cast<std::int64_t>(total);
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      rewards[ui] = aggregate_reward(records, grid.point(ui), maps, env);
    }
    return rewards;
  }

  for (const auto& r : records) {
    if (r.candidates.empty()) throw ContractError("grid search: record has no candidates");
  }
  const Columns col = columns_of(records, maps, env);
  std::vector<double> joint(col.rank_ctr.size());
  for (std::size_t c = 0; c < joint.size(); ++c) joint[c] = col.rank_ctr[c] * col.rank_cvr[c];
  const auto ctr_pow = pow_table(grid.axes[0], col.rank_ctr, {});
  const auto eng = pow_table(grid.axes[2], joint, {});
  const auto adv = pow_table(grid.axes[4], col.rank_cvr, col.price);

  const std::size_t n1 = grid.axes[0].count(), n3 = grid.axes[2].count();
  const std::size_t n5 = grid.axes[4].count();
  const auto slices = static_cast<std::int64_t>(n1 * n3 * n5);
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::int64_t s = 0; s < slices; ++s) {
    const auto us = static_cast<std::size_t>(s);
    const std::size_t i1 = us / (n3 * n5), i3 = (us / n5) % n3, i5 = us % n5;
    score_slice(col, env, grid, ctr_pow[i1], eng[i3], adv[i5], i1, i3, i5, rewards);
  }
  return rewards;
}

std::vector<OracleResult> grid_search(std::span<const AuctionRecord> records,
                                      const CalibrationSet& maps, const EnvConfig& env,
                                      const GridSpec& grid, const GridSearchOptions& opts) {
  grid.validate();
  std::map<StateKey, std::vector<AuctionRecord>> by_state;
  for (const auto& r : records) {
    auto& bucket = by_state[state_key_of(r.context)];
    if (opts.max_records_per_state == 0 || bucket.size() < opts.max_records_per_state) {
      bucket.push_back(r);
    }
  }

  std::vector<OracleResult> out;
  for (const auto& [key, recs] : by_state) {
    const std::vector<double> rewards = grid_rewards(recs, maps, env, grid, opts.exec);
    OracleResult res;
    res.state_key = key;
    res.records = recs.size();
    res.probe = recs.front().context;
    std::size_t best = 0;
    bool all_equal = true;
    for (std::size_t i = 1; i < rewards.size(); ++i) {
      if (rewards[i] != rewards[0]) all_equal = false;
      if (rewards[i] > rewards[best]) best = i;
    }
    res.best_action = grid.point(best);
    res.best_reward = rewards[best];
    res.degenerate = rewards.size() > 1 && all_equal;
    out.push_back(res);
  }
  return out;
}

double policy_oracle_error(const Policy& policy, std::span<const OracleResult> oracle,
                           const ActionBounds& bounds, ErrorWeighting weighting,
                           std::span<const StateKey> probe) {
  std::vector<const OracleResult*> used;
  if (probe.empty()) {
    for (const auto& o : oracle) used.push_back(&o);
  } else {
    for (const auto& k : probe) {
      auto it = std::find_if(oracle.begin(), oracle.end(),
                             [&](const OracleResult& o) { return o.state_key == k; });
      if (it == oracle.end()) {
        throw ContractError("policy_oracle_error: state " + to_string(k) + " not covered by the oracle");
      }
      used.push_back(&*it);
    }
  }
  if (used.empty()) throw ContractError("policy_oracle_error: no states to probe");

  double num = 0.0, den = 0.0;
  for (const auto* o : used) {
    const auto u = bounds.normalize(policy(o->probe));
    const auto v = bounds.normalize(o->best_action);
    double d = 0.0;
    for (std::size_t k = 0; k < kActionDim; ++k) d += (u[k] - v[k]) * (u[k] - v[k]);
    const double w = weighting == ErrorWeighting::Uniform ? 1.0 : static_cast<double>(o->records);
    num += w * d;
    den += w;
  }
  if (!(den > 0.0)) throw ContractError("policy_oracle_error: zero total weight");
  return num / den;
}

// ---------------------------------------------------------------------------

MetricsReport MetricsReport::from_counters(double revenue, double clicks, std::uint64_t impressions) {
  if (impressions == 0) throw DataError("metrics: zero impressions");
  MetricsReport m;
  m.revenue = revenue;
  m.clicks = clicks;
  m.impressions = impressions;
  const auto imp = static_cast<double>(impressions);
  m.rpm = 1000.0 * revenue / imp;
  m.ctr = clicks / imp;
  if (clicks > 0.0) m.ppc = revenue / clicks;
  return m;
}

MetricsDelta percent_delta(const MetricsReport& candidate, const MetricsReport& baseline) {
  auto pct = [](double x, double base) { return base == 0.0 ? 0.0 : 100.0 * (x - base) / base; };
  MetricsDelta d;
  d.rpm_pct = pct(candidate.rpm, baseline.rpm);
  d.ctr_pct = pct(candidate.ctr, baseline.ctr);
  if (candidate.ppc && baseline.ppc) d.ppc_pct = pct(*candidate.ppc, *baseline.ppc);
  return d;
}

MetricsReport evaluate_policy(const Policy& policy, std::span<const AuctionRecord> stream,
                              const CalibrationSet& maps, const EnvConfig& env, ResponseMode mode,
                              std::uint64_t seed) {
  if (stream.empty()) throw DataError("evaluate_policy: empty stream");
  env.validate();
  constexpr std::size_t kShards = 16;
  struct Acc {
    double revenue = 0.0, clicks = 0.0;
    std::uint64_t impressions = 0;
  };
  std::vector<Acc> acc(kShards);
  const std::size_t per = (stream.size() + kShards - 1) / kShards;

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t s = 0; s < static_cast<std::int64_t>(kShards); ++s) {
    const auto us = static_cast<std::size_t>(s);
    Rng rng(derive_seed(seed, us));
    Acc& a = acc[us];
    const std::size_t end = std::min(stream.size(), (us + 1) * per);
    for (std::size_t i = us * per; i < end; ++i) {
      const AuctionRecord& rec = stream[i];
      const ShowingResult show = simulate_showing(rec, rec.context, policy(rec.context), maps, env);
      a.impressions += show.auction.winner_index.size();
      if (mode == ResponseMode::Expected) {
        a.revenue += show.expected_revenue;
        a.clicks += show.expected_clicks;
        continue;
      }
      for (std::size_t w = 0; w < show.auction.winner_index.size(); ++w) {
        if (sample_user_response(rec.candidates[show.auction.winner_index[w]], rng).clicked) {
          a.clicks += 1.0;
          a.revenue += show.auction.click_prices[w];
        }
      }
    }
  }

  Acc total;
  for (const auto& a : acc) {
    total.revenue += a.revenue;
    total.clicks += a.clicks;
    total.impressions += a.impressions;
  }
  return MetricsReport::from_counters(total.revenue, total.clicks, total.impressions);
}

Policy fixed_policy(const ActionVector& a) {
  return [a](const SearchContext&) { return a; };
}

BaselineTuning tune_baseline(std::span<const AuctionRecord> records, const CalibrationSet& maps,
                             const EnvConfig& env, std::span<const double> exponents) {
  if (exponents.empty()) throw ConfigError("tune_baseline: no exponents");
  BaselineTuning best;
  bool first = true;
  for (double e : exponents) {
    const MetricsReport m =
        evaluate_policy(fixed_policy(baseline_action(e)), records, maps, env, ResponseMode::Expected);
    if (first || m.rpm > best.rpm) {
      best = {e, m.rpm};
      first = false;
    }
  }
  return best;
}

}  // namespace adrl
