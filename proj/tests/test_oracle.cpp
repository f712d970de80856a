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

#include <cmath>
#include <map>

#include "adrl/oracle.hpp"
#include "adrl/replay_data.hpp"
#include "doctest.h"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace adrl;

namespace {

GridSpec small_grid() {
  GridSpec g;
  g.axes = {{{0.5, 2.0, 0.75}, {0.0, 10.0, 5.0}, {0.5, 2.0, 0.75}, {0.0, 10.0, 5.0}, {1.0, 2.0, 1.0}}};
  return g;
}

std::vector<AuctionRecord> corpus(std::size_t sessions, std::uint64_t seed) {
  GeneratorConfig g;
  g.num_sessions = sessions;
  g.num_queries = 3;
  g.min_candidates = 6;
  g.max_candidates = 12;
  return generate_log(g, seed);
}

CalibrationSet maps_for(const std::vector<AuctionRecord>& recs) {
  CalibrationConfig c;
  c.min_samples = 100;
  return fit_partitioned(collect_impressions(recs, 5), c);
}

EnvConfig test_env() {
  EnvConfig env;
  env.delta = 0.4;
  env.purchase_weight = 0.5;
  return env;
}

}  // namespace

TEST_CASE("grid geometry") {
  const GridSpec def;
  CHECK(def.axes[0].count() == 7);
  CHECK(def.axes[1].count() == 11);
  CHECK(def.size() == 41503);
  CHECK(def.point(0) == ActionVector(0.5, 0, 0.5, 0, 0.5));
  CHECK(def.point(def.size() - 1) == ActionVector(2, 10, 2, 10, 2));
  CHECK(def.point(1) == ActionVector(0.5, 0, 0.5, 0, 0.75));
  CHECK(def.point(7) == ActionVector(0.5, 0, 0.5, 1, 0.5));
  CHECK(GridSpec::single(ActionVector(1, 2, 3, 4, 5)).size() == 1);
  CHECK(GridSpec::single(ActionVector(1, 2, 3, 4, 5)).point(0) == ActionVector(1, 2, 3, 4, 5));
  GridSpec huge = def;
  huge.max_points = 1000;
  CHECK_THROWS_AS(huge.validate(), ConfigError);
  GridAxis bad{1.0, 2.0, 0.0};
  CHECK_THROWS_AS((void)bad.count(), ConfigError);
}

TEST_CASE("grid rewards equal one-at-a-time evaluation") {
#ifdef _OPENMP
  omp_set_num_threads(4);
#endif
  const auto recs = corpus(20, 1);
  const auto maps = maps_for(corpus(300, 2));
  const auto env = test_env();
  const auto grid = small_grid();
  const auto serial = grid_rewards(recs, maps, env, grid, Exec::Serial);
  const auto parallel = grid_rewards(recs, maps, env, grid, Exec::Parallel);
  REQUIRE(serial.size() == grid.size());
  CHECK(serial == parallel);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(serial[i] == doctest::Approx(aggregate_reward(recs, grid.point(i), maps, env)).epsilon(1e-12));
  }
}

TEST_CASE("aggregate reward sums the environment's step rewards") {
  const auto recs = corpus(10, 3);
  const auto maps = maps_for(corpus(300, 4));
  const auto env = test_env();
  const ActionVector a(1.25, 3, 0.75, 2, 1.5);
  double want = 0.0;
  for (const auto& r : recs) want += simulate_showing(r, r.context, a, maps, env).reward;
  CHECK(aggregate_reward(recs, a, maps, env) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("grid search picks the per-state argmax") {
  const auto recs = corpus(120, 5);
  const auto maps = maps_for(corpus(300, 6));
  const auto env = test_env();
  const auto grid = small_grid();
  GridSearchOptions opts;
  opts.max_records_per_state = 25;
  const auto found = grid_search(recs, maps, env, grid, opts);
  std::map<StateKey, std::vector<AuctionRecord>> by;
  for (const auto& r : recs) {
    auto& v = by[state_key_of(r.context)];
    if (v.size() < 25) v.push_back(r);
  }
  REQUIRE(found.size() == by.size());
  for (const auto& o : found) {
    const auto& sub = by.at(o.state_key);
    CHECK(o.records == sub.size());
    CHECK(state_key_of(o.probe) == o.state_key);
    std::size_t best = 0;
    double best_r = -1.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double r = aggregate_reward(sub, grid.point(i), maps, env);
      if (r > best_r) {
        best_r = r;
        best = i;
      }
    }
    CHECK(o.best_action == grid.point(best));
    CHECK(o.best_reward == doctest::Approx(best_r).epsilon(1e-12));
    CHECK_FALSE(o.degenerate);
  }
}

TEST_CASE("a single-point grid returns that point") {
  const auto recs = corpus(30, 7);
  const ActionVector a(1, 2, 1, 2, 1);
  for (const auto& o : grid_search(recs, CalibrationSet{}, test_env(), GridSpec::single(a))) {
    CHECK(o.best_action == a);
  }
}

TEST_CASE("a landscape flat in the action is flagged degenerate") {
  // A single bidder is charged the reserve whatever the ranking.
  AuctionRecord r;
  AdCandidate c;
  c.candidate_id = 1;
  c.bid = 2.0;
  c.pred_ctr = 0.1;
  c.pred_cvr = 0.1;
  c.product_price = 5.0;
  r.candidates = {c};
  const std::vector<AuctionRecord> recs(3, r);
  const auto found = grid_search(recs, CalibrationSet{}, EnvConfig{}, small_grid());
  REQUIRE(found.size() == 1);
  CHECK(found[0].degenerate);
  CHECK(found[0].best_action == small_grid().point(0));
}

TEST_CASE("policy error geometry") {
  OracleResult o;
  o.best_action = ActionVector(0.5, 0, 0.5, 0, 0.5);
  o.records = 1;
  // Normalized offsets (0.5, 1, 0, 0, 0).
  const Policy p = fixed_policy(ActionVector(1.25, 10, 0.5, 0, 0.5));
  const std::vector<OracleResult> oracle{o};
  CHECK(policy_oracle_error(p, oracle, ActionBounds{}, ErrorWeighting::Uniform) == doctest::Approx(1.25));
  CHECK(policy_oracle_error(fixed_policy(o.best_action), oracle, ActionBounds{}, ErrorWeighting::Uniform) == 0.0);

  OracleResult o2 = o;
  o2.state_key = {1, 0};
  o2.best_action = ActionVector(1.25, 10, 0.5, 0, 0.5);
  o2.records = 3;
  const std::vector<OracleResult> two{o, o2};
  CHECK(policy_oracle_error(p, two, ActionBounds{}, ErrorWeighting::Uniform) == doctest::Approx(0.625));
  CHECK(policy_oracle_error(p, two, ActionBounds{}, ErrorWeighting::Impressions) == doctest::Approx(1.25 / 4));
  const std::vector<StateKey> probe{{1, 0}};
  CHECK(policy_oracle_error(p, two, ActionBounds{}, ErrorWeighting::Uniform, probe) == 0.0);
  const std::vector<StateKey> missing{{2, 2}};
  CHECK_THROWS_AS(policy_oracle_error(p, two, ActionBounds{}, ErrorWeighting::Uniform, missing), ContractError);
}

TEST_CASE("metric arithmetic") {
  const auto m = MetricsReport::from_counters(0.5, 0.25, 10);
  CHECK(m.rpm == doctest::Approx(50.0));
  CHECK(m.ctr == doctest::Approx(0.025));
  REQUIRE(m.ppc);
  CHECK(*m.ppc == doctest::Approx(2.0));
  CHECK_FALSE(MetricsReport::from_counters(0.0, 0.0, 4).ppc);
  CHECK_THROWS_AS(MetricsReport::from_counters(1.0, 1.0, 0), DataError);
  const auto base = MetricsReport::from_counters(1.0, 0.5, 10);
  const auto cand = MetricsReport::from_counters(1.02, 0.5, 10);
  const auto d = percent_delta(cand, base);
  CHECK(d.rpm_pct == doctest::Approx(2.0));
  CHECK(d.ctr_pct == doctest::Approx(0.0));
  REQUIRE(d.ppc_pct);
  CHECK(*d.ppc_pct == doctest::Approx(2.0));
}

TEST_CASE("expected-mode evaluation accrues calibrated rates") {
  const auto recs = corpus(80, 8);
  const auto maps = maps_for(corpus(300, 9));
  const EnvConfig env;
  const ActionVector a(1.5, 2, 1, 1, 1.25);
  double revenue = 0.0, clicks = 0.0;
  std::uint64_t shown = 0;
  for (const auto& r : recs) {
    const auto s = simulate_showing(r, r.context, a, maps, env);
    revenue += s.expected_revenue;
    clicks += s.expected_clicks;
    shown += s.auction.winner_ids.size();
  }
  const auto m = evaluate_policy(fixed_policy(a), recs, maps, env, ResponseMode::Expected);
  CHECK(m.impressions == shown);
  CHECK(m.revenue == doctest::Approx(revenue).epsilon(1e-12));
  CHECK(m.clicks == doctest::Approx(clicks).epsilon(1e-12));
  CHECK_THROWS_AS(evaluate_policy(fixed_policy(a), {}, maps, env, ResponseMode::Expected), DataError);
}

TEST_CASE("sampled mode is seeded and tracks expected mode") {
  const EnvConfig env;
  const auto p = fixed_policy(ActionVector(1, 0, 1, 0, 1));
  // Undistorted truth, so identity maps are exact.
  GeneratorConfig g;
  g.num_sessions = 3000;
  g.num_queries = 3;
  g.ctr_distortion.clear();
  g.cvr_distortion.clear();
  const auto honest = generate_log(g, 11);
  const auto a = evaluate_policy(p, honest, CalibrationSet{}, env, ResponseMode::Sampled, 3);
  const auto b = evaluate_policy(p, honest, CalibrationSet{}, env, ResponseMode::Sampled, 3);
  const auto e = evaluate_policy(p, honest, CalibrationSet{}, env, ResponseMode::Expected);
  CHECK(a.revenue == b.revenue);
  CHECK(a.ctr == doctest::Approx(e.ctr).epsilon(0.1));
}

TEST_CASE("baseline policy equals the fixed eCPM-style action") {
  const auto recs = corpus(100, 12);
  const auto maps = maps_for(corpus(300, 13));
  const EnvConfig env;
  const auto a = evaluate_policy(fixed_policy(baseline_action(1.0)), recs, maps, env, ResponseMode::Expected);
  const auto b = evaluate_policy(fixed_policy(ActionVector(1, 0, 1, 0, 1)), recs, maps, env, ResponseMode::Expected);
  CHECK(a.revenue == b.revenue);
  CHECK(a.clicks == b.clicks);

  const std::vector<double> exps{0.5, 1.0, 1.5, 2.0};
  const auto tuned = tune_baseline(recs, maps, env, exps);
  double best = -1.0;
  for (double e : exps) {
    best = std::max(best, evaluate_policy(fixed_policy(baseline_action(e)), recs, maps, env, ResponseMode::Expected).rpm);
  }
  CHECK(tuned.rpm == best);
  CHECK_THROWS_AS(tune_baseline(recs, maps, env, {}), ConfigError);
}
