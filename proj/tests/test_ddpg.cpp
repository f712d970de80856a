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

#include "adrl/ddpg.hpp"
#include "adrl/replay_data.hpp"
#include "doctest.h"

using namespace adrl;

namespace {

FeatureSpec tiny_features() {
  FeatureSpec f;
  f.fields = {{StateField::QueryId, 3}, {StateField::AdPosition, 4}};
  f.embedding_dim = 3;
  return f;
}

ModelConfig tiny_model(bool dueling = true) {
  ModelConfig m;
  m.features = tiny_features();
  m.actor.hidden = {6, 5};
  m.critic.branch_width = 5;
  m.critic.joint = {7};
  m.critic.dueling = dueling;
  return m;
}

std::vector<AuctionRecord> tiny_corpus(std::uint64_t seed = 3) {
  GeneratorConfig g;
  g.num_sessions = 60;
  g.num_queries = 3;
  g.min_candidates = 5;
  g.max_candidates = 8;
  return generate_log(g, seed);
}

std::vector<TransitionTuple> tiny_batch(std::size_t n, std::uint64_t seed = 4) {
  EnvConfig env;
  env.delta = 0.5;
  return explore(tiny_corpus(), CalibrationSet{}, env, ActionBounds{}, seed, n);
}

// Parameters spread out so that no unit sits in a flat region.
ParameterSet spread(const ParameterLayout& l, Rng& rng, double scale = 1.0) {
  ParameterSet p(l);
  for (double& v : p.values) v = scale * (2.0 * uniform01(rng) - 1.0);
  return p;
}

TrainConfig quick_train() {
  TrainConfig t;
  t.batch_size = 32;
  t.total_steps = 60;
  t.serial = true;
  t.global_update_every = 1;
  t.replay_per_worker = 400;
  t.explore_per_step = 8;
  t.eval_every = 10;
  return t;
}

}  // namespace

TEST_CASE("explorer draws uniform actions inside the box") {
  const auto recs = tiny_corpus();
  Explorer agent(recs, CalibrationSet{}, EnvConfig{}, ActionBounds{}, 9);
  const ActionBounds b;
  std::array<double, kActionDim> mean{};
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto a = agent.sample_action();
    CHECK(b.contains(a));
    for (std::size_t k = 0; k < kActionDim; ++k) mean[k] += a[k] / n;
  }
  const auto mid = b.midpoint();
  for (std::size_t k = 0; k < kActionDim; ++k) {
    CHECK(std::abs(mean[k] - mid[k]) < 0.01 * (b.hi[k] - b.lo[k]));
  }
}

TEST_CASE("explored transitions are reproducible and consistent with the simulator") {
  const auto a = tiny_batch(300, 5);
  const auto b = tiny_batch(300, 5);
  CHECK(a == b);
  CHECK(a != tiny_batch(300, 6));
  for (const auto& t : a) {
    CHECK(t.reward >= 0.0);
    CHECK(ActionBounds{}.contains(t.action));
  }
  CHECK_THROWS_AS(Explorer(std::span<const AuctionRecord>{}, CalibrationSet{}, EnvConfig{}, ActionBounds{}, 1),
                  ContractError);
}

TEST_CASE("critic step loss matches an independent TD computation") {
  Rng rng(1);
  const auto m = tiny_model();
  const ActorNet an(m.features, m.actor, m.bounds);
  const CriticNet cn(m.features, m.critic, m.bounds);
  const auto critic = spread(cn.layout(), rng);
  const auto t_actor = spread(an.layout(), rng);
  const auto t_critic = spread(cn.layout(), rng);
  const auto batch = tiny_batch(40);
  const double gamma = 0.7;
  const auto res = critic_step(batch, an, cn, critic, t_actor, t_critic, gamma, 0.0);
  double want = 0.0;
  for (const auto& t : batch) {
    double target = t.reward;
    if (!t.terminal()) {
      target += gamma * cn.evaluate(t_critic, *t.next_state, an.act(t_actor, *t.next_state)).q;
    }
    const double err = cn.evaluate(critic, t.state, t.action).q - target;
    want += 0.5 * err * err;
  }
  CHECK(res.td_loss == doctest::Approx(want).epsilon(1e-12));
  CHECK(res.loss == res.td_loss);
}

TEST_CASE("session ends bootstrap nothing") {
  Rng rng(2);
  const auto m = tiny_model();
  const ActorNet an(m.features, m.actor, m.bounds);
  const CriticNet cn(m.features, m.critic, m.bounds);
  const auto critic = spread(cn.layout(), rng);
  auto batch = tiny_batch(20);
  for (auto& t : batch) t.next_state.reset();
  // Wildly different target networks must not change anything.
  const auto r1 = critic_step(batch, an, cn, critic, spread(an.layout(), rng), spread(cn.layout(), rng), 0.9, 0.0);
  const auto r2 = critic_step(batch, an, cn, critic, spread(an.layout(), rng, 5.0), spread(cn.layout(), rng, 5.0), 0.9, 0.0);
  CHECK(r1.td_loss == r2.td_loss);
  CHECK(r1.gradient == r2.gradient);
}

TEST_CASE("duplicating the batch doubles loss and gradient") {
  Rng rng(3);
  const auto m = tiny_model();
  const ActorNet an(m.features, m.actor, m.bounds);
  const CriticNet cn(m.features, m.critic, m.bounds);
  const auto critic = spread(cn.layout(), rng);
  const auto ta = spread(an.layout(), rng);
  const auto tc = spread(cn.layout(), rng);
  const auto batch = tiny_batch(16);
  auto twice = batch;
  twice.insert(twice.end(), batch.begin(), batch.end());
  const auto one = critic_step(batch, an, cn, critic, ta, tc, 0.9, 0.0);
  const auto two = critic_step(twice, an, cn, critic, ta, tc, 0.9, 0.0);
  CHECK(two.td_loss == doctest::Approx(2.0 * one.td_loss).epsilon(1e-12));
  for (std::size_t i = 0; i < one.gradient.size(); ++i) {
    CHECK(two.gradient.values[i] == doctest::Approx(2.0 * one.gradient.values[i]).epsilon(1e-10));
  }
  CHECK_THROWS_AS(critic_step({}, an, cn, critic, ta, tc, 0.9, 0.0), ContractError);
}

TEST_CASE("critic step gradient, with L2, agrees with central differences") {
  Rng rng(4);
  for (bool dueling : {true, false}) {
    const auto m = tiny_model(dueling);
    const ActorNet an(m.features, m.actor, m.bounds);
    const CriticNet cn(m.features, m.critic, m.bounds);
    const auto critic = spread(cn.layout(), rng);
    const auto ta = spread(an.layout(), rng);
    const auto tc = spread(cn.layout(), rng);
    const auto batch = tiny_batch(12);
    const double reg = 1e-2;
    const auto res = critic_step(batch, an, cn, critic, ta, tc, 0.8, reg);
    auto loss = [&](std::span<const double> theta) {
      ParameterSet p = critic;
      p.values.assign(theta.begin(), theta.end());
      return critic_step(batch, an, cn, p, ta, tc, 0.8, reg).loss;
    };
    CHECK(check_gradient(loss, critic.values, res.gradient.values).max_rel_error < 1e-4);
  }
}

TEST_CASE("actor step gradient agrees with central differences of the objective") {
  Rng rng(5);
  const auto m = tiny_model();
  const ActorNet an(m.features, m.actor, m.bounds);
  const CriticNet cn(m.features, m.critic, m.bounds);
  const auto actor = spread(an.layout(), rng);
  const auto critic = spread(cn.layout(), rng);
  const auto batch = tiny_batch(10);
  const auto res = actor_step(batch, an, cn, actor, critic);
  double objective = 0.0;
  for (const auto& t : batch) objective += cn.evaluate(critic, t.state, an.act(actor, t.state)).a;
  CHECK(res.objective == doctest::Approx(objective).epsilon(1e-12));
  auto f = [&](std::span<const double> theta) {
    ParameterSet p = actor;
    p.values.assign(theta.begin(), theta.end());
    return actor_step(batch, an, cn, p, critic).objective;
  };
  CHECK(check_gradient(f, actor.values, res.gradient.values).max_rel_error < 1e-4);
}

TEST_CASE("an advantage blind to the action gives no policy gradient") {
  Rng rng(6);
  const auto m = tiny_model();
  const ActorNet an(m.features, m.actor, m.bounds);
  const CriticNet cn(m.features, m.critic, m.bounds);
  const auto actor = spread(an.layout(), rng);
  auto critic = spread(cn.layout(), rng);
  for (double& v : critic.block(critic.layout.find("critic.action.w"))) v = 0.0;
  const auto res = actor_step(tiny_batch(10), an, cn, actor, critic);
  CHECK(squared_norm(res.gradient) == 0.0);
}

TEST_CASE("parameter server aggregates, versions and warms up") {
  ParameterLayout la, lc;
  la.add("a", 1, 2);
  lc.add("c", 1, 2);
  ParameterSet a0(la), c0(lc);
  a0.values = {1.0, 2.0};
  c0.values = {-1.0, 0.5};
  TrainConfig cfg;
  cfg.global_update_every = 2;
  cfg.optimizer.kind = OptimizerConfig::Kind::Sgd;
  cfg.lr_actor = 0.5;
  cfg.lr_critic = 0.25;
  cfg.tau = 0.5;
  cfg.critic_warmup = 1;
  ParameterServer server(a0, c0, cfg);
  ParameterSet ga(la), gc(lc);
  ga.values = {1.0, 0.0};
  gc.values = {0.0, 2.0};

  auto r = server.push(ga, gc, 0);
  CHECK_FALSE(r.applied);
  CHECK(r.version == 0);
  CHECK(server.snapshot().critic == c0);
  ParameterSet ga2(la), gc2(lc);
  ga2.values = {3.0, 0.0};
  gc2.values = {0.0, 0.0};
  r = server.push(ga2, gc2, 0);
  CHECK(r.applied);
  CHECK(r.version == 1);
  auto s = server.snapshot();
  // Mean critic gradient (0, 1) at lr 0.25; the actor is still warming up.
  CHECK(s.critic.values == std::vector<double>{-1.0, 0.25});
  CHECK(s.actor == a0);
  CHECK(s.target_critic.values == std::vector<double>{-1.0, 0.375});

  server.push(ga, gc, 0);
  r = server.push(ga, gc, 1);
  CHECK(r.version == 2);
  CHECK(server.max_staleness() == 1);
  s = server.snapshot();
  CHECK(s.actor.values == std::vector<double>{0.5, 2.0});
  CHECK(s.target_actor.values == std::vector<double>{0.75, 2.0});
  CHECK_THROWS_AS(server.push(ga, gc, 7), ContractError);
}

TEST_CASE("zero steps return the initial parameters") {
  const auto recs = tiny_corpus();
  auto cfg = quick_train();
  cfg.total_steps = 0;
  const auto m = tiny_model();
  const auto res = train(recs, CalibrationSet{}, EnvConfig{}, m, cfg);
  Rng init(derive_seed(cfg.seed, 1));
  const auto a0 = ActorNet(m.features, m.actor, m.bounds).init_params(init);
  const auto c0 = CriticNet(m.features, m.critic, m.bounds).init_params(init);
  CHECK(res.actor == a0);
  CHECK(res.critic == c0);
  CHECK(res.target_actor == a0);
  CHECK(res.versions == 0);
  CHECK(res.curve.size() == 1);
}

TEST_CASE("serial training is bit-reproducible") {
  const auto recs = tiny_corpus();
  const auto cfg = quick_train();
  const auto m = tiny_model();
  const auto a = train(recs, CalibrationSet{}, EnvConfig{}, m, cfg);
  const auto b = train(recs, CalibrationSet{}, EnvConfig{}, m, cfg);
  CHECK(a.actor == b.actor);
  CHECK(a.critic == b.critic);
  CHECK(a.target_critic == b.target_critic);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) CHECK(a.curve[i].critic_loss == b.curve[i].critic_loss);
  auto other = cfg;
  other.seed = 2;
  CHECK_FALSE(train(recs, CalibrationSet{}, EnvConfig{}, m, other).actor == a.actor);
}

TEST_CASE("asynchronous workers account for every push") {
  const auto recs = tiny_corpus();
  auto cfg = quick_train();
  cfg.serial = false;
  cfg.num_workers = 3;
  cfg.global_update_every = 4;
  cfg.total_steps = 40;
  cfg.eval_every = 2;
  int evaluations = 0;
  TrainHooks hooks;
  hooks.evaluate = [&](const ParameterSet&) { return static_cast<double>(++evaluations); };
  const auto res = train(recs, CalibrationSet{}, EnvConfig{}, tiny_model(), cfg, hooks);
  CHECK(res.pushes == 40);
  CHECK(res.versions == 10);
  CHECK(res.curve.size() == 6);
  for (std::size_t i = 1; i < res.curve.size(); ++i) CHECK(res.curve[i].version > res.curve[i - 1].version);
}

TEST_CASE("repeated critic steps fit a fixed batch") {
  Rng rng(7);
  const auto m = tiny_model();
  const ActorNet an(m.features, m.actor, m.bounds);
  const CriticNet cn(m.features, m.critic, m.bounds);
  auto critic = cn.init_params(rng);
  const auto actor = an.init_params(rng);
  auto batch = tiny_batch(64);
  for (auto& t : batch) t.next_state.reset();
  Optimizer opt({}, cn.layout());
  const double first = critic_step(batch, an, cn, critic, actor, critic, 0.9, 0.0, 100.0).td_loss;
  for (int i = 0; i < 1000; ++i) {
    opt.apply(critic, critic_step(batch, an, cn, critic, actor, critic, 0.9, 0.0, 100.0).gradient, 1e-2);
  }
  CHECK(critic_step(batch, an, cn, critic, actor, critic, 0.9, 0.0, 100.0).td_loss < 0.1 * first);
}

TEST_CASE("training presets") {
  CHECK(TrainConfig::preset("regular").regularization == 1e-3);
  CHECK(TrainConfig::preset("base").regularization == 1e-5);
  CHECK(TrainConfig::preset("learning_rate").lr_actor == 10.0 * TrainConfig{}.lr_actor);
  CHECK(TrainConfig::preset("production").optimizer.kind == OptimizerConfig::Kind::Sgd);
  CHECK_THROWS_AS(TrainConfig::preset("fast"), ConfigError);
  TrainConfig bad;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
