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

#include "adrl/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <stdexcept>
#include <thread>

namespace adrl {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) throw ConfigError("train: learning rates must be > 0");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("train: tau must lie in (0, 1]");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("train: gamma must lie in (0, 1)");
  if (!(regularization >= 0.0)) throw ConfigError("train: regularization must be >= 0");
  if (num_workers == 0) throw ConfigError("train: num_workers must be >= 1");
  if (global_update_every == 0) throw ConfigError("train: global_update_every must be >= 1");
  if (replay_per_worker == 0) throw ConfigError("train: replay_per_worker must be >= 1");
  if (!(reward_scale > 0.0)) throw ConfigError("train: reward_scale must be > 0");
  if (eval_every == 0) throw ConfigError("train: eval_every must be >= 1");
}

TrainConfig TrainConfig::preset(const std::string& name) {
  TrainConfig cfg;
  if (name == "base") return cfg;
  if (name == "learning_rate") {
    cfg.lr_actor *= 10.0;
    cfg.lr_critic *= 10.0;
    return cfg;
  }
  if (name == "batch_size") {
    cfg.batch_size /= 5;
    return cfg;
  }
  if (name == "regular") {
    cfg.regularization = 1e-3;
    return cfg;
  }
  if (name == "production") {
    cfg.lr_actor = 1e-5;
    cfg.lr_critic = 1e-5;
    cfg.regularization = 1e-5;
    cfg.batch_size = 50000;
    cfg.tau = 0.01;
    cfg.optimizer.kind = OptimizerConfig::Kind::Sgd;
    return cfg;
  }
  throw ConfigError("unknown training preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Exploration

Explorer::Explorer(std::span<const AuctionRecord> records, const CalibrationSet& maps,
                   EnvConfig env, ActionBounds bounds, std::uint64_t seed)
    : records_(records), maps_(maps), env_(env), bounds_(bounds), rng_(seed) {
  if (records_.empty()) throw ContractError("explorer: no replay records");
  bounds_.validate();
}

ActionVector Explorer::sample_action() {
  ActionVector a;
  for (std::size_t k = 0; k < kActionDim; ++k) {
    a[k] = bounds_.lo[k] + (bounds_.hi[k] - bounds_.lo[k]) * uniform01(rng_);
  }
  return a;
}

TransitionTuple Explorer::next() {
  std::uniform_int_distribution<std::size_t> pick(0, records_.size() - 1);
  const AuctionRecord& rec = records_[pick(rng_)];
  const ActionVector a = sample_action();
  return step(rec, a, maps_, env_);
}

std::vector<TransitionTuple> explore(std::span<const AuctionRecord> records,
                                     const CalibrationSet& maps, const EnvConfig& env,
                                     const ActionBounds& bounds, std::uint64_t seed,
                                     std::size_t count) {
  Explorer agent(records, maps, env, bounds, seed);
  std::vector<TransitionTuple> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(agent.next());
  return out;
}

// ---------------------------------------------------------------------------
// Learner steps

namespace {

std::vector<double> flatten_actions(std::span<const TransitionTuple> batch) {
  std::vector<double> out(batch.size() * kActionDim);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    std::copy(batch[b].action.values.begin(), batch[b].action.values.end(),
              out.begin() + static_cast<std::ptrdiff_t>(b * kActionDim));
  }
  return out;
}

}  // namespace

CriticStepResult critic_step(std::span<const TransitionTuple> batch, const ActorNet& actor_net,
                             const CriticNet& critic_net, const ParameterSet& critic,
                             const ParameterSet& target_actor, const ParameterSet& target_critic,
                             double gamma, double regularization, double reward_scale, Exec exec) {
  if (batch.empty()) throw ContractError("critic_step: empty batch");
  const std::size_t n = batch.size();

  std::vector<double> target(n);
  std::vector<SearchContext> next_states;
  std::vector<std::size_t> next_index;
  for (std::size_t b = 0; b < n; ++b) {
    target[b] = reward_scale * batch[b].reward;
    if (!batch[b].terminal()) {
      next_states.push_back(*batch[b].next_state);
      next_index.push_back(b);
    }
  }
  if (!next_states.empty()) {
    ActorNet::Cache ac;
    actor_net.forward(target_actor, next_states, ac, exec);
    CriticNet::Cache cc;
    critic_net.forward(target_critic, next_states, ac.actions, cc, exec);
    for (std::size_t j = 0; j < next_index.size(); ++j) target[next_index[j]] += gamma * cc.q[j];
  }

  std::vector<SearchContext> states(n);
  for (std::size_t b = 0; b < n; ++b) states[b] = batch[b].state;
  const std::vector<double> actions = flatten_actions(batch);
  CriticNet::Cache cache;
  critic_net.forward(critic, states, actions, cache, exec);

  CriticStepResult res;
  res.gradient = critic.zeros_like();
  std::vector<double> d_q(n);
  double q_sum = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const double err = cache.q[b] - target[b];
    d_q[b] = err;
    res.td_loss += 0.5 * err * err;
    q_sum += cache.q[b];
  }
  critic_net.backward(critic, cache, d_q, &res.gradient, {}, exec);
  res.loss = res.td_loss;
  if (regularization > 0.0) {
    res.loss += 0.5 * regularization * squared_norm(critic);
    axpy(res.gradient, critic, regularization);
  }
  res.mean_q = q_sum / static_cast<double>(n);
  return res;
}

ActorStepResult actor_step(std::span<const TransitionTuple> batch, const ActorNet& actor_net,
                           const CriticNet& critic_net, const ParameterSet& actor,
                           const ParameterSet& critic, Exec exec) {
  if (batch.empty()) throw ContractError("actor_step: empty batch");
  const std::size_t n = batch.size();
  std::vector<SearchContext> states(n);
  for (std::size_t b = 0; b < n; ++b) states[b] = batch[b].state;

  ActorNet::Cache ac;
  actor_net.forward(actor, states, ac, exec);
  CriticNet::Cache cc;
  critic_net.forward(critic, states, ac.actions, cc, exec);

  ActorStepResult res;
  for (double a : cc.a) res.objective += a;
  // dA/da equals dQ/da: the value stream does not see the action.
  std::vector<double> ones(n, 1.0);
  std::vector<double> d_actions(n * kActionDim);
  critic_net.backward(critic, cc, ones, nullptr, d_actions, exec);
  res.gradient = actor.zeros_like();
  actor_net.backward(actor, ac, d_actions, res.gradient, exec);
  return res;
}

// ---------------------------------------------------------------------------
// Parameter server

ParameterServer::ParameterServer(ParameterSet actor, ParameterSet critic, const TrainConfig& cfg)
    : cfg_(cfg),
      actor_(std::move(actor)),
      critic_(std::move(critic)),
      target_actor_(actor_),
      target_critic_(critic_),
      pending_actor_(actor_.zeros_like()),
      pending_critic_(critic_.zeros_like()),
      actor_opt_(cfg.optimizer, actor_.layout),
      critic_opt_(cfg.optimizer, critic_.layout) {}

ParameterServer::Snapshot ParameterServer::snapshot() const {
  std::lock_guard lock(mu_);
  return {version_, actor_, critic_, target_actor_, target_critic_};
}

ParameterServer::PushReceipt ParameterServer::push(const ParameterSet& actor_grad,
                                                   const ParameterSet& critic_grad,
                                                   std::uint64_t based_on) {
  std::lock_guard lock(mu_);
  if (based_on > version_) throw ContractError("parameter server: gradient from a future version");
  PushReceipt r;
  r.staleness = version_ - based_on;
  max_staleness_ = std::max(max_staleness_, r.staleness);
  axpy(pending_actor_, actor_grad, 1.0);
  axpy(pending_critic_, critic_grad, 1.0);
  if (++pending_ == cfg_.global_update_every) {
    const double inv = 1.0 / static_cast<double>(pending_);
    for (double& g : pending_actor_.values) g *= inv;
    for (double& g : pending_critic_.values) g *= inv;
    critic_opt_.apply(critic_, pending_critic_, cfg_.lr_critic);
    if (version_ >= cfg_.critic_warmup) actor_opt_.apply(actor_, pending_actor_, cfg_.lr_actor);
    soft_update(target_critic_, critic_, cfg_.tau);
    soft_update(target_actor_, actor_, cfg_.tau);
    pending_actor_.fill(0.0);
    pending_critic_.fill(0.0);
    pending_ = 0;
    ++version_;
    r.applied = true;
  }
  r.version = version_;
  return r;
}

std::uint64_t ParameterServer::version() const {
  std::lock_guard lock(mu_);
  return version_;
}

std::uint64_t ParameterServer::max_staleness() const {
  std::lock_guard lock(mu_);
  return max_staleness_;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

struct SharedState {
  std::atomic<std::uint64_t> claimed{0};
  std::atomic<bool> abort{false};
  std::mutex mu;
  std::vector<CurvePoint> curve;
  double loss_sum = 0.0;
  std::uint64_t loss_count = 0;
  std::string failure;
};

class Worker {
 public:
  Worker(std::size_t id, std::span<const AuctionRecord> records, const CalibrationSet& maps,
         const EnvConfig& env, const ActorNet& actor_net, const CriticNet& critic_net,
         const TrainConfig& cfg, ParameterServer& server, SharedState& shared,
         const TrainHooks& hooks)
      : cfg_(cfg),
        actor_net_(actor_net),
        critic_net_(critic_net),
        server_(server),
        shared_(shared),
        hooks_(hooks),
        explorer_(records, maps, env, actor_net.bounds(), derive_seed(cfg.seed, 1000 + id)),
        rng_(derive_seed(cfg.seed, 2000 + id)) {
    replay_.reserve(cfg.replay_per_worker);
    for (std::size_t i = 0; i < cfg.replay_per_worker; ++i) replay_.push_back(explorer_.next());
  }

  void run() {
    std::vector<TransitionTuple> batch(cfg_.batch_size);
    std::uniform_int_distribution<std::size_t> pick(0, replay_.size() - 1);
    while (!shared_.abort.load()) {
      const std::uint64_t ticket = shared_.claimed.fetch_add(1);
      if (ticket >= cfg_.total_steps) break;

      for (std::size_t i = 0; i < cfg_.explore_per_step; ++i) {
        replay_[cursor_] = explorer_.next();
        cursor_ = (cursor_ + 1) % replay_.size();
      }
      for (auto& t : batch) t = replay_[pick(rng_)];

      const ParameterServer::Snapshot snap = server_.snapshot();
      CriticStepResult cs =
          critic_step(batch, actor_net_, critic_net_, snap.critic, snap.target_actor,
                      snap.target_critic, cfg_.gamma, cfg_.regularization, cfg_.reward_scale,
                      cfg_.kernel_exec);
      ActorStepResult as = actor_step(batch, actor_net_, critic_net_, snap.actor, snap.critic,
                                      cfg_.kernel_exec);
      // Descent direction of -sum A + reg/2 |theta|^2.
      ParameterSet actor_grad = snap.actor.zeros_like();
      axpy(actor_grad, as.gradient, -1.0);
      if (cfg_.regularization > 0.0) axpy(actor_grad, snap.actor, cfg_.regularization);

      const auto receipt = server_.push(actor_grad, cs.gradient, snap.version);
      record(cs, receipt, ticket + 1);
    }
  }

 private:
  void record(const CriticStepResult& cs, const ParameterServer::PushReceipt& receipt,
              std::uint64_t pushes) {
    CurvePoint point;
    bool emit = false;
    {
      std::lock_guard lock(shared_.mu);
      shared_.loss_sum += cs.td_loss / static_cast<double>(cfg_.batch_size);
      ++shared_.loss_count;
      if (receipt.applied && receipt.version % cfg_.eval_every == 0) {
        point.version = receipt.version;
        point.pushes = pushes;
        point.critic_loss = shared_.loss_sum / static_cast<double>(shared_.loss_count);
        shared_.loss_sum = 0.0;
        shared_.loss_count = 0;
        emit = true;
      }
    }
    if (!emit) return;
    if (hooks_.evaluate || hooks_.checkpoint) {
      const auto snap = server_.snapshot();
      if (hooks_.evaluate) point.policy_error = hooks_.evaluate(snap.actor);
      if (hooks_.checkpoint) hooks_.checkpoint(point, snap.actor, snap.critic);
    }
    std::lock_guard lock(shared_.mu);
    shared_.curve.push_back(point);
  }

  const TrainConfig& cfg_;
  const ActorNet& actor_net_;
  const CriticNet& critic_net_;
  ParameterServer& server_;
  SharedState& shared_;
  const TrainHooks& hooks_;
  Explorer explorer_;
  Rng rng_;
  std::vector<TransitionTuple> replay_;
  std::size_t cursor_ = 0;
};

}  // namespace

TrainResult train(std::span<const AuctionRecord> records, const CalibrationSet& maps,
                  const EnvConfig& env, const ModelConfig& model, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  env.validate();
  if (records.empty()) throw ContractError("train: no replay records");
  EnvConfig env_cfg = env;
  env_cfg.gamma = cfg.gamma;

  const ActorNet actor_net(model.features, model.actor, model.bounds);
  const CriticNet critic_net(model.features, model.critic, model.bounds);
  Rng init_rng(derive_seed(cfg.seed, 1));
  ParameterSet actor0 = actor_net.init_params(init_rng);
  ParameterSet critic0 = critic_net.init_params(init_rng);

  ParameterServer server(actor0, critic0, cfg);
  SharedState shared;
  {
    CurvePoint initial;
    if (hooks.evaluate) initial.policy_error = hooks.evaluate(actor0);
    if (hooks.checkpoint) hooks.checkpoint(initial, actor0, critic0);
    shared.curve.push_back(initial);
  }

  const std::size_t workers = cfg.serial ? 1 : cfg.num_workers;
  if (cfg.total_steps > 0) {
    std::vector<std::unique_ptr<Worker>> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.push_back(std::make_unique<Worker>(w, records, maps, env_cfg, actor_net, critic_net, cfg,
                                              server, shared, hooks));
    }
    if (workers == 1) {
      pool[0]->run();
    } else {
      std::vector<std::thread> threads;
      for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
          try {
            pool[w]->run();
          } catch (const std::exception& e) {
            std::lock_guard lock(shared.mu);
            if (shared.failure.empty()) {
              shared.failure = "worker " + std::to_string(w) + " failed: " + e.what();
            }
            shared.abort = true;
          }
        });
      }
      for (auto& t : threads) t.join();
      if (!shared.failure.empty()) throw std::runtime_error("train aborted: " + shared.failure);
    }
  }

  auto snap = server.snapshot();
  TrainResult res;
  res.actor = std::move(snap.actor);
  res.critic = std::move(snap.critic);
  res.target_actor = std::move(snap.target_actor);
  res.target_critic = std::move(snap.target_critic);
  res.curve = std::move(shared.curve);
  std::sort(res.curve.begin(), res.curve.end(),
            [](const CurvePoint& a, const CurvePoint& b) { return a.version < b.version; });
  res.pushes = std::min<std::uint64_t>(shared.claimed.load(), cfg.total_steps);
  res.versions = snap.version;
  res.max_staleness = server.max_staleness();
  return res;
}

}  // namespace adrl
