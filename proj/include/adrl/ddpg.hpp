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

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adrl/calibration.hpp"
#include "adrl/nn.hpp"
#include "adrl/sim_env.hpp"

namespace adrl {

struct ModelConfig {
  FeatureSpec features;
  ActorArch actor;
  CriticArch critic;
  ActionBounds bounds;
};

struct TrainConfig {
  std::size_t batch_size = 512;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double tau = 0.01;
  double gamma = 0.9;
  double regularization = 1e-5;
  std::size_t num_workers = 4;
  // Pushes aggregated into one applied update of the global parameters.
  std::size_t global_update_every = 10;
  // Total gradient pushes across all workers.
  std::size_t total_steps = 2000;
  std::uint64_t seed = 1;
  OptimizerConfig optimizer;
  std::size_t replay_per_worker = 20000;
  std::size_t explore_per_step = 64;
  double reward_scale = 1.0;
  // Applied updates that train the critic alone before the actor moves.
  std::size_t critic_warmup = 0;
  // Applied updates between checkpoints / curve points.
  std::size_t eval_every = 50;
  // Forces a single worker running in the calling thread.
  bool serial = false;
  Exec kernel_exec = Exec::Serial;

  void validate() const;
  /// Desk-scale presets for the hyperparameter study: "base",
  /// "learning_rate", "batch_size", "regular", plus "production" with
  /// full-scale SGD settings.
  static TrainConfig preset(const std::string& name);
};

/// Uniform exploration agent: picks replay records uniformly and acts with
/// actions drawn uniformly from the bounds box.
class Explorer {
 public:
  Explorer(std::span<const AuctionRecord> records, const CalibrationSet& maps, EnvConfig env,
           ActionBounds bounds, std::uint64_t seed);

  ActionVector sample_action();
  TransitionTuple next();

 private:
  std::span<const AuctionRecord> records_;
  const CalibrationSet& maps_;
  EnvConfig env_;
  ActionBounds bounds_;
  Rng rng_;
};

std::vector<TransitionTuple> explore(std::span<const AuctionRecord> records,
                                     const CalibrationSet& maps, const EnvConfig& env,
                                     const ActionBounds& bounds, std::uint64_t seed,
                                     std::size_t count);

struct CriticStepResult {
  ParameterSet gradient;  // d(loss)/d(theta_Q), including the L2 term
  double loss = 0.0;      // sum 1/2 (Q* - Q)^2 + reg/2 |theta_Q|^2
  double td_loss = 0.0;   // the squared-error part alone
  double mean_q = 0.0;
};

/// Temporal-difference step: Q* = r + gamma * Q'(s', pi'(s')), or r at the
/// end of a session.
CriticStepResult critic_step(std::span<const TransitionTuple> batch, const ActorNet& actor_net,
                             const CriticNet& critic_net, const ParameterSet& critic,
                             const ParameterSet& target_actor, const ParameterSet& target_critic,
                             double gamma, double regularization, double reward_scale = 1.0,
                             Exec exec = Exec::Serial);

struct ActorStepResult {
  ParameterSet gradient;   // ascent direction: sum dA/da * dpi/dtheta
  double objective = 0.0;  // sum A(s, pi(s))
};

/// Deterministic policy gradient through the critic's advantage stream.
ActorStepResult actor_step(std::span<const TransitionTuple> batch, const ActorNet& actor_net,
                           const CriticNet& critic_net, const ParameterSet& actor,
                           const ParameterSet& critic, Exec exec = Exec::Serial);

/// In-process global parameter store. Reads return one consistent version;
/// pushes accumulate and every `global_update_every` of them is applied.
class ParameterServer {
 public:
  ParameterServer(ParameterSet actor, ParameterSet critic, const TrainConfig& cfg);

  struct Snapshot {
    std::uint64_t version = 0;
    ParameterSet actor;
    ParameterSet critic;
    ParameterSet target_actor;
    ParameterSet target_critic;
  };
  [[nodiscard]] Snapshot snapshot() const;

  struct PushReceipt {
    std::uint64_t version = 0;  // version after the push
    std::uint64_t staleness = 0;
    bool applied = false;
  };
  /// Both gradients are descent directions of the respective losses.
  /// `based_on` is the version the gradients were computed from.
  PushReceipt push(const ParameterSet& actor_grad, const ParameterSet& critic_grad,
                   std::uint64_t based_on);

  [[nodiscard]] std::uint64_t version() const;
  [[nodiscard]] std::uint64_t max_staleness() const;

 private:
  mutable std::mutex mu_;
  TrainConfig cfg_;
  ParameterSet actor_, critic_, target_actor_, target_critic_;
  ParameterSet pending_actor_, pending_critic_;
  std::size_t pending_ = 0;
  Optimizer actor_opt_, critic_opt_;
  std::uint64_t version_ = 0;
  std::uint64_t max_staleness_ = 0;
};

struct CurvePoint {
  std::uint64_t version = 0;
  std::uint64_t pushes = 0;
  double critic_loss = 0.0;  // mean per-sample TD loss since the previous point
  std::optional<double> policy_error;
};

struct TrainResult {
  ParameterSet actor;
  ParameterSet critic;
  ParameterSet target_actor;
  ParameterSet target_critic;
  std::vector<CurvePoint> curve;
  std::uint64_t pushes = 0;
  std::uint64_t versions = 0;
  std::uint64_t max_staleness = 0;
};

struct TrainHooks {
  /// Scores an actor snapshot (e.g. distance to the grid oracle).
  std::function<double(const ParameterSet& actor)> evaluate;
  /// Called at every curve point with the current global parameters.
  std::function<void(const CurvePoint&, const ParameterSet& actor, const ParameterSet& critic)>
      checkpoint;
};

/// Asynchronous DDPG. With one worker (or cfg.serial) the run is exactly
/// reproducible from the seed.
TrainResult train(std::span<const AuctionRecord> records, const CalibrationSet& maps,
                  const EnvConfig& env, const ModelConfig& model, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

}  // namespace adrl
