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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adrl/calibration.hpp"
#include "adrl/ddpg.hpp"
#include "adrl/es.hpp"
#include "adrl/oracle.hpp"
#include "adrl/replay_data.hpp"
#include "adrl/sim_env.hpp"

namespace adrl {

/// Everything one run of the pipeline needs. Stored as JSON; unknown keys
/// are rejected so typos surface as errors.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  GeneratorConfig generator;
  CalibrationConfig calibration;
  EnvConfig env;
  // Click weight of the offline reward; unset means the corpus mean click price.
  std::optional<double> delta;
  ModelConfig model;
  std::string train_preset = "base";
  TrainConfig train;
  EsConfig es;
  // Live sessions generated per ES iteration, before the traffic share.
  std::uint32_t es_sessions_per_iteration = 25000;
  GridSpec grid;
  std::size_t oracle_max_records_per_state = 0;
  std::vector<double> baseline_exponents;
  // Sessions of the held-out evaluation stream.
  std::uint32_t holdout_sessions = 5000;

  void validate() const;
};

/// Query and position embeddings sized from the generator.
FeatureSpec default_features(const GeneratorConfig& g);
ExperimentConfig default_experiment();

/// The environment with delta resolved against `corpus` when unset.
EnvConfig resolve_env(const ExperimentConfig& cfg, std::span<const AuctionRecord> corpus);

/// Overlays `text` on the defaults.
ExperimentConfig parse_experiment(const std::string& text);
std::string experiment_to_text(const ExperimentConfig& cfg);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Seeds of the derived streams, so every subcommand agrees on them.
namespace streams {
inline constexpr std::uint64_t kReplay = 1;
inline constexpr std::uint64_t kImpressions = 2;
inline constexpr std::uint64_t kHoldout = 3;
inline constexpr std::uint64_t kEsLive = 4;
inline constexpr std::uint64_t kEvaluation = 5;
}  // namespace streams

/// The replay corpus. The other streams share its market and differ only in
/// the traffic drawn from it.
std::vector<AuctionRecord> replay_stream(const ExperimentConfig& cfg);
std::vector<AuctionRecord> holdout_stream(const ExperimentConfig& cfg);
/// Live traffic of one ES iteration; `salt` separates independent runs.
std::vector<AuctionRecord> live_stream(const ExperimentConfig& cfg, std::size_t iteration,
                                       std::uint64_t salt = 0);

}  // namespace adrl
