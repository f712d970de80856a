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
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "adrl/calibration.hpp"
#include "adrl/nn.hpp"
#include "adrl/sim_env.hpp"

namespace adrl {

struct EsConfig {
  std::size_t n = 20;
  double sigma = 0.1;
  double eta = 0.05;
  // Weight of a click in the online reward; unset means the corpus mean click price.
  std::optional<double> lambda;
  // 0 means one bin per perturbation.
  std::size_t bin_count = 0;
  std::size_t iterations = 20;
  std::uint64_t seed = 1;
  // Fraction of the live stream routed to the experiment bins.
  double traffic_share = 0.02;
  // Subtract the mean relative reward before the update.
  bool mean_centering = false;

  void validate() const;
  [[nodiscard]] std::size_t bins() const noexcept { return bin_count == 0 ? n : bin_count; }
};

/// Gaussian noise epsilon ~ N(0, sigma^2) of the given length, regenerated
/// from its seed.
std::vector<double> perturbation_noise(std::size_t size, std::uint64_t noise_seed, double sigma);

struct Perturbation {
  std::uint64_t noise_seed = 0;
  ParameterSet params;  // theta + epsilon
};

std::vector<Perturbation> perturb(const ParameterSet& theta, std::size_t n, double sigma,
                                  std::uint64_t seed);

/// Stable bin of a session: every record of one session lands in the same bin.
std::size_t traffic_bin(const AuctionRecord& record, std::size_t bin_count) noexcept;
std::vector<std::vector<AuctionRecord>> route_traffic(std::span<const AuctionRecord> stream,
                                                      std::size_t bin_count);
/// Keeps the sessions hashed into the experiment share of the stream.
std::vector<AuctionRecord> sample_traffic(std::span<const AuctionRecord> stream, double share);

struct BinResult {
  std::size_t perturbation_index = 0;
  double total_click_price = 0.0;
  std::uint64_t click_number = 0;
  std::uint64_t served_ad_number = 0;
  double relative_reward = 0.0;
  // No traffic reached the bin; excluded from the update.
  bool empty = true;
};

/// Serves every record of the bin with `policy` and samples clicks from the
/// ground-truth rates.
BinResult evaluate_bin(const Policy& policy, std::span<const AuctionRecord> bin,
                       const CalibrationSet& maps, const EnvConfig& env, double lambda,
                       std::uint64_t seed, std::size_t perturbation_index = 0);

struct EsUpdate {
  ParameterSet params;
  std::size_t participating = 0;
  bool skipped = false;  // every bin was empty
};

/// theta' = theta + eta / (n sigma) * sum_i R_i epsilon_i over the
/// non-empty bins, with epsilon_i regenerated from noise_seeds[i].
EsUpdate es_update(const ParameterSet& theta, std::span<const BinResult> results,
                   std::span<const std::uint64_t> noise_seeds, const EsConfig& cfg);

struct EsIterationReport {
  std::size_t iteration = 0;
  std::vector<BinResult> bins;
  double mean_relative_reward = 0.0;
  double rpm = 0.0;
  std::optional<double> ppc;
  double ctr = 0.0;
  std::size_t participating = 0;
  bool skipped = false;
};

struct EsRunResult {
  ParameterSet params;
  std::vector<EsIterationReport> iterations;
  double lambda = 0.0;
};

/// Source of the live stream for one iteration.
using StreamSource = std::function<std::vector<AuctionRecord>(std::size_t iteration)>;

/// Online loop over cfg.iterations. Bins are evaluated in parallel; the run
/// is bit-reproducible for a fixed seed and stream.
EsRunResult run_es(const ActorNet& actor, const ParameterSet& theta0, const StreamSource& stream,
                   const CalibrationSet& maps, const EnvConfig& env, const EsConfig& cfg);

}  // namespace adrl
