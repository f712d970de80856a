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

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adrl/calibration.hpp"
#include "adrl/kernels.hpp"
#include "adrl/sim_env.hpp"

namespace adrl {

struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;

  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] double value(std::size_t i) const noexcept { return lo + static_cast<double>(i) * step; }
};

struct GridSpec {
  std::array<GridAxis, kActionDim> axes{{{0.5, 2.0, 0.25},
                                         {0.0, 10.0, 1.0},
                                         {0.5, 2.0, 0.25},
                                         {0.0, 10.0, 1.0},
                                         {0.5, 2.0, 0.25}}};
  std::size_t max_points = 2'000'000;

  void validate() const;
  [[nodiscard]] std::size_t size() const;
  /// Point `index` in lexicographic order (a1 slowest, a5 fastest).
  [[nodiscard]] ActionVector point(std::size_t index) const;
  /// Grid with a single value per axis.
  static GridSpec single(const ActionVector& a);
};

/// State of the tiny search space: query and position.
struct StateKey {
  std::uint32_t query_id = 0;
  std::uint32_t ad_position = 0;
  auto operator<=>(const StateKey&) const = default;
};

StateKey state_key_of(const SearchContext& c) noexcept;
std::string to_string(const StateKey& k);

struct OracleResult {
  StateKey state_key;
  ActionVector best_action;
  double best_reward = 0.0;  // summed over the state's records
  std::size_t records = 0;
  SearchContext probe;       // a representative context of the state
  // Every grid point scored the same.
  bool degenerate = false;
};

struct GridSearchOptions {
  // Cap on records scored per state, 0 for all. The first ones are kept.
  std::size_t max_records_per_state = 0;
  Exec exec = Exec::Parallel;
};

/// Aggregated reward of one fixed action over a set of records, as the
/// environment scores it.
double aggregate_reward(std::span<const AuctionRecord> records, const ActionVector& action,
                        const CalibrationSet& maps, const EnvConfig& env);

/// Reward of every grid point over `records`, indexed like GridSpec::point.
std::vector<double> grid_rewards(std::span<const AuctionRecord> records, const CalibrationSet& maps,
                                 const EnvConfig& env, const GridSpec& grid, Exec exec);

/// Exhaustive search per state. Ties go to the lexicographically smallest
/// action.
std::vector<OracleResult> grid_search(std::span<const AuctionRecord> records,
                                      const CalibrationSet& maps, const EnvConfig& env,
                                      const GridSpec& grid, const GridSearchOptions& opts = {});

enum class ErrorWeighting { Uniform, Impressions };

/// Mean squared distance between policy(s) and the oracle action, in
/// bound-normalized coordinates. `probe` restricts the states; an uncovered
/// one is rejected.
double policy_oracle_error(const Policy& policy, std::span<const OracleResult> oracle,
                           const ActionBounds& bounds, ErrorWeighting weighting,
                           std::span<const StateKey> probe = {});

// ---------------------------------------------------------------------------
// Business metrics

struct MetricsReport {
  double rpm = 0.0;
  std::optional<double> ppc;
  double ctr = 0.0;
  std::uint64_t impressions = 0;
  double clicks = 0.0;  // expected clicks are fractional
  double revenue = 0.0;

  static MetricsReport from_counters(double revenue, double clicks, std::uint64_t impressions);
};

struct MetricsDelta {
  double rpm_pct = 0.0;
  std::optional<double> ppc_pct;
  double ctr_pct = 0.0;
};

MetricsDelta percent_delta(const MetricsReport& candidate, const MetricsReport& baseline);

enum class ResponseMode { Expected, Sampled };

/// Serves `stream` with `policy`. Expected mode accrues calibrated rates,
/// sampled mode draws ground-truth responses.
MetricsReport evaluate_policy(const Policy& policy, std::span<const AuctionRecord> stream,
                              const CalibrationSet& maps, const EnvConfig& env, ResponseMode mode,
                              std::uint64_t seed = 0);

Policy fixed_policy(const ActionVector& a);

struct BaselineTuning {
  double exponent = 1.0;
  double rpm = 0.0;
};

/// Picks the squashing exponent with the highest expected RPM.
BaselineTuning tune_baseline(std::span<const AuctionRecord> records, const CalibrationSet& maps,
                             const EnvConfig& env, std::span<const double> exponents);

}  // namespace adrl
