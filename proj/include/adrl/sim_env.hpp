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

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "adrl/calibration.hpp"
#include "adrl/ranking.hpp"
#include "adrl/types.hpp"

namespace adrl {

struct EnvConfig {
  double delta = 0.0;  // weight of the expected-click term
  // Weight of the expected purchase amount ctr * cvr * product_price.
  double purchase_weight = 0.0;
  double gamma = 0.9;
  std::uint32_t positions_per_session = 4;
  double reserve = kDefaultReserve;
  std::size_t k = 1;
  // Rank on calibrated rather than raw predictions.
  bool calibrated_ranking = false;

  void validate() const;
};

/// Everything one simulated showing produces.
struct ShowingResult {
  AuctionOutcome auction;
  std::vector<double> winner_ctr;  // calibrated, per winner
  std::vector<double> winner_cvr;
  double expected_revenue = 0.0;
  double expected_clicks = 0.0;
  double reward = 0.0;
};

/// Reward of one served ad. Shared by the environment and the grid search so
/// both round identically.
inline double showing_reward(double ctr, double cvr, double click_price, double product_price,
                             const EnvConfig& cfg) noexcept {
  return ctr * click_price + cfg.delta * ctr + cfg.purchase_weight * (ctr * cvr * product_price);
}

/// Runs the auction under `action` and scores it with calibrated response
/// rates: reward = sum over winners of ctr * click_price + delta * ctr, plus
/// the optional purchase-amount term.
ShowingResult simulate_showing(const AuctionRecord& record, const SearchContext& state,
                               const ActionVector& action, const CalibrationSet& maps,
                               const EnvConfig& cfg);

/// One environment transition. The next state keeps the query features, adds
/// the expected clicks and purchases to the behaviour counters and moves to
/// the next position; the last position of a session is terminal.
TransitionTuple step(const AuctionRecord& record, const SearchContext& state,
                     const ActionVector& action, const CalibrationSet& maps, const EnvConfig& cfg);
TransitionTuple step(const AuctionRecord& record, const ActionVector& action,
                     const CalibrationSet& maps, const EnvConfig& cfg);

using Policy = std::function<ActionVector(const SearchContext&)>;

/// Chains a session: the state fed to step t+1 is the next state of step t.
std::vector<TransitionTuple> rollout(std::span<const AuctionRecord> session, const Policy& policy,
                                     const CalibrationSet& maps, const EnvConfig& cfg);

double discounted_return(std::span<const TransitionTuple> transitions, double gamma);

/// Mean click price over winners under `action`; used as the default reward
/// weight for clicks.
double mean_click_price(std::span<const AuctionRecord> records, const ActionVector& action,
                        const EnvConfig& cfg);

std::string transition_to_line(const TransitionTuple& t);
TransitionTuple transition_from_line(const std::string& line, std::size_t line_number = 0);
void write_transitions(const std::filesystem::path& path, std::span<const TransitionTuple> ts);
std::vector<TransitionTuple> read_transitions(const std::filesystem::path& path);

}  // namespace adrl
