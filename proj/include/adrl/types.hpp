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
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace adrl {

/// Rejected configuration or parameter values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input data (log lines, checkpoint files, calibration files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using CandidateId = std::uint64_t;

/// One advertisement competing in an auction. The true response rates are
/// only known to the generator; scrubbed logs leave them empty.
struct AdCandidate {
  CandidateId candidate_id = 0;
  double bid = 0.0;
  double product_price = 0.0;
  double pred_ctr = 0.0;
  double pred_cvr = 0.0;
  std::optional<double> true_ctr;
  std::optional<double> true_cvr;

  [[nodiscard]] bool has_ground_truth() const noexcept {
    return true_ctr.has_value() && true_cvr.has_value();
  }
  friend bool operator==(const AdCandidate&, const AdCandidate&) = default;
};

/// Search context of one advertisement showing chance: the RL state.
struct SearchContext {
  std::uint32_t query_id = 0;
  std::uint32_t query_category_id = 0;
  std::uint32_t user_age_bucket = 0;
  std::uint32_t user_gender = 0;
  // Aggregated behaviour; reals because the simulator adds expected counts.
  double user_click_count = 0.0;
  double user_purchase_count = 0.0;
  std::uint32_t ad_position = 0;
  std::uint32_t device_type = 0;

  friend bool operator==(const SearchContext&, const SearchContext&) = default;
};

struct AuctionRecord {
  std::uint64_t record_id = 0;
  std::uint64_t session_id = 0;
  SearchContext context;
  std::vector<AdCandidate> candidates;

  friend bool operator==(const AuctionRecord&, const AuctionRecord&) = default;
};

inline constexpr std::size_t kActionDim = 5;

/// Parameters of the ranking function
///   score = ctr^a1 * bid + a2 * (ctr * cvr)^a3 + a4 * cvr^a5 * price.
struct ActionVector {
  std::array<double, kActionDim> values{1.0, 0.0, 1.0, 0.0, 1.0};

  ActionVector() = default;
  ActionVector(double a1, double a2, double a3, double a4, double a5)
      : values{a1, a2, a3, a4, a5} {}
  explicit ActionVector(const std::array<double, kActionDim>& v) : values(v) {}

  [[nodiscard]] double ctr_exponent() const noexcept { return values[0]; }
  [[nodiscard]] double engagement_weight() const noexcept { return values[1]; }
  [[nodiscard]] double engagement_exponent() const noexcept { return values[2]; }
  [[nodiscard]] double advertiser_weight() const noexcept { return values[3]; }
  [[nodiscard]] double advertiser_exponent() const noexcept { return values[4]; }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  friend bool operator==(const ActionVector&, const ActionVector&) = default;
};

/// Box constraint on the action. Exponents live in [0.5, 2], weights in [0, 10].
struct ActionBounds {
  std::array<double, kActionDim> lo{0.5, 0.0, 0.5, 0.0, 0.5};
  std::array<double, kActionDim> hi{2.0, 10.0, 2.0, 10.0, 2.0};

  void validate() const;
  [[nodiscard]] bool contains(const ActionVector& a) const noexcept;
  [[nodiscard]] ActionVector clamp(const ActionVector& a) const noexcept;
  [[nodiscard]] ActionVector midpoint() const noexcept;
  /// Maps into the unit box; degenerate components map to 0.
  [[nodiscard]] std::array<double, kActionDim> normalize(const ActionVector& a) const noexcept;
  [[nodiscard]] ActionVector denormalize(const std::array<double, kActionDim>& u) const noexcept;
};

/// (s, a, r, s') with an empty next state marking the end of a session.
struct TransitionTuple {
  SearchContext state;
  ActionVector action;
  double reward = 0.0;
  std::optional<SearchContext> next_state;

  [[nodiscard]] bool terminal() const noexcept { return !next_state.has_value(); }
  friend bool operator==(const TransitionTuple&, const TransitionTuple&) = default;
};

std::string to_string(const ActionVector& a);
/// Parses "a1,a2,a3,a4,a5".
ActionVector parse_action(const std::string& text);

}  // namespace adrl
