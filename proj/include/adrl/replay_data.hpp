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
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adrl/random.hpp"
#include "adrl/types.hpp"

namespace adrl {

/// Shape of the synthetic replay corpus. All distributions are artifact
/// choices: log-normal bids and prices, Beta predicted rates, and a per
/// (device, position) power distortion true = pred^beta.
struct GeneratorConfig {
  std::uint32_t num_queries = 3;
  std::uint32_t num_query_categories = 3;
  std::uint32_t num_age_buckets = 6;
  std::uint32_t num_genders = 2;
  std::uint32_t num_devices = 2;
  std::uint32_t positions_per_session = 4;
  std::uint32_t num_sessions = 12500;
  std::uint32_t min_candidates = 20;
  std::uint32_t max_candidates = 24;

  double bid_log_mu = 0.0;
  double bid_log_sigma = 0.6;
  double price_log_mu = 0.0;
  double price_log_sigma = 0.5;
  // Spread of the per-query multiplicative offsets (log scale).
  double query_bid_spread = 0.4;
  double query_ctr_spread = 0.3;

  double ctr_beta_a = 2.0;
  double ctr_beta_b = 38.0;
  double cvr_beta_a = 2.0;
  double cvr_beta_b = 30.0;

  double click_count_mean = 20.0;
  double purchase_count_mean = 2.0;

  // [device][position] exponents; empty means identity. The defaults make
  // predictions overshoot more on device 1 and further down the page.
  std::vector<std::vector<double>> ctr_distortion{{1.0, 1.08, 1.16, 1.24}, {1.12, 1.2, 1.28, 1.36}};
  std::vector<std::vector<double>> cvr_distortion{{0.92, 0.92, 0.92, 0.92}, {1.1, 1.1, 1.1, 1.1}};

  void validate() const;
  [[nodiscard]] double ctr_exponent(std::uint32_t device, std::uint32_t position) const;
  [[nodiscard]] double cvr_exponent(std::uint32_t device, std::uint32_t position) const;
};

/// Applies the configured distortion to a predicted rate.
double distort(double pred, double exponent) noexcept;

/// Deterministic record stream: a pure function of (config, seed).
class LogGenerator {
 public:
  LogGenerator(GeneratorConfig config, std::uint64_t seed);
  /// Market (the per-query profiles) from one seed, traffic from another, so
  /// several streams can share a market.
  LogGenerator(GeneratorConfig config, std::uint64_t market_seed, std::uint64_t traffic_seed);

  /// Next record, or nullopt once num_sessions sessions were emitted.
  std::optional<AuctionRecord> next();
  /// Generates one whole session regardless of the session budget.
  std::vector<AuctionRecord> next_session();

  [[nodiscard]] const GeneratorConfig& config() const noexcept { return config_; }

 private:
  struct QueryProfile {
    std::uint32_t category = 0;
    double bid_log_offset = 0.0;
    double ctr_scale = 1.0;
  };

  void draw_market();
  double sample_beta(double a, double b);

  GeneratorConfig config_;
  Rng rng_;
  std::vector<QueryProfile> queries_;
  std::vector<AuctionRecord> pending_;
  std::size_t pending_pos_ = 0;
  std::uint64_t sessions_emitted_ = 0;
  std::uint64_t next_record_id_ = 0;
  std::uint64_t next_candidate_id_ = 1;
};

std::vector<AuctionRecord> generate_log(const GeneratorConfig& config, std::uint64_t seed);
std::vector<AuctionRecord> generate_log(const GeneratorConfig& config, std::uint64_t market_seed,
                                        std::uint64_t traffic_seed);

struct UserResponse {
  bool clicked = false;
  bool purchased = false;
};

/// Ground-truth user model: click ~ Bernoulli(true_ctr), purchase only after a
/// click with probability true_cvr.
UserResponse sample_user_response(const AdCandidate& candidate, Rng& rng);

void write_log(std::ostream& out, const std::vector<AuctionRecord>& records, bool scrubbed = false);
void write_log(const std::filesystem::path& path, const std::vector<AuctionRecord>& records,
               bool scrubbed = false);

/// Line-by-line reader; malformed lines raise DataError naming the line and field.
class LogReader {
 public:
  explicit LogReader(std::istream& in) : in_(in) {}
  std::optional<AuctionRecord> next();
  [[nodiscard]] std::size_t line_number() const noexcept { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::vector<AuctionRecord> read_log(std::istream& in);
std::vector<AuctionRecord> read_log(const std::filesystem::path& path);

std::string record_to_line(const AuctionRecord& record, bool scrubbed = false);
AuctionRecord record_from_line(const std::string& line, std::size_t line_number = 0);

/// Groups records by session, each session ordered by ad position.
std::vector<std::vector<AuctionRecord>> group_sessions(const std::vector<AuctionRecord>& records);

}  // namespace adrl
