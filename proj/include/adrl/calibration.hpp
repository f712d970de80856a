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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adrl/types.hpp"

namespace adrl {

/// Context fields a calibration partition can be keyed on.
enum class ContextField { QueryId, QueryCategory, AgeBucket, Gender, AdPosition, DeviceType };

std::string to_string(ContextField f);
ContextField parse_context_field(const std::string& name);
std::int64_t field_value(const SearchContext& c, ContextField f) noexcept;

using PartitionKey = std::vector<std::int64_t>;

/// Weighted isotonic least squares: the non-decreasing sequence minimizing
/// sum w_i (y_i - f_i)^2. Returns one fitted value per input.
std::vector<double> pool_adjacent_violators(std::span<const double> values,
                                            std::span<const double> weights);

/// Monotone step function over predicted probability. Buckets of width
/// `bin_width`; `breakpoints` are the upper edges of the non-empty buckets.
struct CalibrationMap {
  PartitionKey partition_key;
  double bin_width = 0.01;
  std::vector<std::uint32_t> buckets;
  std::vector<double> breakpoints;
  std::vector<double> values;
  double total_weight = 0.0;

  [[nodiscard]] double apply(double pred) const noexcept;
  [[nodiscard]] bool empty() const noexcept { return values.empty(); }
};

struct IsotonicPoint {
  double pred = 0.0;
  double outcome = 0.0;
  double weight = 1.0;
};

/// Buckets by predicted value, then runs PAV over the bucket means.
CalibrationMap fit_isotonic(std::span<const IsotonicPoint> points, double bin_width = 0.01);

struct CalibrationConfig {
  std::vector<ContextField> partition_fields{ContextField::DeviceType, ContextField::AdPosition};
  double bin_width = 0.01;
  std::size_t min_samples = 1000;
  void validate() const;
};

/// One observed showing: context, predictions and the sampled response.
struct Impression {
  SearchContext context;
  double pred_ctr = 0.0;
  double pred_cvr = 0.0;
  bool clicked = false;
  bool purchased = false;
};

/// Fitted CTR and CVR maps per partition plus global fallbacks. A
/// default-constructed set is the identity calibration.
class CalibrationSet {
 public:
  CalibrationSet() = default;
  explicit CalibrationSet(std::vector<ContextField> fields) : fields_(std::move(fields)) {}

  [[nodiscard]] PartitionKey key_of(const SearchContext& c) const;
  [[nodiscard]] double ctr(double pred, const PartitionKey& key) const noexcept;
  [[nodiscard]] double cvr(double pred, const PartitionKey& key) const noexcept;
  [[nodiscard]] double ctr(double pred, const SearchContext& c) const { return ctr(pred, key_of(c)); }
  [[nodiscard]] double cvr(double pred, const SearchContext& c) const { return cvr(pred, key_of(c)); }

  [[nodiscard]] bool is_identity() const noexcept { return global_ctr_.empty(); }
  [[nodiscard]] const std::vector<ContextField>& fields() const noexcept { return fields_; }
  [[nodiscard]] const CalibrationMap& global_ctr() const noexcept { return global_ctr_; }
  [[nodiscard]] const CalibrationMap& global_cvr() const noexcept { return global_cvr_; }
  [[nodiscard]] const std::map<PartitionKey, CalibrationMap>& ctr_maps() const noexcept { return ctr_; }
  [[nodiscard]] const std::map<PartitionKey, CalibrationMap>& cvr_maps() const noexcept { return cvr_; }
  /// True when `key` has its own CTR map rather than the global fallback.
  [[nodiscard]] bool has_ctr_partition(const PartitionKey& key) const { return ctr_.count(key) > 0; }

  void set_global(CalibrationMap ctr, CalibrationMap cvr);
  void set_partition_ctr(CalibrationMap m);
  void set_partition_cvr(CalibrationMap m);

  void save(const std::filesystem::path& path) const;
  static CalibrationSet load(const std::filesystem::path& path);
  [[nodiscard]] std::string to_text() const;
  static CalibrationSet from_text(const std::string& text);

 private:
  std::vector<ContextField> fields_;
  CalibrationMap global_ctr_;
  CalibrationMap global_cvr_;
  std::map<PartitionKey, CalibrationMap> ctr_;
  std::map<PartitionKey, CalibrationMap> cvr_;
};

/// CTR maps over all impressions, CVR maps over clicked impressions only.
/// Partitions below min_samples route to the global map.
CalibrationSet fit_partitioned(std::span<const Impression> impressions, const CalibrationConfig& cfg);

/// Exposes every candidate of every record once and samples its response
/// from the ground-truth rates.
std::vector<Impression> collect_impressions(const std::vector<AuctionRecord>& records,
                                            std::uint64_t seed);

}  // namespace adrl
