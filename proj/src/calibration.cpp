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

#include "adrl/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "adrl/random.hpp"
#include "adrl/replay_data.hpp"
#include "json_io.hpp"

namespace adrl {

namespace {

constexpr std::pair<ContextField, const char*> kFieldNames[] = {
    {ContextField::QueryId, "query_id"},       {ContextField::QueryCategory, "query_category_id"},
    {ContextField::AgeBucket, "user_age_bucket"}, {ContextField::Gender, "user_gender"},
    {ContextField::AdPosition, "ad_position"}, {ContextField::DeviceType, "device_type"},
};

std::uint32_t bucket_of(double pred, double bin_width) noexcept {
  const auto nb = static_cast<std::uint32_t>(std::ceil(1.0 / bin_width - 1e-9));
  const double b = std::floor(std::clamp(pred, 0.0, 1.0) / bin_width);
  return std::min(static_cast<std::uint32_t>(b), nb - 1);
}

}  // namespace

std::string to_string(ContextField f) {
  for (const auto& [field, name] : kFieldNames) {
    if (field == f) return name;
  }
  return "unknown";
}

ContextField parse_context_field(const std::string& name) {
  for (const auto& [field, n] : kFieldNames) {
    if (name == n) return field;
  }
  throw ConfigError("unknown context field '" + name + "'");
}

std::int64_t field_value(const SearchContext& c, ContextField f) noexcept {
  switch (f) {
    case ContextField::QueryId: return c.query_id;
    case ContextField::QueryCategory: return c.query_category_id;
    case ContextField::AgeBucket: return c.user_age_bucket;
    case ContextField::Gender: return c.user_gender;
    case ContextField::AdPosition: return c.ad_position;
    case ContextField::DeviceType: return c.device_type;
  }
  return 0;
}

std::vector<double> pool_adjacent_violators(std::span<const double> values,
                                            std::span<const double> weights) {
  if (values.size() != weights.size()) {
    throw ContractError("pool_adjacent_violators: values and weights differ in length");
  }
  struct Block {
    double mean;
    double weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(weights[i] > 0.0)) throw ContractError("pool_adjacent_violators: weights must be > 0");
    blocks.push_back({values[i], weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      Block top = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      const double w = prev.weight + top.weight;
      prev.mean = (prev.mean * prev.weight + top.mean * top.weight) / w;
      prev.weight = w;
      prev.count += top.count;
    }
  }
  std::vector<double> fit;
  fit.reserve(values.size());
  for (const auto& b : blocks) fit.insert(fit.end(), b.count, b.mean);
  return fit;
}

double CalibrationMap::apply(double pred) const noexcept {
  if (values.empty()) return pred;
  const std::uint32_t b = bucket_of(pred, bin_width);
  auto it = std::lower_bound(buckets.begin(), buckets.end(), b);
  if (it == buckets.end()) return values.back();
  return values[static_cast<std::size_t>(it - buckets.begin())];
}

CalibrationMap fit_isotonic(std::span<const IsotonicPoint> points, double bin_width) {
  if (points.empty()) throw ContractError("fit_isotonic: no observations");
  if (!(bin_width > 0.0 && bin_width <= 1.0)) throw ConfigError("fit_isotonic: bad bin width");
  const auto nb = static_cast<std::size_t>(bucket_of(1.0, bin_width)) + 1;
  std::vector<double> sum(nb, 0.0);
  std::vector<double> weight(nb, 0.0);
  for (const auto& p : points) {
    if (!(p.weight > 0.0)) throw ContractError("fit_isotonic: weights must be > 0");
    const std::uint32_t b = bucket_of(p.pred, bin_width);
    sum[b] += p.weight * p.outcome;
    weight[b] += p.weight;
  }
  CalibrationMap map;
  map.bin_width = bin_width;
  std::vector<double> means;
  std::vector<double> weights;
  for (std::uint32_t b = 0; b < nb; ++b) {
    if (weight[b] <= 0.0) continue;
    map.buckets.push_back(b);
    map.breakpoints.push_back(std::min(1.0, (b + 1) * bin_width));
    means.push_back(sum[b] / weight[b]);
    weights.push_back(weight[b]);
    map.total_weight += weight[b];
  }
  map.values = pool_adjacent_violators(means, weights);
  for (double& v : map.values) v = std::clamp(v, 0.0, 1.0);
  return map;
}

void CalibrationConfig::validate() const {
  if (!(bin_width > 0.0 && bin_width <= 1.0)) throw ConfigError("calibration: bin_width in (0, 1]");
}

PartitionKey CalibrationSet::key_of(const SearchContext& c) const {
  PartitionKey key;
  key.reserve(fields_.size());
  for (ContextField f : fields_) key.push_back(field_value(c, f));
  return key;
}

double CalibrationSet::ctr(double pred, const PartitionKey& key) const noexcept {
  if (auto it = ctr_.find(key); it != ctr_.end()) return it->second.apply(pred);
  return global_ctr_.apply(pred);
}

double CalibrationSet::cvr(double pred, const PartitionKey& key) const noexcept {
  if (auto it = cvr_.find(key); it != cvr_.end()) return it->second.apply(pred);
  return global_cvr_.apply(pred);
}

void CalibrationSet::set_global(CalibrationMap ctr, CalibrationMap cvr) {
  global_ctr_ = std::move(ctr);
  global_cvr_ = std::move(cvr);
}

void CalibrationSet::set_partition_ctr(CalibrationMap m) {
  auto key = m.partition_key;
  ctr_[key] = std::move(m);
}

void CalibrationSet::set_partition_cvr(CalibrationMap m) {
  auto key = m.partition_key;
  cvr_[key] = std::move(m);
}

CalibrationSet fit_partitioned(std::span<const Impression> impressions, const CalibrationConfig& cfg) {
  cfg.validate();
  CalibrationSet set(cfg.partition_fields);
  if (impressions.empty()) return set;

  std::vector<IsotonicPoint> all_ctr;
  std::vector<IsotonicPoint> all_cvr;
  std::map<PartitionKey, std::vector<IsotonicPoint>> part_ctr;
  std::map<PartitionKey, std::vector<IsotonicPoint>> part_cvr;
  all_ctr.reserve(impressions.size());
  for (const auto& imp : impressions) {
    const PartitionKey key = set.key_of(imp.context);
    const IsotonicPoint click{imp.pred_ctr, imp.clicked ? 1.0 : 0.0, 1.0};
    all_ctr.push_back(click);
    part_ctr[key].push_back(click);
    if (imp.clicked) {
      const IsotonicPoint buy{imp.pred_cvr, imp.purchased ? 1.0 : 0.0, 1.0};
      all_cvr.push_back(buy);
      part_cvr[key].push_back(buy);
    }
  }
  CalibrationMap gctr = fit_isotonic(all_ctr, cfg.bin_width);
  CalibrationMap gcvr;
  if (!all_cvr.empty()) {
    gcvr = fit_isotonic(all_cvr, cfg.bin_width);
  } else {
    // No clicks at all: a flat zero map keeps the set non-identity.
    gcvr.bin_width = cfg.bin_width;
    gcvr.buckets = {0};
    gcvr.breakpoints = {cfg.bin_width};
    gcvr.values = {0.0};
  }
  set.set_global(std::move(gctr), std::move(gcvr));
  for (auto& [key, pts] : part_ctr) {
    if (pts.size() < cfg.min_samples) continue;
    CalibrationMap m = fit_isotonic(pts, cfg.bin_width);
    m.partition_key = key;
    set.set_partition_ctr(std::move(m));
  }
  for (auto& [key, pts] : part_cvr) {
    if (pts.size() < cfg.min_samples) continue;
    CalibrationMap m = fit_isotonic(pts, cfg.bin_width);
    m.partition_key = key;
    set.set_partition_cvr(std::move(m));
  }
  return set;
}

std::vector<Impression> collect_impressions(const std::vector<AuctionRecord>& records,
                                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Impression> out;
  for (const auto& r : records) {
    for (const auto& c : r.candidates) {
      const UserResponse resp = sample_user_response(c, rng);
      out.push_back({r.context, c.pred_ctr, c.pred_cvr, resp.clicked, resp.purchased});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: one JSON document with the partition fields and every map.

namespace {

using detail::json;

json map_to_json(const CalibrationMap& m) {
  return json{{"partition_key", m.partition_key}, {"bin_width", m.bin_width},
              {"buckets", m.buckets},             {"breakpoints", m.breakpoints},
              {"values", m.values},               {"total_weight", m.total_weight}};
}

CalibrationMap map_from_json(const json& j) {
  CalibrationMap m;
  try {
    m.partition_key = j.at("partition_key").get<PartitionKey>();
    m.bin_width = j.at("bin_width").get<double>();
    m.buckets = j.at("buckets").get<std::vector<std::uint32_t>>();
    m.breakpoints = j.at("breakpoints").get<std::vector<double>>();
    m.values = j.at("values").get<std::vector<double>>();
    m.total_weight = j.value("total_weight", 0.0);
  } catch (const json::exception& e) {
    throw DataError(std::string("calibration map: ") + e.what());
  }
  if (m.buckets.size() != m.values.size() || m.breakpoints.size() != m.values.size()) {
    throw DataError("calibration map: buckets, breakpoints and values differ in length");
  }
  for (std::size_t i = 1; i < m.values.size(); ++i) {
    if (m.buckets[i] <= m.buckets[i - 1] || m.values[i] < m.values[i - 1]) {
      throw DataError("calibration map: not a monotone step function");
    }
  }
  return m;
}

}  // namespace

std::string CalibrationSet::to_text() const {
  json fields = json::array();
  for (ContextField f : fields_) fields.push_back(to_string(f));
  json ctr = json::array();
  for (const auto& [k, m] : ctr_) ctr.push_back(map_to_json(m));
  json cvr = json::array();
  for (const auto& [k, m] : cvr_) cvr.push_back(map_to_json(m));
  json j{{"partition_fields", fields}, {"identity", is_identity()}, {"ctr", ctr}, {"cvr", cvr}};
  if (!is_identity()) {
    j["global_ctr"] = map_to_json(global_ctr_);
    j["global_cvr"] = map_to_json(global_cvr_);
  }
  return j.dump(1);
}

CalibrationSet CalibrationSet::from_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("calibration file: ") + e.what());
  }
  std::vector<ContextField> fields;
  for (const auto& f : j.value("partition_fields", json::array())) {
    fields.push_back(parse_context_field(f.get<std::string>()));
  }
  CalibrationSet set(std::move(fields));
  if (!j.value("identity", false)) {
    if (!j.contains("global_ctr") || !j.contains("global_cvr")) {
      throw DataError("calibration file: missing global maps");
    }
    set.set_global(map_from_json(j["global_ctr"]), map_from_json(j["global_cvr"]));
  }
  for (const auto& m : j.value("ctr", json::array())) set.set_partition_ctr(map_from_json(m));
  for (const auto& m : j.value("cvr", json::array())) set.set_partition_cvr(map_from_json(m));
  return set;
}

void CalibrationSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_text() << '\n';
}

CalibrationSet CalibrationSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace adrl
