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

#include "adrl/replay_data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "json_io.hpp"

namespace adrl {

namespace {

constexpr double kMinRate = 1e-6;

double exponent_lookup(const std::vector<std::vector<double>>& table, std::uint32_t device,
                       std::uint32_t position) {
  if (table.empty()) return 1.0;
  const auto& row = table[std::min<std::size_t>(device, table.size() - 1)];
  if (row.empty()) return 1.0;
  return row[std::min<std::size_t>(position, row.size() - 1)];
}

void check_distortion(const std::vector<std::vector<double>>& table, const char* name) {
  for (const auto& row : table) {
    for (double b : row) {
      if (!std::isfinite(b) || b <= 0.0) {
        throw ConfigError(std::string("generator: ") + name + " exponents must be positive");
      }
    }
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  if (num_queries == 0 || num_query_categories == 0 || num_age_buckets == 0 ||
      num_genders == 0 || num_devices == 0) {
    throw ConfigError("generator: vocabulary sizes must be positive");
  }
  if (positions_per_session == 0) throw ConfigError("generator: positions_per_session must be >= 1");
  if (min_candidates < 2) throw ConfigError("generator: auctions need at least 2 candidates");
  if (max_candidates < min_candidates) {
    throw ConfigError("generator: max_candidates < min_candidates");
  }
  for (double s : {bid_log_sigma, price_log_sigma, query_bid_spread, query_ctr_spread}) {
    if (!std::isfinite(s) || s < 0.0) throw ConfigError("generator: spreads must be >= 0");
  }
  for (double p : {ctr_beta_a, ctr_beta_b, cvr_beta_a, cvr_beta_b}) {
    if (!std::isfinite(p) || p <= 0.0) throw ConfigError("generator: beta parameters must be > 0");
  }
  if (!(click_count_mean >= 0.0) || !(purchase_count_mean >= 0.0)) {
    throw ConfigError("generator: behaviour means must be >= 0");
  }
  if (!std::isfinite(bid_log_mu) || !std::isfinite(price_log_mu)) {
    throw ConfigError("generator: log means must be finite");
  }
  check_distortion(ctr_distortion, "ctr_distortion");
  check_distortion(cvr_distortion, "cvr_distortion");
}

double GeneratorConfig::ctr_exponent(std::uint32_t device, std::uint32_t position) const {
  return exponent_lookup(ctr_distortion, device, position);
}

double GeneratorConfig::cvr_exponent(std::uint32_t device, std::uint32_t position) const {
  return exponent_lookup(cvr_distortion, device, position);
}

double distort(double pred, double exponent) noexcept {
  return std::clamp(std::pow(pred, exponent), kMinRate, 1.0);
}

LogGenerator::LogGenerator(GeneratorConfig config, std::uint64_t seed)
    : config_(std::move(config)), rng_(seed) {
  config_.validate();
  draw_market();
}

LogGenerator::LogGenerator(GeneratorConfig config, std::uint64_t market_seed, std::uint64_t traffic_seed)
    : config_(std::move(config)), rng_(market_seed) {
  config_.validate();
  draw_market();
  rng_.seed(traffic_seed);
}

void LogGenerator::draw_market() {
  std::normal_distribution<double> normal(0.0, 1.0);
  queries_.resize(config_.num_queries);
  for (std::uint32_t q = 0; q < config_.num_queries; ++q) {
    queries_[q].category = q % config_.num_query_categories;
    queries_[q].bid_log_offset = config_.query_bid_spread * normal(rng_);
    queries_[q].ctr_scale = std::exp(config_.query_ctr_spread * normal(rng_));
  }
}

double LogGenerator::sample_beta(double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng_);
  const double y = gb(rng_);
  return x / (x + y);
}

std::vector<AuctionRecord> LogGenerator::next_session() {
  const auto& cfg = config_;
  std::uniform_int_distribution<std::uint32_t> pick_query(0, cfg.num_queries - 1);
  std::uniform_int_distribution<std::uint32_t> pick_age(0, cfg.num_age_buckets - 1);
  std::uniform_int_distribution<std::uint32_t> pick_gender(0, cfg.num_genders - 1);
  std::uniform_int_distribution<std::uint32_t> pick_device(0, cfg.num_devices - 1);
  std::uniform_int_distribution<std::uint32_t> pick_count(cfg.min_candidates, cfg.max_candidates);
  std::lognormal_distribution<double> bid_dist(cfg.bid_log_mu, cfg.bid_log_sigma);
  std::lognormal_distribution<double> price_dist(cfg.price_log_mu, cfg.price_log_sigma);

  SearchContext ctx;
  ctx.query_id = pick_query(rng_);
  ctx.query_category_id = queries_[ctx.query_id].category;
  ctx.user_age_bucket = pick_age(rng_);
  ctx.user_gender = pick_gender(rng_);
  ctx.device_type = pick_device(rng_);
  if (cfg.click_count_mean > 0.0) {
    ctx.user_click_count = std::exponential_distribution<double>(1.0 / cfg.click_count_mean)(rng_);
  }
  if (cfg.purchase_count_mean > 0.0) {
    ctx.user_purchase_count =
        std::exponential_distribution<double>(1.0 / cfg.purchase_count_mean)(rng_);
  }

  const auto& profile = queries_[ctx.query_id];
  const std::uint64_t session_id = sessions_emitted_++;
  std::vector<AuctionRecord> session;
  session.reserve(cfg.positions_per_session);
  for (std::uint32_t pos = 0; pos < cfg.positions_per_session; ++pos) {
    AuctionRecord rec;
    rec.record_id = next_record_id_++;
    rec.session_id = session_id;
    rec.context = ctx;
    rec.context.ad_position = pos;
    const double ctr_power = cfg.ctr_exponent(ctx.device_type, pos);
    const double cvr_power = cfg.cvr_exponent(ctx.device_type, pos);
    const std::uint32_t n = pick_count(rng_);
    rec.candidates.reserve(n);
    for (std::uint32_t j = 0; j < n; ++j) {
      AdCandidate c;
      c.candidate_id = next_candidate_id_++;
      c.bid = bid_dist(rng_) * std::exp(profile.bid_log_offset);
      c.product_price = price_dist(rng_);
      c.pred_ctr = std::clamp(sample_beta(cfg.ctr_beta_a, cfg.ctr_beta_b) * profile.ctr_scale,
                              kMinRate, 1.0);
      c.pred_cvr = std::clamp(sample_beta(cfg.cvr_beta_a, cfg.cvr_beta_b), kMinRate, 1.0);
      c.true_ctr = distort(c.pred_ctr, ctr_power);
      c.true_cvr = distort(c.pred_cvr, cvr_power);
      rec.candidates.push_back(c);
    }
    session.push_back(std::move(rec));
  }
  return session;
}

std::optional<AuctionRecord> LogGenerator::next() {
  if (pending_pos_ >= pending_.size()) {
    if (sessions_emitted_ >= config_.num_sessions) return std::nullopt;
    pending_ = next_session();
    pending_pos_ = 0;
  }
  return std::move(pending_[pending_pos_++]);
}

namespace {

std::vector<AuctionRecord> drain(LogGenerator& gen) {
  std::vector<AuctionRecord> out;
  out.reserve(static_cast<std::size_t>(gen.config().num_sessions) * gen.config().positions_per_session);
  while (auto rec = gen.next()) out.push_back(std::move(*rec));
  return out;
}

}  // namespace

std::vector<AuctionRecord> generate_log(const GeneratorConfig& config, std::uint64_t seed) {
  LogGenerator gen(config, seed);
  return drain(gen);
}

std::vector<AuctionRecord> generate_log(const GeneratorConfig& config, std::uint64_t market_seed,
                                        std::uint64_t traffic_seed) {
  LogGenerator gen(config, market_seed, traffic_seed);
  return drain(gen);
}

UserResponse sample_user_response(const AdCandidate& candidate, Rng& rng) {
  if (!candidate.has_ground_truth()) {
    throw ContractError("sample_user_response: candidate has no ground-truth rates");
  }
  UserResponse r;
  r.clicked = bernoulli(rng, *candidate.true_ctr);
  // The purchase draw is taken unconditionally so the stream position does
  // not depend on the click outcome.
  const bool buy = bernoulli(rng, *candidate.true_cvr);
  r.purchased = r.clicked && buy;
  return r;
}

// ---------------------------------------------------------------------------
// Line-delimited JSON codec.

namespace detail {

json context_to_json(const SearchContext& c) {
  return json{{"query_id", c.query_id},
              {"query_category_id", c.query_category_id},
              {"user_age_bucket", c.user_age_bucket},
              {"user_gender", c.user_gender},
              {"user_click_count", c.user_click_count},
              {"user_purchase_count", c.user_purchase_count},
              {"ad_position", c.ad_position},
              {"device_type", c.device_type}};
}

SearchContext context_from_json(const json& j, std::size_t line) {
  SearchContext c;
  c.query_id = get_u32(j, "query_id", line);
  c.query_category_id = get_u32(j, "query_category_id", line);
  c.user_age_bucket = get_u32(j, "user_age_bucket", line);
  c.user_gender = get_u32(j, "user_gender", line);
  c.user_click_count = get_real(j, "user_click_count", line);
  c.user_purchase_count = get_real(j, "user_purchase_count", line);
  c.ad_position = get_u32(j, "ad_position", line);
  c.device_type = get_u32(j, "device_type", line);
  if (c.user_click_count < 0.0) field_error(line, "user_click_count", "negative");
  if (c.user_purchase_count < 0.0) field_error(line, "user_purchase_count", "negative");
  return c;
}

json action_to_json(const ActionVector& a) {
  return json(a.values);
}

ActionVector action_from_json(const json& j, std::size_t line, const char* field) {
  if (!j.is_array() || j.size() != kActionDim) field_error(line, field, "expected 5 numbers");
  ActionVector a;
  for (std::size_t i = 0; i < kActionDim; ++i) {
    if (!j[i].is_number()) field_error(line, field, "expected 5 numbers");
    a[i] = j[i].get<double>();
  }
  return a;
}

}  // namespace detail

namespace {

using detail::json;

json candidate_to_json(const AdCandidate& c, bool scrubbed) {
  json j{{"candidate_id", c.candidate_id},
         {"bid", c.bid},
         {"product_price", c.product_price},
         {"pred_ctr", c.pred_ctr},
         {"pred_cvr", c.pred_cvr}};
  if (!scrubbed) {
    if (c.true_ctr) j["true_ctr"] = *c.true_ctr;
    if (c.true_cvr) j["true_cvr"] = *c.true_cvr;
  }
  return j;
}

double get_probability(const json& j, const char* field, std::size_t line) {
  const double p = detail::get_real(j, field, line);
  if (!(p > 0.0 && p <= 1.0)) detail::field_error(line, field, "probability outside (0, 1]");
  return p;
}

AdCandidate candidate_from_json(const json& j, std::size_t line) {
  AdCandidate c;
  c.candidate_id = detail::get_uint(j, "candidate_id", line);
  c.bid = detail::get_real(j, "bid", line);
  if (c.bid <= 0.0) detail::field_error(line, "bid", "must be positive");
  c.product_price = detail::get_real(j, "product_price", line);
  if (c.product_price <= 0.0) detail::field_error(line, "product_price", "must be positive");
  c.pred_ctr = get_probability(j, "pred_ctr", line);
  c.pred_cvr = get_probability(j, "pred_cvr", line);
  if (j.contains("true_ctr")) c.true_ctr = get_probability(j, "true_ctr", line);
  if (j.contains("true_cvr")) c.true_cvr = get_probability(j, "true_cvr", line);
  return c;
}

}  // namespace

std::string record_to_line(const AuctionRecord& record, bool scrubbed) {
  json cands = json::array();
  for (const auto& c : record.candidates) cands.push_back(candidate_to_json(c, scrubbed));
  json j{{"record_id", record.record_id},
         {"session_id", record.session_id},
         {"context", detail::context_to_json(record.context)},
         {"candidates", std::move(cands)}};
  return j.dump();
}

AuctionRecord record_from_line(const std::string& line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    detail::field_error(line_number, "<record>", std::string("invalid JSON: ") + e.what());
  }
  AuctionRecord rec;
  rec.record_id = detail::get_uint(j, "record_id", line_number);
  rec.session_id = detail::get_uint(j, "session_id", line_number);
  rec.context = detail::context_from_json(detail::require(j, "context", line_number), line_number);
  const json& cands = detail::require(j, "candidates", line_number);
  if (!cands.is_array()) detail::field_error(line_number, "candidates", "expected an array");
  if (cands.size() < 2) detail::field_error(line_number, "candidates", "fewer than 2 entries");
  rec.candidates.reserve(cands.size());
  for (const auto& c : cands) rec.candidates.push_back(candidate_from_json(c, line_number));
  std::vector<CandidateId> ids;
  ids.reserve(rec.candidates.size());
  for (const auto& c : rec.candidates) ids.push_back(c.candidate_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    detail::field_error(line_number, "candidate_id", "duplicate id within record");
  }
  return rec;
}

void write_log(std::ostream& out, const std::vector<AuctionRecord>& records, bool scrubbed) {
  for (const auto& r : records) out << record_to_line(r, scrubbed) << '\n';
  if (!out) throw DataError("write_log: stream failure");
}

void write_log(const std::filesystem::path& path, const std::vector<AuctionRecord>& records,
               bool scrubbed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_log: cannot open " + path.string());
  write_log(out, records, scrubbed);
}

std::optional<AuctionRecord> LogReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    return record_from_line(line, line_);
  }
  return std::nullopt;
}

std::vector<AuctionRecord> read_log(std::istream& in) {
  LogReader reader(in);
  std::vector<AuctionRecord> out;
  while (auto r = reader.next()) out.push_back(std::move(*r));
  return out;
}

std::vector<AuctionRecord> read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_log: cannot open " + path.string());
  return read_log(in);
}

std::vector<std::vector<AuctionRecord>> group_sessions(const std::vector<AuctionRecord>& records) {
  std::map<std::uint64_t, std::vector<AuctionRecord>> by_session;
  for (const auto& r : records) by_session[r.session_id].push_back(r);
  std::vector<std::vector<AuctionRecord>> out;
  out.reserve(by_session.size());
  for (auto& [id, recs] : by_session) {
    std::stable_sort(recs.begin(), recs.end(), [](const AuctionRecord& a, const AuctionRecord& b) {
      return a.context.ad_position < b.context.ad_position;
    });
    out.push_back(std::move(recs));
  }
  return out;
}

}  // namespace adrl
