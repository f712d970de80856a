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

#include "adrl/sim_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json_io.hpp"

namespace adrl {

void EnvConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("env: gamma must lie strictly in (0, 1)");
  if (!std::isfinite(delta)) throw ConfigError("env: delta must be finite");
  if (!std::isfinite(purchase_weight)) throw ConfigError("env: purchase_weight must be finite");
  if (positions_per_session == 0) throw ConfigError("env: positions_per_session must be >= 1");
  if (!std::isfinite(reserve)) throw ConfigError("env: reserve must be finite");
  if (k == 0) throw ConfigError("env: k must be >= 1");
}

namespace {

constexpr double kMinRankRate = 1e-6;

AuctionRecord calibrated_copy(const AuctionRecord& record, const SearchContext& state,
                              const CalibrationSet& maps) {
  AuctionRecord copy = record;
  const PartitionKey key = maps.key_of(state);
  for (auto& c : copy.candidates) {
    c.pred_ctr = std::max(kMinRankRate, maps.ctr(c.pred_ctr, key));
    c.pred_cvr = std::max(kMinRankRate, maps.cvr(c.pred_cvr, key));
  }
  return copy;
}

}  // namespace

ShowingResult simulate_showing(const AuctionRecord& record, const SearchContext& state,
                               const ActionVector& action, const CalibrationSet& maps,
                               const EnvConfig& cfg) {
  ShowingResult res;
  res.auction = cfg.calibrated_ranking
                    ? run_auction(calibrated_copy(record, state, maps), action, cfg.k, cfg.reserve)
                    : run_auction(record, action, cfg.k, cfg.reserve);
  const PartitionKey key = maps.key_of(state);
  const std::size_t n = res.auction.winner_index.size();
  res.winner_ctr.resize(n);
  res.winner_cvr.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const AdCandidate& w = record.candidates[res.auction.winner_index[s]];
    const double ctr = maps.ctr(w.pred_ctr, key);
    res.winner_ctr[s] = ctr;
    res.winner_cvr[s] = maps.cvr(w.pred_cvr, key);
    res.expected_revenue += ctr * res.auction.click_prices[s];
    res.expected_clicks += ctr;
    res.reward += showing_reward(ctr, res.winner_cvr[s], res.auction.click_prices[s], w.product_price, cfg);
  }
  return res;
}

TransitionTuple step(const AuctionRecord& record, const SearchContext& state,
                     const ActionVector& action, const CalibrationSet& maps, const EnvConfig& cfg) {
  const ShowingResult res = simulate_showing(record, state, action, maps, cfg);
  TransitionTuple t;
  t.state = state;
  t.action = action;
  t.reward = res.reward;
  if (state.ad_position + 1 < cfg.positions_per_session) {
    SearchContext next = state;
    for (std::size_t s = 0; s < res.winner_ctr.size(); ++s) {
      next.user_click_count += res.winner_ctr[s];
      next.user_purchase_count += res.winner_ctr[s] * res.winner_cvr[s];
    }
    next.ad_position = state.ad_position + 1;
    t.next_state = next;
  }
  return t;
}

TransitionTuple step(const AuctionRecord& record, const ActionVector& action,
                     const CalibrationSet& maps, const EnvConfig& cfg) {
  return step(record, record.context, action, maps, cfg);
}

std::vector<TransitionTuple> rollout(std::span<const AuctionRecord> session, const Policy& policy,
                                     const CalibrationSet& maps, const EnvConfig& cfg) {
  std::vector<TransitionTuple> out;
  if (session.empty()) return out;
  for (std::size_t i = 1; i < session.size(); ++i) {
    if (session[i].session_id != session[0].session_id) {
      throw ContractError("rollout: records from different sessions");
    }
    if (session[i].context.ad_position != session[i - 1].context.ad_position + 1) {
      throw ContractError("rollout: positions out of order");
    }
  }
  out.reserve(session.size());
  SearchContext state = session[0].context;
  for (std::size_t i = 0; i < session.size(); ++i) {
    TransitionTuple t = step(session[i], state, policy(state), maps, cfg);
    const bool more = i + 1 < session.size();
    if (more && t.terminal()) throw ContractError("rollout: session longer than positions_per_session");
    if (more) state = *t.next_state;
    out.push_back(std::move(t));
  }
  return out;
}

double discounted_return(std::span<const TransitionTuple> transitions, double gamma) {
  double g = 0.0;
  for (auto it = transitions.rbegin(); it != transitions.rend(); ++it) g = it->reward + gamma * g;
  return g;
}

double mean_click_price(std::span<const AuctionRecord> records, const ActionVector& action,
                        const EnvConfig& cfg) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    for (double p : run_auction(r, action, cfg.k, cfg.reserve).click_prices) {
      total += p;
      ++n;
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

std::string transition_to_line(const TransitionTuple& t) {
  detail::json j{{"state", detail::context_to_json(t.state)},
                 {"action", detail::action_to_json(t.action)},
                 {"reward", t.reward},
                 {"terminal", t.terminal()}};
  j["next_state"] = t.next_state ? detail::context_to_json(*t.next_state) : detail::json(nullptr);
  return j.dump();
}

TransitionTuple transition_from_line(const std::string& line, std::size_t line_number) {
  detail::json j;
  try {
    j = detail::json::parse(line);
  } catch (const detail::json::parse_error& e) {
    detail::field_error(line_number, "<transition>", std::string("invalid JSON: ") + e.what());
  }
  TransitionTuple t;
  t.state = detail::context_from_json(detail::require(j, "state", line_number), line_number);
  t.action = detail::action_from_json(detail::require(j, "action", line_number), line_number);
  t.reward = detail::get_real(j, "reward", line_number);
  const auto& next = detail::require(j, "next_state", line_number);
  if (!next.is_null()) t.next_state = detail::context_from_json(next, line_number);
  return t;
}

void write_transitions(const std::filesystem::path& path, std::span<const TransitionTuple> ts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& t : ts) out << transition_to_line(t) << '\n';
}

std::vector<TransitionTuple> read_transitions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<TransitionTuple> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(transition_from_line(line, n));
  }
  return out;
}

}  // namespace adrl
