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

#include "adrl/es.hpp"

#include <cmath>
#include <random>

#include "adrl/replay_data.hpp"

namespace adrl {

namespace {

constexpr std::uint64_t kBinSalt = 0x5bd1e9955bd1e995ULL;
constexpr std::uint64_t kShareSalt = 0x27d4eb2f165667c5ULL;

BinResult accumulate_bin(std::span<const AuctionRecord> bin, std::span<const ActionVector> actions,
                         const CalibrationSet& maps, const EnvConfig& env, double lambda,
                         std::uint64_t seed, std::size_t index) {
  BinResult r;
  r.perturbation_index = index;
  Rng rng(seed);
  for (std::size_t i = 0; i < bin.size(); ++i) {
    const AuctionRecord& rec = bin[i];
    const ShowingResult show = simulate_showing(rec, rec.context, actions[i], maps, env);
    for (std::size_t s = 0; s < show.auction.winner_index.size(); ++s) {
      const UserResponse resp = sample_user_response(rec.candidates[show.auction.winner_index[s]], rng);
      ++r.served_ad_number;
      if (resp.clicked) {
        ++r.click_number;
        r.total_click_price += show.auction.click_prices[s];
      }
    }
  }
  if (r.served_ad_number > 0) {
    r.empty = false;
    r.relative_reward = (r.total_click_price + lambda * static_cast<double>(r.click_number)) /
                        static_cast<double>(r.served_ad_number);
  }
  return r;
}

}  // namespace

void EsConfig::validate() const {
  if (n == 0) throw ConfigError("es: n must be >= 1");
  if (!(sigma > 0.0)) throw ConfigError("es: sigma must be > 0");
  if (!(eta > 0.0)) throw ConfigError("es: eta must be > 0");
  if (lambda && !std::isfinite(*lambda)) throw ConfigError("es: lambda must be finite");
  if (bins() < n) throw ConfigError("es: bin_count must be >= n");
  if (!(traffic_share > 0.0 && traffic_share <= 1.0)) {
    throw ConfigError("es: traffic_share must lie in (0, 1]");
  }
}

std::vector<double> perturbation_noise(std::size_t size, std::uint64_t noise_seed, double sigma) {
  if (!(sigma > 0.0)) throw ContractError("perturbation_noise: sigma must be > 0");
  Rng rng(noise_seed);
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> eps(size);
  for (double& e : eps) e = normal(rng);
  return eps;
}

std::vector<Perturbation> perturb(const ParameterSet& theta, std::size_t n, double sigma,
                                  std::uint64_t seed) {
  std::vector<Perturbation> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Perturbation p;
    p.noise_seed = derive_seed(seed, i);
    p.params = theta;
    const std::vector<double> eps = perturbation_noise(theta.size(), p.noise_seed, sigma);
    for (std::size_t j = 0; j < eps.size(); ++j) p.params.values[j] += eps[j];
    out.push_back(std::move(p));
  }
  return out;
}

std::size_t traffic_bin(const AuctionRecord& record, std::size_t bin_count) noexcept {
  if (bin_count <= 1) return 0;
  return static_cast<std::size_t>(mix64(record.session_id ^ kBinSalt) % bin_count);
}

std::vector<std::vector<AuctionRecord>> route_traffic(std::span<const AuctionRecord> stream,
                                                      std::size_t bin_count) {
  if (bin_count == 0) throw ContractError("route_traffic: bin_count must be >= 1");
  std::vector<std::vector<AuctionRecord>> bins(bin_count);
  for (const auto& r : stream) bins[traffic_bin(r, bin_count)].push_back(r);
  return bins;
}

std::vector<AuctionRecord> sample_traffic(std::span<const AuctionRecord> stream, double share) {
  if (share >= 1.0) return {stream.begin(), stream.end()};
  const auto cut = static_cast<std::uint64_t>(share * 1e6);
  std::vector<AuctionRecord> out;
  for (const auto& r : stream) {
    if (mix64(r.session_id ^ kShareSalt) % 1000000 < cut) out.push_back(r);
  }
  return out;
}

BinResult evaluate_bin(const Policy& policy, std::span<const AuctionRecord> bin,
                       const CalibrationSet& maps, const EnvConfig& env, double lambda,
                       std::uint64_t seed, std::size_t perturbation_index) {
  std::vector<ActionVector> actions;
  actions.reserve(bin.size());
  for (const auto& r : bin) actions.push_back(policy(r.context));
  return accumulate_bin(bin, actions, maps, env, lambda, seed, perturbation_index);
}

EsUpdate es_update(const ParameterSet& theta, std::span<const BinResult> results,
                   std::span<const std::uint64_t> noise_seeds, const EsConfig& cfg) {
  cfg.validate();
  EsUpdate up;
  up.params = theta;

  std::vector<const BinResult*> used;
  for (const auto& r : results) {
    if (r.empty) continue;
    if (r.perturbation_index >= noise_seeds.size()) {
      throw ContractError("es_update: result without a noise seed");
    }
    used.push_back(&r);
  }
  up.participating = used.size();
  if (used.empty()) {
    up.skipped = true;
    return up;
  }

  double center = 0.0;
  if (cfg.mean_centering) {
    for (const auto* r : used) center += r->relative_reward;
    center /= static_cast<double>(used.size());
  }

  std::vector<double> sum(theta.size(), 0.0);
  for (const auto* r : used) {
    const double w = r->relative_reward - center;
    if (w == 0.0) continue;
    const std::vector<double> eps =
        perturbation_noise(theta.size(), noise_seeds[r->perturbation_index], cfg.sigma);
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += w * eps[j];
  }
  const double scale = cfg.eta / (static_cast<double>(used.size()) * cfg.sigma);
  for (std::size_t j = 0; j < sum.size(); ++j) up.params.values[j] += scale * sum[j];
  return up;
}

EsRunResult run_es(const ActorNet& actor, const ParameterSet& theta0, const StreamSource& stream,
                   const CalibrationSet& maps, const EnvConfig& env, const EsConfig& cfg) {
  cfg.validate();
  env.validate();
  EsRunResult run;
  run.params = theta0;
  const std::size_t bins = cfg.bins();

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const std::vector<AuctionRecord> live = stream(it);
    const std::vector<AuctionRecord> sample = sample_traffic(live, cfg.traffic_share);
    if (it == 0) {
      run.lambda = cfg.lambda ? *cfg.lambda
                   : sample.empty()
                       ? 0.0
                       : mean_click_price(sample, baseline_action(1.0), env);
    }
    const auto routed = route_traffic(sample, bins);
    const std::uint64_t iter_seed = derive_seed(cfg.seed, it);
    const std::vector<Perturbation> perturbed = perturb(run.params, cfg.n, cfg.sigma, iter_seed);

    EsIterationReport rep;
    rep.iteration = it;
    rep.bins.resize(cfg.n);
    const auto n = static_cast<std::int64_t>(cfg.n);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const auto& bin = routed[ui];
      std::vector<ActionVector> actions;
      if (!bin.empty()) {
        std::vector<SearchContext> states(bin.size());
        for (std::size_t r = 0; r < bin.size(); ++r) states[r] = bin[r].context;
        ActorNet::Cache cache;
        actor.forward(perturbed[ui].params, states, cache);
        actions.resize(bin.size());
        for (std::size_t r = 0; r < bin.size(); ++r) {
          std::copy_n(cache.actions.begin() + static_cast<std::ptrdiff_t>(r * kActionDim),
                      kActionDim, actions[r].values.begin());
        }
      }
      rep.bins[ui] = accumulate_bin(bin, actions, maps, env, run.lambda,
                                    derive_seed(iter_seed, 1000 + ui), ui);
    }

    std::vector<std::uint64_t> seeds(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) seeds[i] = perturbed[i].noise_seed;
    EsUpdate up = es_update(run.params, rep.bins, seeds, cfg);
    run.params = std::move(up.params);
    rep.participating = up.participating;
    rep.skipped = up.skipped;

    double revenue = 0.0, reward_sum = 0.0;
    std::uint64_t clicks = 0, served = 0;
    for (const auto& b : rep.bins) {
      if (b.empty) continue;
      revenue += b.total_click_price;
      clicks += b.click_number;
      served += b.served_ad_number;
      reward_sum += b.relative_reward;
    }
    if (served > 0) {
      rep.mean_relative_reward = reward_sum / static_cast<double>(up.participating);
      rep.rpm = 1000.0 * revenue / static_cast<double>(served);
      rep.ctr = static_cast<double>(clicks) / static_cast<double>(served);
      if (clicks > 0) rep.ppc = revenue / static_cast<double>(clicks);
    }
    run.iterations.push_back(std::move(rep));
  }
  return run;
}

}  // namespace adrl
