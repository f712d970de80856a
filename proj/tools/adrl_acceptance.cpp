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

// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed here.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "adrl/config.hpp"
#include "adrl/ranking.hpp"

namespace fs = std::filesystem;
using namespace adrl;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Limits are quoted for four cores; fewer cores get proportionally more time.
double scaled_limit(double four_core_seconds) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return four_core_seconds * 4.0 / static_cast<double>(std::min(hw, 4u));
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Ctx {
  ExperimentConfig cfg;
  fs::path out;
  std::size_t jobs = 1;
  std::size_t seeds = 3;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Fraction-of-seeds rule shared by the trend criteria.
bool majority(std::size_t ok, std::size_t n) { return 3 * ok >= 2 * n && ok >= 1; }

void progress(const std::string& s) { std::cerr << "  .. " << s << std::endl; }

// ---------------------------------------------------------------------------
// 1. GSP invariants

AuctionRecord random_auction(Rng& rng, std::size_t n) {
  AuctionRecord r;
  for (std::size_t i = 0; i < n; ++i) {
    AdCandidate c;
    c.candidate_id = i + 1;
    c.bid = 0.05 + 5.0 * uniform01(rng);
    c.product_price = 0.5 + 200.0 * uniform01(rng);
    c.pred_ctr = 0.001 + 0.3 * uniform01(rng);
    c.pred_cvr = 0.001 + 0.3 * uniform01(rng);
    r.candidates.push_back(c);
  }
  return r;
}

ActionVector random_action(Rng& rng) {
  const ActionBounds b;
  ActionVector a;
  for (std::size_t k = 0; k < kActionDim; ++k) a[k] = b.lo[k] + (b.hi[k] - b.lo[k]) * uniform01(rng);
  return a;
}

// Candidates ranked strictly ahead of `i`.
std::size_t rank_of(const AuctionRecord& r, const AuctionOutcome& o, std::size_t i) {
  std::size_t ahead = 0;
  const auto& ci = r.candidates[i];
  for (std::size_t j = 0; j < r.candidates.size(); ++j) {
    const auto& cj = r.candidates[j];
    if (j != i && ranks_before(o.scores[j], cj.bid, cj.candidate_id, o.scores[i], ci.bid, ci.candidate_id)) ++ahead;
  }
  return ahead;
}

Verdict gsp_sweep(const Ctx&) {
  Rng rng(20240101);
  const std::size_t auctions = 1'000'000;
  std::size_t price_violations = 0, monotone_violations = 0, prices = 0;
  for (std::size_t t = 0; t < auctions; ++t) {
    AuctionRecord r = random_auction(rng, 1 + rng() % 12);
    const ActionVector a = random_action(rng);
    const std::size_t k = 1 + rng() % 3;
    const double reserve = 0.05 * uniform01(rng);
    const auto o = run_auction(r, a, k, reserve);
    for (std::size_t w = 0; w < o.winner_index.size(); ++w) {
      const double bid = r.candidates[o.winner_index[w]].bid;
      const double p = o.click_prices[w];
      ++prices;
      if (!(p >= reserve && p <= bid)) ++price_violations;
    }
    // Raising one bid never moves that ad down or out of the slots.
    const std::size_t i = rng() % r.candidates.size();
    const std::size_t before = rank_of(r, o, i);
    const bool won = std::find(o.winner_index.begin(), o.winner_index.end(), i) != o.winner_index.end();
    r.candidates[i].bid *= 1.0 + 2.0 * uniform01(rng);
    const auto o2 = run_auction(r, a, k, reserve);
    const bool still = std::find(o2.winner_index.begin(), o2.winner_index.end(), i) != o2.winner_index.end();
    if (rank_of(r, o2, i) > before || (won && !still)) ++monotone_violations;
  }
  return {price_violations == 0 && monotone_violations == 0,
          std::to_string(auctions) + " auctions, " + std::to_string(prices) + " prices, " +
              std::to_string(price_violations) + " price and " + std::to_string(monotone_violations) +
              " monotonicity violations"};
}

// ---------------------------------------------------------------------------
// 2. Isotonic fit

// Best monotone fit by enumerating every split into contiguous blocks. The
// optimum is block means, so a feasible split with minimal error is it.
std::vector<double> brute_force_isotonic(const std::vector<double>& y, const std::vector<double>& w) {
  const std::size_t n = y.size();
  double best_err = std::numeric_limits<double>::infinity();
  std::vector<double> best;
  for (std::uint32_t cuts = 0; cuts < (1u << (n - 1)); ++cuts) {
    std::vector<double> fit(n);
    double prev = -std::numeric_limits<double>::infinity();
    bool ok = true;
    std::size_t start = 0;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (i + 1 == n || (cuts >> i & 1u)) {
        double sw = 0.0, swy = 0.0;
        for (std::size_t j = start; j <= i; ++j) {
          sw += w[j];
          swy += w[j] * y[j];
        }
        const double m = swy / sw;
        if (m < prev) ok = false;
        for (std::size_t j = start; j <= i; ++j) fit[j] = m;
        prev = m;
        start = i + 1;
      }
    }
    if (!ok) continue;
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) err += w[i] * (y[i] - fit[i]) * (y[i] - fit[i]);
    if (err < best_err) {
      best_err = err;
      best = fit;
    }
  }
  return best;
}

Verdict isotonic(const Ctx& ctx) {
  Rng rng(77);
  double worst = 0.0;
  for (int inst = 0; inst < 500; ++inst) {
    const std::size_t n = 1 + rng() % 8;
    std::vector<double> y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = uniform01(rng);
      w[i] = 0.1 + 10.0 * uniform01(rng);
    }
    const auto pav = pool_adjacent_violators(y, w);
    const auto ref = brute_force_isotonic(y, w);
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(pav[i] - ref[i]));
  }

  // Bucket error on held-out impressions of the miscalibrated corpus.
  const auto train = replay_stream(ctx.cfg);
  const auto maps = fit_partitioned(collect_impressions(train, derive_seed(ctx.cfg.seed, streams::kImpressions)),
                                    ctx.cfg.calibration);
  ExperimentConfig held = ctx.cfg;
  held.holdout_sessions = ctx.cfg.generator.num_sessions;
  const auto test = collect_impressions(holdout_stream(held), derive_seed(ctx.cfg.seed, streams::kEvaluation));
  struct Acc {
    double n = 0, clicks = 0, raw = 0, cal = 0;
  };
  std::map<std::pair<PartitionKey, std::int64_t>, Acc> buckets;
  const double width = ctx.cfg.calibration.bin_width;
  for (const auto& im : test) {
    const auto key = maps.key_of(im.context);
    auto& a = buckets[{key, static_cast<std::int64_t>(im.pred_ctr / width)}];
    a.n += 1;
    a.clicks += im.clicked ? 1.0 : 0.0;
    a.raw += im.pred_ctr;
    a.cal += maps.ctr(im.pred_ctr, key);
  }
  double raw = 0, cal = 0, total = 0;
  for (const auto& [k, a] : buckets) {
    const double emp = a.clicks / a.n;
    raw += a.n * std::pow(a.raw / a.n - emp, 2);
    cal += a.n * std::pow(a.cal / a.n - emp, 2);
    total += a.n;
  }
  raw /= total;
  cal /= total;
  return {worst <= 1e-9 && cal <= raw,
          "500 instances, max |PAV - brute force| " + fmt("%.2e", worst) + "; bucket MSE raw " +
              fmt("%.3e", raw) + " calibrated " + fmt("%.3e", cal)};
}

// ---------------------------------------------------------------------------
// 3. Gradients

FeatureSpec random_features(Rng& rng) {
  FeatureSpec f;
  f.fields = {{StateField::QueryId, 3}, {StateField::AdPosition, 4}};
  if (rng() % 2) f.fields.push_back({StateField::ClickCount, 5});
  f.embedding_dim = 1 + rng() % 4;
  return f;
}

ParameterSet spread(const ParameterLayout& l, Rng& rng) {
  ParameterSet p(l);
  for (double& v : p.values) v = 2.0 * uniform01(rng) - 1.0;
  return p;
}

Verdict gradients(const Ctx&) {
  GeneratorConfig g;
  g.num_sessions = 40;
  g.min_candidates = 5;
  g.max_candidates = 8;
  const auto recs = generate_log(g, 5);
  EnvConfig env;
  env.delta = 0.5;
  Rng rng(31);
  double worst = 0.0;
  std::size_t configs = 0, coords = 0;
  for (int inst = 0; inst < 12; ++inst) {
    const auto f = random_features(rng);
    ActorArch aa;
    aa.hidden.resize(1 + rng() % 2);
    for (auto& h : aa.hidden) h = 2 + rng() % 6;
    CriticArch ca;
    ca.branch_width = 2 + rng() % 5;
    ca.joint.resize(1 + rng() % 2);
    for (auto& h : ca.joint) h = 2 + rng() % 6;
    ca.dueling = inst % 2 == 0;
    const ActorNet an(f, aa, ActionBounds{});
    const CriticNet cn(f, ca, ActionBounds{});
    const auto batch = explore(recs, CalibrationSet{}, env, ActionBounds{}, rng(), 8);
    const auto actor = spread(an.layout(), rng);
    const auto critic = spread(cn.layout(), rng);
    const auto ta = spread(an.layout(), rng);
    const auto tc = spread(cn.layout(), rng);
    const double reg = 1e-3;

    // Critic: squared TD error plus L2.
    const auto cs = critic_step(batch, an, cn, critic, ta, tc, 0.9, reg);
    const auto closs = [&](std::span<const double> theta) {
      ParameterSet p = critic;
      p.values.assign(theta.begin(), theta.end());
      return critic_step(batch, an, cn, p, ta, tc, 0.9, reg).loss;
    };
    auto r = check_gradient(closs, critic.values, cs.gradient.values, 1e-5);
    worst = std::max(worst, r.max_rel_error);
    coords += r.checked;

    // Actor: advantage of its own actions.
    const auto as = actor_step(batch, an, cn, actor, critic);
    const auto aobj = [&](std::span<const double> theta) {
      ParameterSet p = actor;
      p.values.assign(theta.begin(), theta.end());
      return actor_step(batch, an, cn, p, critic).objective;
    };
    r = check_gradient(aobj, actor.values, as.gradient.values, 1e-5);
    worst = std::max(worst, r.max_rel_error);
    coords += r.checked;
    configs += 2;
  }
  return {configs >= 20 && worst < 1e-4,
          std::to_string(configs) + " actor/critic configurations, " + std::to_string(coords) +
              " coordinates, max relative error " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------------------
// 4-6 and 9. Offline training

struct Corpus {
  std::vector<AuctionRecord> records;
  CalibrationSet maps;
  EnvConfig env;
  std::vector<OracleResult> oracle;
  double oracle_seconds = 0.0;
};

Corpus build_corpus(const ExperimentConfig& cfg, bool with_oracle) {
  Corpus c;
  c.records = replay_stream(cfg);
  c.maps = fit_partitioned(collect_impressions(c.records, derive_seed(cfg.seed, streams::kImpressions)),
                           cfg.calibration);
  c.env = resolve_env(cfg, c.records);
  if (with_oracle) {
    const auto t0 = Clock::now();
    GridSearchOptions opts;
    opts.max_records_per_state = cfg.oracle_max_records_per_state;
    c.oracle = grid_search(c.records, c.maps, c.env, cfg.grid, opts);
    c.oracle_seconds = seconds_since(t0);
  }
  return c;
}

struct Run {
  std::string name;
  std::uint64_t seed = 1;
  TrainConfig train;
  ModelConfig model;
  TrainResult result;
  std::vector<std::pair<std::uint64_t, double>> curve;  // version, error
  double seconds = 0.0;

  [[nodiscard]] double initial() const { return curve.front().second; }
  [[nodiscard]] double final_error() const { return curve.back().second; }
  // First curve point at or below `threshold`, or infinity.
  [[nodiscard]] double steps_to(double threshold) const {
    for (const auto& [v, e] : curve) {
      if (e <= threshold) return static_cast<double>(v);
    }
    return std::numeric_limits<double>::infinity();
  }
};

// Runs serial trainings on a small thread pool; each run stays reproducible.
void run_all(std::vector<Run>& runs, const Corpus& c, std::size_t jobs) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      Run& r = runs[i];
      const auto t0 = Clock::now();
      const ActorNet an(r.model.features, r.model.actor, r.model.bounds);
      TrainHooks hooks;
      if (!c.oracle.empty()) {
        hooks.evaluate = [&](const ParameterSet& p) {
          const Policy pol = [&](const SearchContext& s) { return an.act(p, s); };
          return policy_oracle_error(pol, c.oracle, r.model.bounds, ErrorWeighting::Uniform);
        };
      }
      r.result = train(c.records, c.maps, c.env, r.model, r.train, hooks);
      for (const auto& pt : r.result.curve) {
        if (pt.policy_error) r.curve.emplace_back(pt.version, *pt.policy_error);
      }
      r.seconds = seconds_since(t0);
      std::ostringstream msg;
      msg << r.name << " seed " << r.seed << " done in " << fmt("%.0f", r.seconds) << " s";
      if (!r.curve.empty()) msg << ", error " << fmt("%.4f", r.initial()) << " -> " << fmt("%.4f", r.final_error());
      progress(msg.str());
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(jobs, runs.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

void write_curves(const fs::path& path, const std::vector<Run>& runs) {
  std::ofstream out(path);
  out << "run,seed,version,error_uniform\n";
  for (const auto& r : runs) {
    for (const auto& [v, e] : r.curve) out << r.name << ',' << r.seed << ',' << v << ',' << e << '\n';
  }
}

struct OfflineStudy {
  Corpus corpus;
  std::vector<Run> dueling, plain, regular;
  double dueling_seconds = 0.0;
};

Run make_run(const ExperimentConfig& cfg, const std::string& name, std::uint64_t seed) {
  Run r;
  r.name = name;
  r.seed = seed;
  r.train = cfg.train;
  r.train.seed = seed;
  r.train.serial = true;
  r.model = cfg.model;
  return r;
}

OfflineStudy offline_study(const Ctx& ctx) {
  OfflineStudy s;
  progress("grid oracle over " + std::to_string(ctx.cfg.grid.size()) + " points");
  s.corpus = build_corpus(ctx.cfg, true);
  progress("oracle done in " + fmt("%.0f", s.corpus.oracle_seconds) + " s, " +
           std::to_string(s.corpus.oracle.size()) + " states");
  for (std::uint64_t seed = 1; seed <= ctx.seeds; ++seed) {
    s.dueling.push_back(make_run(ctx.cfg, "dueling", seed));
    Run p = make_run(ctx.cfg, "plain", seed);
    p.model.critic.dueling = false;
    s.plain.push_back(p);
    Run g = make_run(ctx.cfg, "regular", seed);
    g.train.regularization = TrainConfig::preset("regular").regularization;
    s.regular.push_back(g);
  }
  const auto t0 = Clock::now();
  run_all(s.dueling, s.corpus, ctx.jobs);
  s.dueling_seconds = seconds_since(t0);
  std::vector<Run> rest = s.plain;
  rest.insert(rest.end(), s.regular.begin(), s.regular.end());
  run_all(rest, s.corpus, ctx.jobs);
  std::copy_n(rest.begin(), s.plain.size(), s.plain.begin());
  std::copy(rest.begin() + static_cast<std::ptrdiff_t>(s.plain.size()), rest.end(), s.regular.begin());
  std::vector<Run> all = s.dueling;
  all.insert(all.end(), rest.begin(), rest.end());
  write_curves(ctx.out / "offline_curves.csv", all);
  return s;
}

Verdict convergence(const OfflineStudy& s) {
  std::size_t ok = 0;
  std::ostringstream d;
  for (const auto& r : s.dueling) {
    const double e0 = r.initial(), e = r.final_error();
    const bool pass = e < 0.3 * e0 && e < 0.15;
    ok += pass ? 1 : 0;
    d << "seed " << r.seed << ": " << fmt("%.4f", e0) << " -> " << fmt("%.4f", e) << (pass ? " ok; " : " no; ");
  }
  d << ok << "/" << s.dueling.size() << " seeds";
  return {majority(ok, s.dueling.size()), d.str()};
}

Verdict dueling_ablation(const OfflineStudy& s) {
  std::size_t ok = 0;
  std::ostringstream d;
  for (std::size_t i = 0; i < s.dueling.size(); ++i) {
    // Threshold: half of the shared initial error.
    const double threshold = 0.5 * s.dueling[i].initial();
    const double a = s.dueling[i].steps_to(threshold), b = s.plain[i].steps_to(threshold);
    const bool pass = std::isfinite(a) && a <= b;
    ok += pass ? 1 : 0;
    d << "seed " << s.dueling[i].seed << ": " << (std::isfinite(a) ? fmt("%.0f", a) : "never") << " vs "
      << (std::isfinite(b) ? fmt("%.0f", b) : "never") << "; ";
  }
  d << ok << "/" << s.dueling.size() << " seeds (steps to half the initial error, dueling vs plain)";
  return {majority(ok, s.dueling.size()), d.str()};
}

Verdict regularization_trend(const OfflineStudy& s) {
  std::size_t ok = 0;
  std::ostringstream d;
  for (std::size_t i = 0; i < s.dueling.size(); ++i) {
    const double a = s.dueling[i].final_error(), b = s.regular[i].final_error();
    ok += a <= b ? 1 : 0;
    d << "seed " << s.dueling[i].seed << ": " << fmt("%.4f", a) << " vs " << fmt("%.4f", b) << "; ";
  }
  d << ok << "/" << s.dueling.size() << " seeds (final error, base vs regular)";
  return {majority(ok, s.dueling.size()), d.str()};
}

// ---------------------------------------------------------------------------
// 7. ES update

Verdict es_exactness(const Ctx&) {
  Rng rng(91);
  double worst = 0.0;
  bool zero_exact = true;
  for (int inst = 0; inst < 200; ++inst) {
    EsConfig cfg;
    cfg.n = 1 + rng() % 25;
    cfg.sigma = 0.01 + uniform01(rng);
    cfg.eta = 0.001 + uniform01(rng);
    ParameterLayout l;
    l.add("theta", 1, 1 + rng() % 64);
    ParameterSet theta(l);
    for (double& v : theta.values) v = 4.0 * uniform01(rng) - 2.0;
    std::vector<BinResult> bins(cfg.n);
    std::vector<std::uint64_t> seeds(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
      bins[i].perturbation_index = i;
      bins[i].relative_reward = 5.0 * uniform01(rng);
      bins[i].empty = false;
      seeds[i] = rng();
    }
    const auto up = es_update(theta, bins, seeds, cfg);
    // theta_j + eta / (n sigma) * sum_i R_i eps_ij, noise redrawn per seed.
    std::vector<std::vector<double>> eps(cfg.n, std::vector<double>(theta.size()));
    for (std::size_t i = 0; i < cfg.n; ++i) {
      Rng noise(seeds[i]);
      std::normal_distribution<double> normal(0.0, cfg.sigma);
      for (double& e : eps[i]) e = normal(noise);
    }
    for (std::size_t j = 0; j < theta.size(); ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < cfg.n; ++i) acc += bins[i].relative_reward * eps[i][j];
      const double want = theta.values[j] + cfg.eta / (static_cast<double>(cfg.n) * cfg.sigma) * acc;
      worst = std::max(worst, std::abs(up.params.values[j] - want));
    }
    for (auto& b : bins) b.relative_reward = 0.0;
    zero_exact = zero_exact && es_update(theta, bins, seeds, cfg).params.values == theta.values;
  }
  return {worst <= 1e-12 && zero_exact,
          "200 instances, max deviation " + fmt("%.2e", worst) + ", zero reward leaves theta " +
              (zero_exact ? "unchanged" : "CHANGED")};
}

// ---------------------------------------------------------------------------
// 8. ES trend

// Pushes every output unit deep toward one face of the box.
ParameterSet detuned_actor(const ActorNet& net, std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet p = net.init_params(rng);
  auto b = p.block(p.layout.find("actor.out.b"));
  const double push[kActionDim] = {2.0, 2.0, -2.0, 2.0, -2.0};
  for (std::size_t k = 0; k < kActionDim; ++k) b[k] = push[k];
  return p;
}

Verdict es_trend(const Ctx& ctx) {
  const auto c = build_corpus(ctx.cfg, false);
  const ActorNet net(ctx.cfg.model.features, ctx.cfg.model.actor, ctx.cfg.model.bounds);
  std::size_t ok = 0;
  std::ostringstream d;
  std::ofstream out(ctx.out / "es_curves.csv");
  out << "seed,iteration,mean_relative_reward,rpm,ctr\n";
  for (std::uint64_t seed = 1; seed <= ctx.seeds; ++seed) {
    EsConfig es = ctx.cfg.es;
    es.iterations = 20;
    es.seed = derive_seed(seed, 8);
    const StreamSource stream = [&](std::size_t it) { return live_stream(ctx.cfg, it, seed); };
    const auto run = run_es(net, detuned_actor(net, seed), stream, c.maps, c.env, es);
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      first += run.iterations[i].mean_relative_reward / 5.0;
      last += run.iterations[run.iterations.size() - 5 + i].mean_relative_reward / 5.0;
    }
    for (const auto& it : run.iterations) {
      out << seed << ',' << it.iteration << ',' << it.mean_relative_reward << ',' << it.rpm << ',' << it.ctr << '\n';
    }
    ok += last > first ? 1 : 0;
    d << "seed " << seed << ": " << fmt("%.5f", first) << " -> " << fmt("%.5f", last) << "; ";
    progress("ES seed " + std::to_string(seed) + " done");
  }
  d << ok << "/" << ctx.seeds << " seeds (mean relative reward, first 5 vs last 5 iterations)";
  return {majority(ok, ctx.seeds), d.str()};
}

// ---------------------------------------------------------------------------
// 9. Business metrics against the tuned baseline

std::string pct(double v) { return fmt("%+.2f%%", v); }

Verdict table_direction(const Ctx& ctx) {
  // The deployed reward: click price plus lambda per click, no purchase term.
  ExperimentConfig cfg = ctx.cfg;
  cfg.env.purchase_weight = 0.0;
  const auto c = build_corpus(cfg, false);
  std::vector<Run> runs{make_run(cfg, "table", 1)};
  run_all(runs, c, 1);
  const ActorNet an(cfg.model.features, cfg.model.actor, cfg.model.bounds);
  const ParameterSet& actor = runs[0].result.actor;
  const Policy learned = [&](const SearchContext& s) { return an.act(actor, s); };

  const auto holdout = holdout_stream(cfg);
  const auto tuned = tune_baseline(c.records, c.maps, c.env, cfg.baseline_exponents);
  const auto base = evaluate_policy(fixed_policy(baseline_action(tuned.exponent)), holdout, c.maps, c.env,
                                    ResponseMode::Expected);
  const auto mine = evaluate_policy(learned, holdout, c.maps, c.env, ResponseMode::Expected);
  const auto delta = percent_delta(mine, base);

  std::ofstream out(ctx.out / "table.csv");
  out << "policy,rpm,ppc,ctr\n";
  out << "baseline," << base.rpm << ',' << base.ppc.value_or(0.0) << ',' << base.ctr << '\n';
  out << "learned," << mine.rpm << ',' << mine.ppc.value_or(0.0) << ',' << mine.ctr << '\n';
  out << "delta_pct," << delta.rpm_pct << ',' << delta.ppc_pct.value_or(0.0) << ',' << delta.ctr_pct << '\n';

  return {mine.rpm >= base.rpm,
          "RPM " + pct(delta.rpm_pct) + "  PPC " + (delta.ppc_pct ? pct(*delta.ppc_pct) : std::string("n/a")) +
              "  CTR " + pct(delta.ctr_pct) + " vs baseline at exponent " + fmt("%.2f", tuned.exponent) +
              " (RPM " + fmt("%.3f", mine.rpm) + " vs " + fmt("%.3f", base.rpm) + ")"};
}

// ---------------------------------------------------------------------------
// 10. Determinism

std::string log_text(const std::vector<AuctionRecord>& recs) {
  std::ostringstream s;
  write_log(s, recs);
  return s.str();
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism(const Ctx& ctx) {
  const auto& cfg = ctx.cfg;
  const bool gen = log_text(replay_stream(cfg)) == log_text(replay_stream(cfg)) &&
                   log_text(holdout_stream(cfg)) == log_text(holdout_stream(cfg));

  const auto c = build_corpus(cfg, false);
  TrainConfig t = cfg.train;
  t.serial = true;
  t.total_steps = 300;
  t.critic_warmup = 100;
  t.eval_every = 50;
  const auto a = train(c.records, c.maps, c.env, cfg.model, t);
  const auto b = train(c.records, c.maps, c.env, cfg.model, t);
  save_parameters(ctx.out / "det_actor_a.bin", a.actor);
  save_parameters(ctx.out / "det_actor_b.bin", b.actor);
  bool training = a.actor == b.actor && a.critic == b.critic && a.target_actor == b.target_actor &&
                  a.target_critic == b.target_critic && a.curve.size() == b.curve.size() &&
                  file_bytes(ctx.out / "det_actor_a.bin") == file_bytes(ctx.out / "det_actor_b.bin");
  for (std::size_t i = 0; training && i < a.curve.size(); ++i) training = a.curve[i].critic_loss == b.curve[i].critic_loss;

  const ActorNet net(cfg.model.features, cfg.model.actor, cfg.model.bounds);
  EsConfig es = cfg.es;
  es.iterations = 3;
  const StreamSource stream = [&](std::size_t it) { return live_stream(cfg, it); };
  const auto e1 = run_es(net, a.actor, stream, c.maps, c.env, es);
  const auto e2 = run_es(net, a.actor, stream, c.maps, c.env, es);
  bool evo = e1.params == e2.params && e1.iterations.size() == e2.iterations.size();
  for (std::size_t i = 0; evo && i < e1.iterations.size(); ++i) {
    evo = e1.iterations[i].mean_relative_reward == e2.iterations[i].mean_relative_reward;
  }
  const auto yes = [](bool v) { return v ? "identical" : "DIFFERENT"; };
  return {gen && training && evo, std::string("generation ") + yes(gen) + ", serial training " + yes(training) +
                                      ", ES " + yes(evo)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for the ranking-function learner"};
  std::string config_path = "configs/acceptance.json";
  std::string out_dir = "acceptance_out";
  std::vector<int> only;
  Ctx ctx;
  app.add_option("--config", config_path, "Experiment config")->capture_default_str();
  app.add_option("--out-dir", out_dir, "Directory for curves and tables")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--jobs", ctx.jobs, "Concurrent training runs")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    ctx.cfg = load_experiment(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  if (ctx.jobs == 0) ctx.jobs = std::max(1u, std::thread::hardware_concurrency());
  ctx.out = out_dir;
  fs::create_directories(ctx.out);
  const std::set<int> chosen(only.begin(), only.end());
  const auto want = [&](int n) { return chosen.empty() || chosen.count(n) > 0; };

  struct Line {
    int id;
    std::string title;
    Verdict v;
    double seconds;
    double limit;  // 0 for none
  };
  std::vector<Line> lines;
  const auto report = [&](const Line& l) {
    std::ostringstream s;
    s << "[" << (l.v.pass ? "PASS" : "FAIL") << "] " << l.id << ". " << l.title << ": " << l.v.detail << " ("
      << fmt("%.1f", l.seconds) << " s";
    if (l.limit > 0) s << ", limit " << fmt("%.0f", l.limit) << " s";
    s << ")";
    std::cout << s.str() << std::endl;
    lines.push_back(l);
  };
  const auto timed = [&](int id, const std::string& title, double limit, const std::function<Verdict()>& fn) {
    if (!want(id)) return;
    const auto t0 = Clock::now();
    Verdict v = fn();
    const double sec = seconds_since(t0);
    const double lim = limit > 0 ? scaled_limit(limit) : 0.0;
    if (lim > 0 && sec > lim) {
      v.pass = false;
      v.detail += "; over the time limit";
    }
    report({id, title, v, sec, lim});
  };

  timed(1, "GSP invariants", 60, [&] { return gsp_sweep(ctx); });
  timed(2, "isotonic fit", 60, [&] { return isotonic(ctx); });
  timed(3, "gradient check", 120, [&] { return gradients(ctx); });
  if (want(4) || want(5) || want(6)) {
    const auto t0 = Clock::now();
    const OfflineStudy s = offline_study(ctx);
    const double total = seconds_since(t0);
    // The convergence limit covers the oracle and the three dueling runs.
    const double c4 = s.corpus.oracle_seconds + s.dueling_seconds;
    const double lim = scaled_limit(900);
    if (want(4)) {
      Verdict v = convergence(s);
      if (c4 > lim) {
        v.pass = false;
        v.detail += "; over the time limit";
      }
      report({4, "offline convergence to the grid oracle", v, c4, lim});
    }
    if (want(5)) report({5, "dueling ablation", dueling_ablation(s), total, 0});
    if (want(6)) report({6, "regularization trend", regularization_trend(s), total, 0});
  }
  timed(7, "ES update exactness", 0, [&] { return es_exactness(ctx); });
  timed(8, "ES improvement trend", 600, [&] { return es_trend(ctx); });
  timed(9, "RPM against the tuned baseline", 0, [&] { return table_direction(ctx); });
  timed(10, "determinism", 0, [&] { return determinism(ctx); });

  std::size_t passed = 0;
  for (const auto& l : lines) passed += l.v.pass ? 1 : 0;
  std::cout << passed << "/" << lines.size() << " criteria passed" << std::endl;
  return passed == lines.size() ? 0 : 1;
}
