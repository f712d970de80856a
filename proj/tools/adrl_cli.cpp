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

// Command-line entry point: every pipeline stage reads and writes files under
// one run directory so that stages can be chained or rerun independently.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adrl/config.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace adrl;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "run";
};

struct Run {
  ExperimentConfig cfg;
  fs::path dir;
  std::string command;
  std::vector<std::string> outputs;
};

Run open_run(const GlobalOptions& g, const std::string& command) {
  Run r;
  r.cfg = g.config.empty() ? default_experiment() : load_experiment(g.config);
  if (g.seed) r.cfg.seed = *g.seed;
  r.cfg.validate();
  r.dir = g.out_dir;
  r.command = command;
  fs::create_directories(r.dir);
  return r;
}

fs::path input_path(const Run& r, const std::string& flag, const char* fallback) {
  const fs::path p = flag.empty() ? r.dir / fallback : fs::path(flag);
  if (!fs::exists(p)) throw DataError("missing input " + p.string());
  return p;
}

void finish_run(Run& r) {
  std::ofstream cfg(r.dir / "config.resolved.json");
  cfg << experiment_to_text(r.cfg);
  std::ofstream m(r.dir / "manifest.txt", std::ios::app);
  m << "command: " << r.command << "\n";
  m << "seed: " << r.cfg.seed << "\n";
  m << "config: config.resolved.json\n";
  m << "oracle grid:";
  for (const auto& a : r.cfg.grid.axes) m << " [" << a.lo << ", " << a.hi << ", " << a.step << "]";
  m << "\n";
  for (const auto& o : r.outputs) m << "output: " << o << "\n";
  m << "\n";
  for (const auto& o : r.outputs) std::cout << "wrote " << (r.dir / o).string() << "\n";
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Oracle files

void write_oracle(const fs::path& path, const std::vector<OracleResult>& results) {
  json j = json::array();
  for (const auto& o : results) {
    j.push_back({{"query_id", o.state_key.query_id},
                 {"ad_position", o.state_key.ad_position},
                 {"best_action", o.best_action.values},
                 {"best_reward", o.best_reward},
                 {"records", o.records},
                 {"degenerate", o.degenerate}});
  }
  std::ofstream(path) << j.dump(2) << "\n";
}

// The probe context of each state is the first matching record of `records`.
std::vector<OracleResult> read_oracle(const fs::path& path, std::span<const AuctionRecord> records) {
  std::ifstream in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  std::vector<OracleResult> out;
  try {
    for (const auto& e : j) {
      OracleResult o;
      o.state_key = {e.at("query_id").get<std::uint32_t>(), e.at("ad_position").get<std::uint32_t>()};
      o.best_action = ActionVector(e.at("best_action").get<std::array<double, kActionDim>>());
      o.best_reward = e.at("best_reward").get<double>();
      o.records = e.at("records").get<std::size_t>();
      o.degenerate = e.value("degenerate", false);
      o.probe.query_id = o.state_key.query_id;
      o.probe.ad_position = o.state_key.ad_position;
      for (const auto& r : records) {
        if (state_key_of(r.context) == o.state_key) {
          o.probe = r.context;
          break;
        }
      }
      out.push_back(o);
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_generate(Run& r, std::optional<std::uint32_t> sessions, bool scrub) {
  if (sessions) r.cfg.generator.num_sessions = *sessions;
  r.cfg.validate();
  const auto recs = replay_stream(r.cfg);
  write_log(r.dir / "log.jsonl", recs, scrub);
  r.outputs.push_back("log.jsonl");
  std::cout << recs.size() << " records\n";
}

void cmd_calibrate(Run& r, const std::string& log) {
  const auto recs = read_log(input_path(r, log, "log.jsonl"));
  const auto imps = collect_impressions(recs, derive_seed(r.cfg.seed, streams::kImpressions));
  const auto maps = fit_partitioned(imps, r.cfg.calibration);
  maps.save(r.dir / "calibration.json");
  r.outputs.push_back("calibration.json");
  std::cout << imps.size() << " impressions, " << maps.ctr_maps().size() << " CTR partitions\n";
}

void cmd_oracle(Run& r, const std::string& log, const std::string& calibration) {
  const auto recs = read_log(input_path(r, log, "log.jsonl"));
  const auto maps = CalibrationSet::load(input_path(r, calibration, "calibration.json"));
  const EnvConfig env = resolve_env(r.cfg, recs);
  GridSearchOptions opt;
  opt.max_records_per_state = r.cfg.oracle_max_records_per_state;
  const auto results = grid_search(recs, maps, env, r.cfg.grid, opt);
  write_oracle(r.dir / "oracle.json", results);
  r.outputs.push_back("oracle.json");
  for (const auto& o : results) {
    std::cout << to_string(o.state_key) << " " << to_string(o.best_action) << (o.degenerate ? " (degenerate)" : "")
              << "\n";
  }
}

void cmd_train(Run& r, const std::string& log, const std::string& calibration, const std::string& oracle_flag,
               std::optional<std::size_t> steps) {
  if (steps) r.cfg.train.total_steps = *steps;
  r.cfg.validate();
  const auto recs = read_log(input_path(r, log, "log.jsonl"));
  const auto maps = CalibrationSet::load(input_path(r, calibration, "calibration.json"));
  const EnvConfig env = resolve_env(r.cfg, recs);

  std::vector<OracleResult> oracle;
  const fs::path oracle_path = oracle_flag.empty() ? r.dir / "oracle.json" : fs::path(oracle_flag);
  if (!oracle_flag.empty() || fs::exists(oracle_path)) oracle = read_oracle(input_path(r, oracle_flag, "oracle.json"), recs);

  const ActorNet net(r.cfg.model.features, r.cfg.model.actor, r.cfg.model.bounds);
  std::ofstream curve(r.dir / "curve.csv");
  curve << "version,pushes,critic_loss,error_uniform,error_impressions\n";
  TrainHooks hooks;
  hooks.checkpoint = [&](const CurvePoint& c, const ParameterSet& actor, const ParameterSet&) {
    curve << c.version << "," << c.pushes << "," << fmt(c.critic_loss, 10);
    if (!oracle.empty()) {
      const Policy p = [&](const SearchContext& s) { return net.act(actor, s); };
      curve << "," << fmt(policy_oracle_error(p, oracle, net.bounds(), ErrorWeighting::Uniform), 10) << ","
            << fmt(policy_oracle_error(p, oracle, net.bounds(), ErrorWeighting::Impressions), 10);
    } else {
      curve << ",,";
    }
    curve << "\n" << std::flush;
  };
  const auto res = train(recs, maps, env, r.cfg.model, r.cfg.train, hooks);
  const std::string meta = json{{"delta", env.delta}, {"versions", res.versions}, {"pushes", res.pushes}}.dump();
  save_parameters(r.dir / "actor.bin", res.actor, meta);
  save_parameters(r.dir / "critic.bin", res.critic, meta);
  r.outputs.insert(r.outputs.end(), {"actor.bin", "critic.bin", "curve.csv"});
  std::cout << res.versions << " updates from " << res.pushes << " pushes, delta " << fmt(env.delta) << "\n";
}

Policy make_policy(const Run& r, const std::string& kind, std::optional<double> squash, const std::string& action,
                   const std::string& actor_flag, const std::vector<AuctionRecord>& replay,
                   const CalibrationSet& maps, const EnvConfig& env, std::string& label,
                   std::shared_ptr<ParameterSet>& keep) {
  if (kind == "baseline") {
    double e = 0.0;
    if (squash) {
      e = *squash;
    } else {
      e = tune_baseline(replay, maps, env, r.cfg.baseline_exponents).exponent;
    }
    label = "baseline squash=" + fmt(e);
    return fixed_policy(baseline_action(e));
  }
  if (kind == "fixed") {
    const ActionVector a = parse_action(action);
    label = "fixed " + to_string(a);
    return fixed_policy(a);
  }
  const fs::path p = input_path(r, actor_flag, "actor.bin");
  keep = std::make_shared<ParameterSet>(load_parameters(p));
  auto net = std::make_shared<ActorNet>(r.cfg.model.features, r.cfg.model.actor, r.cfg.model.bounds);
  if (!(keep->layout == net->layout())) throw DataError(p.string() + ": actor layout does not match the config");
  label = "actor " + p.filename().string();
  auto params = keep;
  return [net, params](const SearchContext& s) { return net->act(*params, s); };
}

void cmd_evaluate(Run& r, const std::string& kind, std::optional<double> squash, const std::string& action,
                  const std::string& actor, const std::string& log, const std::string& calibration,
                  const std::string& mode_flag, std::string name) {
  const auto replay = read_log(input_path(r, log, "log.jsonl"));
  const auto maps = CalibrationSet::load(input_path(r, calibration, "calibration.json"));
  const EnvConfig env = resolve_env(r.cfg, replay);
  std::string label;
  std::shared_ptr<ParameterSet> keep;
  const Policy policy = make_policy(r, kind, squash, action, actor, replay, maps, env, label, keep);
  const ResponseMode mode = mode_flag == "sampled" ? ResponseMode::Sampled : ResponseMode::Expected;
  const auto stream = holdout_stream(r.cfg);
  const auto m = evaluate_policy(policy, stream, maps, env, mode, derive_seed(r.cfg.seed, streams::kEvaluation));
  if (name.empty()) name = kind;
  json j{{"name", name},
         {"policy", label},
         {"mode", mode_flag},
         {"metrics",
          {{"rpm", m.rpm},
           {"ppc", m.ppc ? json(*m.ppc) : json(nullptr)},
           {"ctr", m.ctr},
           {"impressions", m.impressions},
           {"clicks", m.clicks},
           {"revenue", m.revenue}}}};
  const std::string file = "evaluation_" + name + ".json";
  std::ofstream(r.dir / file) << j.dump(2) << "\n";
  r.outputs.push_back(file);
  std::cout << label << ": rpm " << fmt(m.rpm) << " ppc " << (m.ppc ? fmt(*m.ppc) : "n/a") << " ctr "
            << fmt(m.ctr) << "\n";
}

void cmd_es(Run& r, const std::string& actor_flag, const std::string& calibration, const std::string& log,
            std::optional<std::size_t> iterations) {
  if (iterations) r.cfg.es.iterations = *iterations;
  r.cfg.validate();
  const auto maps = CalibrationSet::load(input_path(r, calibration, "calibration.json"));
  const fs::path actor_path = input_path(r, actor_flag, "actor.bin");
  const auto theta0 = load_parameters(actor_path);
  const ActorNet net(r.cfg.model.features, r.cfg.model.actor, r.cfg.model.bounds);
  if (!(theta0.layout == net.layout())) throw DataError(actor_path.string() + ": actor layout does not match the config");
  EnvConfig env = r.cfg.env;
  if (r.cfg.delta) {
    env.delta = *r.cfg.delta;
  } else if (!log.empty() || fs::exists(r.dir / "log.jsonl")) {
    env = resolve_env(r.cfg, read_log(input_path(r, log, "log.jsonl")));
  }
  const StreamSource stream = [&](std::size_t it) { return live_stream(r.cfg, it); };
  const auto run = run_es(net, theta0, stream, maps, env, r.cfg.es);
  save_parameters(r.dir / "es_actor.bin", run.params, json{{"lambda", run.lambda}}.dump());
  std::ofstream csv(r.dir / "es_iterations.csv");
  csv << "iteration,mean_relative_reward,rpm,ppc,ctr,participating\n";
  for (const auto& it : run.iterations) {
    csv << it.iteration << "," << fmt(it.mean_relative_reward, 10) << "," << fmt(it.rpm, 10) << ","
        << (it.ppc ? fmt(*it.ppc, 10) : "") << "," << fmt(it.ctr, 10) << "," << it.participating << "\n";
  }
  r.outputs.insert(r.outputs.end(), {"es_actor.bin", "es_iterations.csv"});
  std::cout << run.iterations.size() << " iterations, lambda " << fmt(run.lambda) << "\n";
}

// ---------------------------------------------------------------------------
// Report

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (!std::getline(in, line)) return rows;
  header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(row);
  }
  return rows;
}

// Character plot of one series; x is the point index.
std::string ascii_plot(const std::string& title, const std::vector<double>& xs, const std::vector<double>& ys) {
  const int width = 60, height = 12;
  std::ostringstream out;
  out << title << "\n";
  if (ys.empty()) return out.str() + "  (no data)\n";
  const auto [lo_it, hi_it] = std::minmax_element(ys.begin(), ys.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi == lo) hi = lo + 1.0;
  std::vector<std::string> grid(height, std::string(width, ' '));
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const int col = ys.size() == 1 ? 0 : static_cast<int>(std::lround(double(i) * (width - 1) / double(ys.size() - 1)));
    const int row = static_cast<int>(std::lround((hi - ys[i]) / (hi - lo) * (height - 1)));
    grid[row][col] = '*';
  }
  for (int row = 0; row < height; ++row) {
    const double v = hi - (hi - lo) * row / (height - 1);
    out << std::setw(10) << fmt(v, 4) << " |" << grid[row] << "\n";
  }
  out << std::string(11, ' ') << "+" << std::string(width, '-') << "\n";
  out << std::string(12, ' ') << fmt(xs.front()) << " ... " << fmt(xs.back()) << "\n";
  return out.str();
}

void cmd_report(Run& r, const std::string& baseline_name) {
  std::ostringstream rep;

  const fs::path curve = r.dir / "curve.csv";
  if (fs::exists(curve)) {
    std::vector<double> xs, uni, imp;
    for (const auto& row : read_csv(curve)) {
      if (row.at("error_uniform").empty()) continue;
      xs.push_back(std::stod(row.at("version")));
      uni.push_back(std::stod(row.at("error_uniform")));
      imp.push_back(std::stod(row.at("error_impressions")));
    }
    rep << "Offline training: policy-oracle error per checkpoint\n";
    rep << "version,error_uniform,error_impressions\n";
    for (std::size_t i = 0; i < xs.size(); ++i) rep << xs[i] << "," << fmt(uni[i]) << "," << fmt(imp[i]) << "\n";
    rep << "\n" << ascii_plot("error (uniform) vs version", xs, uni) << "\n";
    std::ofstream gp(r.dir / "curve.gp");
    gp << "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'version'\n"
          "set ylabel 'policy-oracle error'\nset terminal png size 800,500\nset output 'curve.png'\n"
          "plot 'curve.csv' using 1:4 with linespoints, '' using 1:5 with linespoints\n";
    r.outputs.push_back("curve.gp");
  }

  const fs::path es = r.dir / "es_iterations.csv";
  if (fs::exists(es)) {
    std::vector<double> xs, ys;
    for (const auto& row : read_csv(es)) {
      xs.push_back(std::stod(row.at("iteration")));
      ys.push_back(std::stod(row.at("mean_relative_reward")));
    }
    rep << ascii_plot("ES mean relative reward vs iteration", xs, ys) << "\n";
  }

  std::map<std::string, json> evals;
  for (const auto& e : fs::directory_iterator(r.dir)) {
    const std::string f = e.path().filename().string();
    if (f.rfind("evaluation_", 0) == 0 && e.path().extension() == ".json") {
      std::ifstream in(e.path());
      try {
        const json j = json::parse(in);
        evals[j.at("name").get<std::string>()] = j;
      } catch (const json::exception& ex) {
        throw DataError(e.path().string() + ": " + ex.what());
      }
    }
  }
  if (!evals.empty()) {
    auto metrics_of = [](const json& j) {
      const auto& m = j.at("metrics");
      return MetricsReport::from_counters(m.at("revenue").get<double>(), m.at("clicks").get<double>(),
                                          m.at("impressions").get<std::uint64_t>());
    };
    std::ofstream csv(r.dir / "metrics.csv");
    csv << "name,policy,rpm,ppc,ctr,rpm_delta_pct,ppc_delta_pct,ctr_delta_pct\n";
    const auto base_it = evals.find(baseline_name);
    rep << "Metrics (deltas in percent vs '" << baseline_name << "')\n";
    rep << std::left << std::setw(14) << "name" << std::setw(12) << "RPM" << std::setw(12) << "PPC" << std::setw(12)
        << "CTR" << std::setw(10) << "dRPM" << std::setw(10) << "dPPC" << "dCTR\n";
    for (const auto& [name, j] : evals) {
      const auto m = metrics_of(j);
      std::optional<MetricsDelta> d;
      if (base_it != evals.end()) d = percent_delta(m, metrics_of(base_it->second));
      auto pct = [](std::optional<double> v) { return v ? fmt(*v, 4) + "%" : std::string("-"); };
      rep << std::setw(14) << name << std::setw(12) << fmt(m.rpm) << std::setw(12) << (m.ppc ? fmt(*m.ppc) : "-")
          << std::setw(12) << fmt(m.ctr) << std::setw(10) << (d ? pct(d->rpm_pct) : "-") << std::setw(10)
          << (d ? pct(d->ppc_pct) : "-") << (d ? pct(d->ctr_pct) : "-") << "\n";
      csv << name << "," << j.at("policy").get<std::string>() << "," << fmt(m.rpm, 10) << ","
          << (m.ppc ? fmt(*m.ppc, 10) : "") << "," << fmt(m.ctr, 10) << "," << (d ? fmt(d->rpm_pct, 10) : "")
          << "," << (d && d->ppc_pct ? fmt(*d->ppc_pct, 10) : "") << "," << (d ? fmt(d->ctr_pct, 10) : "") << "\n";
    }
    rep << std::right;
    r.outputs.push_back("metrics.csv");
  }

  if (rep.str().empty()) throw DataError("nothing to report in " + r.dir.string());
  std::ofstream(r.dir / "report.txt") << rep.str();
  r.outputs.push_back("report.txt");
  std::cout << rep.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline ranking-parameter learning for sponsored search"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the experiment seed");
  app.add_option("--out-dir", g.out_dir, "Run directory")->capture_default_str();
  app.fallthrough();

  std::string log, calibration, oracle, actor, mode = "expected", policy = "actor", action, name,
                                           baseline = "baseline";
  std::optional<std::uint32_t> sessions;
  std::optional<std::size_t> steps, iterations;
  std::optional<double> squash;
  bool scrub = false;

  auto* gen = app.add_subcommand("generate-log", "Write a synthetic replay log");
  gen->add_option("--sessions", sessions, "Number of sessions");
  gen->add_flag("--scrub", scrub, "Drop the ground-truth rates");

  auto* cal = app.add_subcommand("calibrate", "Fit isotonic CTR/CVR maps");
  cal->add_option("--log", log, "Replay log (default <out-dir>/log.jsonl)");

  auto* tr = app.add_subcommand("train-offline", "Train the actor and critic on the replay log");
  tr->add_option("--log", log);
  tr->add_option("--calibration", calibration);
  tr->add_option("--oracle", oracle, "Oracle file for the error curve (default <out-dir>/oracle.json if present)");
  tr->add_option("--steps", steps, "Total gradient pushes");

  auto* orc = app.add_subcommand("oracle-search", "Grid-search the best action per state");
  orc->add_option("--log", log);
  orc->add_option("--calibration", calibration);

  auto* ev = app.add_subcommand("evaluate", "Serve the held-out stream with a policy");
  ev->add_option("--policy", policy, "baseline, fixed or actor")
      ->check(CLI::IsMember({"baseline", "fixed", "actor"}))
      ->capture_default_str();
  ev->add_option("--squash", squash, "Baseline squashing exponent (default: tuned on the log)");
  ev->add_option("--action", action, "Fixed action a1,a2,a3,a4,a5");
  ev->add_option("--actor", actor, "Actor checkpoint (default <out-dir>/actor.bin)");
  ev->add_option("--mode", mode, "expected or sampled")->check(CLI::IsMember({"expected", "sampled"}));
  ev->add_option("--name", name, "Report name (default: the policy kind)");
  ev->add_option("--log", log);
  ev->add_option("--calibration", calibration);

  auto* esc = app.add_subcommand("es-online", "Refine an actor with evolution strategies on a live stream");
  esc->add_option("--actor", actor);
  esc->add_option("--calibration", calibration);
  esc->add_option("--log", log, "Log used to resolve the click weight");
  esc->add_option("--iterations", iterations);

  auto* rep = app.add_subcommand("report", "Render curves and metric tables of a run directory");
  rep->add_option("--baseline", baseline, "Evaluation name used for deltas")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*ev) {
      if (policy == "fixed" && action.empty()) throw ConfigError("--policy fixed needs --action");
      if (policy != "baseline" && squash) throw ConfigError("--squash only applies to --policy baseline");
      if (policy != "fixed" && !action.empty()) throw ConfigError("--action only applies to --policy fixed");
    }
    const std::string command = app.get_subcommands().front()->get_name();
    Run run = open_run(g, command);
    if (*gen) cmd_generate(run, sessions, scrub);
    if (*cal) cmd_calibrate(run, log);
    if (*tr) cmd_train(run, log, calibration, oracle, steps);
    if (*orc) cmd_oracle(run, log, calibration);
    if (*ev) cmd_evaluate(run, policy, squash, action, actor, log, calibration, mode, name);
    if (*esc) cmd_es(run, actor, calibration, log, iterations);
    if (*rep) cmd_report(run, baseline);
    finish_run(run);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
