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

#include "adrl/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace adrl {

using nlohmann::json;

namespace {

// Reads optional keys of one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }

  [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }

  const json* take(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void real(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }

  template <typename U>
  void count(const char* key, U& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
      out = static_cast<U>(v->get<std::uint64_t>());
    }
  }

  void flag(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }

  void text(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }

  void reals(const char* key, std::vector<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(key, "expected an array of numbers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number()) fail(key, "expected an array of numbers");
        out.push_back(x.get<double>());
      }
    }
  }

  void matrix(const char* key, std::vector<std::vector<double>>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(key, "expected an array of arrays");
      out.clear();
      for (const auto& row : *v) {
        if (!row.is_array()) fail(key, "expected an array of arrays");
        auto& r = out.emplace_back();
        for (const auto& x : row) {
          if (!x.is_number()) fail(key, "expected numbers");
          r.push_back(x.get<double>());
        }
      }
    }
  }

  Section child(const char* key) {
    const json* v = take(key);
    static const json empty = json::object();
    return Section(v ? *v : empty, path_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("config: unknown key '" + path_ + "." + it.key() + "'");
    }
  }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw ConfigError("config: '" + path_ + "." + key + "': " + what);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_generator(Section s, GeneratorConfig& g) {
  s.count("num_queries", g.num_queries);
  s.count("num_query_categories", g.num_query_categories);
  s.count("num_age_buckets", g.num_age_buckets);
  s.count("num_genders", g.num_genders);
  s.count("num_devices", g.num_devices);
  s.count("positions_per_session", g.positions_per_session);
  s.count("num_sessions", g.num_sessions);
  s.count("min_candidates", g.min_candidates);
  s.count("max_candidates", g.max_candidates);
  s.real("bid_log_mu", g.bid_log_mu);
  s.real("bid_log_sigma", g.bid_log_sigma);
  s.real("price_log_mu", g.price_log_mu);
  s.real("price_log_sigma", g.price_log_sigma);
  s.real("query_bid_spread", g.query_bid_spread);
  s.real("query_ctr_spread", g.query_ctr_spread);
  s.real("ctr_beta_a", g.ctr_beta_a);
  s.real("ctr_beta_b", g.ctr_beta_b);
  s.real("cvr_beta_a", g.cvr_beta_a);
  s.real("cvr_beta_b", g.cvr_beta_b);
  s.real("click_count_mean", g.click_count_mean);
  s.real("purchase_count_mean", g.purchase_count_mean);
  s.matrix("ctr_distortion", g.ctr_distortion);
  s.matrix("cvr_distortion", g.cvr_distortion);
  s.finish();
}

json generator_json(const GeneratorConfig& g) {
  return {{"num_queries", g.num_queries},
          {"num_query_categories", g.num_query_categories},
          {"num_age_buckets", g.num_age_buckets},
          {"num_genders", g.num_genders},
          {"num_devices", g.num_devices},
          {"positions_per_session", g.positions_per_session},
          {"num_sessions", g.num_sessions},
          {"min_candidates", g.min_candidates},
          {"max_candidates", g.max_candidates},
          {"bid_log_mu", g.bid_log_mu},
          {"bid_log_sigma", g.bid_log_sigma},
          {"price_log_mu", g.price_log_mu},
          {"price_log_sigma", g.price_log_sigma},
          {"query_bid_spread", g.query_bid_spread},
          {"query_ctr_spread", g.query_ctr_spread},
          {"ctr_beta_a", g.ctr_beta_a},
          {"ctr_beta_b", g.ctr_beta_b},
          {"cvr_beta_a", g.cvr_beta_a},
          {"cvr_beta_b", g.cvr_beta_b},
          {"click_count_mean", g.click_count_mean},
          {"purchase_count_mean", g.purchase_count_mean},
          {"ctr_distortion", g.ctr_distortion},
          {"cvr_distortion", g.cvr_distortion}};
}

void read_calibration(Section s, CalibrationConfig& c) {
  if (const json* v = s.take("partition_fields")) {
    if (!v->is_array()) s.fail("partition_fields", "expected an array of field names");
    c.partition_fields.clear();
    for (const auto& f : *v) {
      if (!f.is_string()) s.fail("partition_fields", "expected field names");
      c.partition_fields.push_back(parse_context_field(f.get<std::string>()));
    }
  }
  s.real("bin_width", c.bin_width);
  s.count("min_samples", c.min_samples);
  s.finish();
}

json calibration_json(const CalibrationConfig& c) {
  json fields = json::array();
  for (auto f : c.partition_fields) fields.push_back(to_string(f));
  return {{"partition_fields", fields}, {"bin_width", c.bin_width}, {"min_samples", c.min_samples}};
}

void read_env(Section s, EnvConfig& e, std::optional<double>& delta) {
  if (const json* v = s.take("delta")) {
    if (v->is_null()) {
      delta.reset();
    } else if (v->is_number()) {
      delta = v->get<double>();
    } else {
      s.fail("delta", "expected a number or null");
    }
  }
  s.real("purchase_weight", e.purchase_weight);
  s.real("gamma", e.gamma);
  s.count("positions_per_session", e.positions_per_session);
  s.real("reserve", e.reserve);
  s.count("k", e.k);
  s.flag("calibrated_ranking", e.calibrated_ranking);
  s.finish();
}

json env_json(const EnvConfig& e, const std::optional<double>& delta) {
  return {{"delta", delta ? json(*delta) : json(nullptr)},
          {"purchase_weight", e.purchase_weight},
          {"gamma", e.gamma},
          {"positions_per_session", e.positions_per_session},
          {"reserve", e.reserve},
          {"k", e.k},
          {"calibrated_ranking", e.calibrated_ranking}};
}

std::array<double, kActionDim> read_action_array(Section& s, const char* key,
                                                 const std::array<double, kActionDim>& def) {
  std::vector<double> v(def.begin(), def.end());
  s.reals(key, v);
  if (v.size() != kActionDim) s.fail(key, "expected 5 numbers");
  std::array<double, kActionDim> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

void read_model(Section s, ModelConfig& m, bool& features_given) {
  features_given = s.has("features");
  if (const json* v = s.take("features")) {
    if (!v->is_array()) s.fail("features", "expected an array");
    m.features.fields.clear();
    for (const auto& f : *v) {
      Section fs(f, "model.features[]");
      std::string name;
      FeatureField ff;
      fs.text("field", name);
      fs.count("vocab", ff.vocab);
      fs.finish();
      ff.field = parse_state_field(name);
      m.features.fields.push_back(ff);
    }
  }
  s.count("embedding_dim", m.features.embedding_dim);
  {
    Section a = s.child("actor");
    std::vector<double> hidden(m.actor.hidden.begin(), m.actor.hidden.end());
    a.reals("hidden", hidden);
    m.actor.hidden.assign(hidden.begin(), hidden.end());
    a.finish();
  }
  {
    Section c = s.child("critic");
    c.count("branch_width", m.critic.branch_width);
    std::vector<double> joint(m.critic.joint.begin(), m.critic.joint.end());
    c.reals("joint", joint);
    m.critic.joint.assign(joint.begin(), joint.end());
    c.flag("dueling", m.critic.dueling);
    c.finish();
  }
  m.bounds.lo = read_action_array(s, "bounds_lo", m.bounds.lo);
  m.bounds.hi = read_action_array(s, "bounds_hi", m.bounds.hi);
  s.finish();
}

json model_json(const ModelConfig& m) {
  json features = json::array();
  for (const auto& f : m.features.fields) features.push_back({{"field", to_string(f.field)}, {"vocab", f.vocab}});
  return {{"features", features},
          {"embedding_dim", m.features.embedding_dim},
          {"actor", {{"hidden", m.actor.hidden}}},
          {"critic",
           {{"branch_width", m.critic.branch_width}, {"joint", m.critic.joint}, {"dueling", m.critic.dueling}}},
          {"bounds_lo", m.bounds.lo},
          {"bounds_hi", m.bounds.hi}};
}

void read_train(Section s, std::string& preset, TrainConfig& t) {
  s.text("preset", preset);
  t = TrainConfig::preset(preset);
  s.count("batch_size", t.batch_size);
  s.real("lr_actor", t.lr_actor);
  s.real("lr_critic", t.lr_critic);
  s.real("tau", t.tau);
  s.real("gamma", t.gamma);
  s.real("regularization", t.regularization);
  s.count("num_workers", t.num_workers);
  s.count("global_update_every", t.global_update_every);
  s.count("total_steps", t.total_steps);
  s.count("seed", t.seed);
  s.count("replay_per_worker", t.replay_per_worker);
  s.count("explore_per_step", t.explore_per_step);
  s.real("reward_scale", t.reward_scale);
  s.count("critic_warmup", t.critic_warmup);
  s.count("eval_every", t.eval_every);
  s.flag("serial", t.serial);
  std::string opt = t.optimizer.kind == OptimizerConfig::Kind::Adam ? "adam" : "sgd";
  s.text("optimizer", opt);
  if (opt == "adam") {
    t.optimizer.kind = OptimizerConfig::Kind::Adam;
  } else if (opt == "sgd") {
    t.optimizer.kind = OptimizerConfig::Kind::Sgd;
  } else {
    s.fail("optimizer", "expected 'adam' or 'sgd'");
  }
  std::string exec = t.kernel_exec == Exec::Serial ? "serial" : "parallel";
  s.text("kernel_exec", exec);
  if (exec == "serial") {
    t.kernel_exec = Exec::Serial;
  } else if (exec == "parallel") {
    t.kernel_exec = Exec::Parallel;
  } else {
    s.fail("kernel_exec", "expected 'serial' or 'parallel'");
  }
  s.finish();
}

json train_json(const std::string& preset, const TrainConfig& t) {
  return {{"preset", preset},
          {"batch_size", t.batch_size},
          {"lr_actor", t.lr_actor},
          {"lr_critic", t.lr_critic},
          {"tau", t.tau},
          {"gamma", t.gamma},
          {"regularization", t.regularization},
          {"num_workers", t.num_workers},
          {"global_update_every", t.global_update_every},
          {"total_steps", t.total_steps},
          {"seed", t.seed},
          {"replay_per_worker", t.replay_per_worker},
          {"explore_per_step", t.explore_per_step},
          {"reward_scale", t.reward_scale},
          {"critic_warmup", t.critic_warmup},
          {"eval_every", t.eval_every},
          {"serial", t.serial},
          {"optimizer", t.optimizer.kind == OptimizerConfig::Kind::Adam ? "adam" : "sgd"},
          {"kernel_exec", t.kernel_exec == Exec::Serial ? "serial" : "parallel"}};
}

void read_es(Section s, EsConfig& e, std::uint32_t& sessions) {
  s.count("n", e.n);
  s.real("sigma", e.sigma);
  s.real("eta", e.eta);
  if (const json* v = s.take("lambda")) {
    if (v->is_null()) {
      e.lambda.reset();
    } else if (v->is_number()) {
      e.lambda = v->get<double>();
    } else {
      s.fail("lambda", "expected a number or null");
    }
  }
  s.count("bin_count", e.bin_count);
  s.count("iterations", e.iterations);
  s.count("seed", e.seed);
  s.real("traffic_share", e.traffic_share);
  s.flag("mean_centering", e.mean_centering);
  s.count("sessions_per_iteration", sessions);
  s.finish();
}

json es_json(const EsConfig& e, std::uint32_t sessions) {
  return {{"n", e.n},
          {"sigma", e.sigma},
          {"eta", e.eta},
          {"lambda", e.lambda ? json(*e.lambda) : json(nullptr)},
          {"bin_count", e.bin_count},
          {"iterations", e.iterations},
          {"seed", e.seed},
          {"traffic_share", e.traffic_share},
          {"mean_centering", e.mean_centering},
          {"sessions_per_iteration", sessions}};
}

void read_oracle(Section s, GridSpec& g, std::size_t& max_records) {
  static const char* names[kActionDim] = {"a1", "a2", "a3", "a4", "a5"};
  for (std::size_t k = 0; k < kActionDim; ++k) {
    if (!s.has(names[k])) {
      s.take(names[k]);
      continue;
    }
    std::vector<double> v{g.axes[k].lo, g.axes[k].hi, g.axes[k].step};
    s.reals(names[k], v);
    if (v.size() != 3) s.fail(names[k], "expected [min, max, step]");
    g.axes[k] = {v[0], v[1], v[2]};
  }
  s.count("max_points", g.max_points);
  s.count("max_records_per_state", max_records);
  s.finish();
}

json oracle_json(const GridSpec& g, std::size_t max_records) {
  json j;
  static const char* names[kActionDim] = {"a1", "a2", "a3", "a4", "a5"};
  for (std::size_t k = 0; k < kActionDim; ++k) j[names[k]] = {g.axes[k].lo, g.axes[k].hi, g.axes[k].step};
  j["max_points"] = g.max_points;
  j["max_records_per_state"] = max_records;
  return j;
}

}  // namespace

void ExperimentConfig::validate() const {
  generator.validate();
  calibration.validate();
  env.validate();
  if (delta && !(std::isfinite(*delta) && *delta >= 0.0)) throw ConfigError("env: delta must be finite and >= 0");
  model.features.validate();
  model.bounds.validate();
  if (model.actor.hidden.empty()) throw ConfigError("model: actor needs at least one hidden layer");
  if (model.critic.branch_width == 0) throw ConfigError("model: critic branch_width must be >= 1");
  if (model.critic.joint.empty()) throw ConfigError("model: critic needs at least one joint layer");
  train.validate();
  es.validate();
  grid.validate();
  if (baseline_exponents.empty()) throw ConfigError("baseline_exponents must not be empty");
  for (double e : baseline_exponents) {
    if (!(e > 0.0)) throw ConfigError("baseline_exponents must be > 0");
  }
  if (env.positions_per_session != generator.positions_per_session) {
    throw ConfigError("env.positions_per_session disagrees with generator.positions_per_session");
  }
  if (holdout_sessions == 0) throw ConfigError("holdout_sessions must be >= 1");
  if (es_sessions_per_iteration == 0) throw ConfigError("es.sessions_per_iteration must be >= 1");
}

FeatureSpec default_features(const GeneratorConfig& g) {
  FeatureSpec f;
  f.fields = {{StateField::QueryId, g.num_queries}, {StateField::AdPosition, g.positions_per_session}};
  return f;
}

ExperimentConfig default_experiment() {
  ExperimentConfig c;
  c.model.features = default_features(c.generator);
  for (int i = 5; i <= 20; ++i) c.baseline_exponents.push_back(i / 10.0);
  return c;
}

ExperimentConfig parse_experiment(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c = default_experiment();
  Section root(j, "config");
  root.count("seed", c.seed);
  read_generator(root.child("generator"), c.generator);
  read_calibration(root.child("calibration"), c.calibration);
  read_env(root.child("env"), c.env, c.delta);
  bool features_given = false;
  read_model(root.child("model"), c.model, features_given);
  if (!features_given) c.model.features = default_features(c.generator);
  read_train(root.child("train"), c.train_preset, c.train);
  read_es(root.child("es"), c.es, c.es_sessions_per_iteration);
  read_oracle(root.child("oracle"), c.grid, c.oracle_max_records_per_state);
  root.reals("baseline_exponents", c.baseline_exponents);
  root.count("holdout_sessions", c.holdout_sessions);
  root.finish();
  c.validate();
  return c;
}

std::string experiment_to_text(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["generator"] = generator_json(c.generator);
  j["calibration"] = calibration_json(c.calibration);
  j["env"] = env_json(c.env, c.delta);
  j["model"] = model_json(c.model);
  j["train"] = train_json(c.train_preset, c.train);
  j["es"] = es_json(c.es, c.es_sessions_per_iteration);
  j["oracle"] = oracle_json(c.grid, c.oracle_max_records_per_state);
  j["baseline_exponents"] = c.baseline_exponents;
  j["holdout_sessions"] = c.holdout_sessions;
  return j.dump(2) + "\n";
}

EnvConfig resolve_env(const ExperimentConfig& c, std::span<const AuctionRecord> corpus) {
  EnvConfig env = c.env;
  env.delta = c.delta ? *c.delta : mean_click_price(corpus, baseline_action(1.0), env);
  env.validate();
  return env;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment(ss.str());
}

std::vector<AuctionRecord> replay_stream(const ExperimentConfig& cfg) {
  return generate_log(cfg.generator, derive_seed(cfg.seed, streams::kReplay));
}

std::vector<AuctionRecord> holdout_stream(const ExperimentConfig& cfg) {
  GeneratorConfig g = cfg.generator;
  g.num_sessions = cfg.holdout_sessions;
  return generate_log(g, derive_seed(cfg.seed, streams::kReplay), derive_seed(cfg.seed, streams::kHoldout));
}

std::vector<AuctionRecord> live_stream(const ExperimentConfig& cfg, std::size_t iteration, std::uint64_t salt) {
  GeneratorConfig g = cfg.generator;
  g.num_sessions = cfg.es_sessions_per_iteration;
  const std::uint64_t live = derive_seed(derive_seed(cfg.seed, streams::kEsLive), salt);
  return generate_log(g, derive_seed(cfg.seed, streams::kReplay), derive_seed(live, iteration));
}

}  // namespace adrl
