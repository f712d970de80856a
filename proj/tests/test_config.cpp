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

#include <string>

#include "adrl/config.hpp"
#include "doctest.h"

using namespace adrl;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_experiment(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("an empty object gives the defaults") {
  CHECK(experiment_to_text(parse_experiment("{}")) == experiment_to_text(default_experiment()));
  const auto c = default_experiment();
  CHECK_FALSE(c.delta.has_value());
  CHECK(c.grid.size() == 41503);
  CHECK(c.train_preset == "base");
}

TEST_CASE("serialized configs parse back to the same text") {
  auto c = default_experiment();
  c.seed = 99;
  c.delta = 0.75;
  c.es.lambda = 1.5;
  c.train.critic_warmup = 12;
  c.generator.num_sessions = 321;
  const auto text = experiment_to_text(c);
  const auto back = parse_experiment(text);
  CHECK(experiment_to_text(back) == text);
  REQUIRE(back.delta);
  CHECK(*back.delta == 0.75);
  CHECK(back.train.critic_warmup == 12);
  CHECK(back.generator.num_sessions == 321);
}

TEST_CASE("unknown keys are rejected with their path") {
  CHECK(error_of(R"({"generator": {"num_sesions": 10}})").find("config.generator.num_sesions") != std::string::npos);
  CHECK(error_of(R"({"tarin": {}})").find("config.tarin") != std::string::npos);
  CHECK(error_of(R"({"model": {"critic": {"width": 3}}})").find("width") != std::string::npos);
}

TEST_CASE("malformed values are rejected") {
  CHECK_FALSE(error_of("{oops").empty());
  CHECK_FALSE(error_of(R"({"seed": "seven"})").empty());
  CHECK_FALSE(error_of(R"({"env": {"delta": "auto"}})").empty());
  CHECK_FALSE(error_of(R"({"env": {"delta": -1}})").empty());
  CHECK_FALSE(error_of(R"({"train": {"optimizer": "rmsprop"}})").empty());
  CHECK_FALSE(error_of(R"({"train": {"preset": "turbo"}})").empty());
  CHECK_FALSE(error_of(R"({"oracle": {"a1": [0.5, 2.0]}})").empty());
  CHECK_FALSE(error_of(R"({"baseline_exponents": []})").empty());
  CHECK_FALSE(error_of(R"({"env": {"positions_per_session": 3}})").empty());
}

TEST_CASE("delta may be null or a number") {
  CHECK_FALSE(parse_experiment(R"({"env": {"delta": null}})").delta.has_value());
  const auto c = parse_experiment(R"({"env": {"delta": 0.25}})");
  REQUIRE(c.delta);
  CHECK(*c.delta == 0.25);
}

TEST_CASE("presets apply before explicit overrides") {
  const auto c = parse_experiment(R"({"train": {"preset": "regular"}})");
  CHECK(c.train.regularization == 1e-3);
  const auto d = parse_experiment(R"({"train": {"preset": "regular", "regularization": 0.5}})");
  CHECK(d.train.regularization == 0.5);
  CHECK(d.train_preset == "regular");
}

TEST_CASE("features follow the generator unless given") {
  const auto c = parse_experiment(R"({"generator": {"num_queries": 5}})");
  REQUIRE(c.model.features.fields.size() == 2);
  CHECK(c.model.features.fields[0].vocab == 5);
}

TEST_CASE("resolving the environment fills delta from the corpus") {
  AuctionRecord r;
  for (CandidateId id : {1, 2}) {
    AdCandidate c;
    c.candidate_id = id;
    c.bid = id == 1 ? 3.0 : 2.5;
    c.pred_ctr = id == 1 ? 0.05 : 0.04;
    c.pred_cvr = 0.1;
    c.product_price = 10.0;
    r.candidates.push_back(c);
  }
  const std::vector<AuctionRecord> recs{r};
  auto c = default_experiment();
  CHECK(resolve_env(c, recs).delta == doctest::Approx(2.0));
  c.delta = 0.0;
  CHECK(resolve_env(c, recs).delta == 0.0);
}

TEST_CASE("missing config file") {
  CHECK_THROWS_AS(load_experiment("/nonexistent/adrl.json"), ConfigError);
}
