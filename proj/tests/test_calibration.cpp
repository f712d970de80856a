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

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>

#include "adrl/calibration.hpp"
#include "adrl/replay_data.hpp"
#include "doctest.h"

using namespace adrl;

namespace {

// Best monotone fit by enumerating every split of the sequence into
// contiguous blocks; the isotonic solution is one of them.
std::vector<double> brute_force_isotonic(const std::vector<double>& y, const std::vector<double>& w) {
  const std::size_t n = y.size();
  double best_sse = std::numeric_limits<double>::infinity();
  std::vector<double> best;
  for (std::uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<double> fit(n);
    std::size_t start = 0;
    double prev = -std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (std::size_t i = 0; i < n; ++i) {
      const bool cut = i + 1 == n || (mask >> i & 1u);
      if (!cut) continue;
      double sw = 0.0, swy = 0.0;
      for (std::size_t j = start; j <= i; ++j) {
        sw += w[j];
        swy += w[j] * y[j];
      }
      const double m = swy / sw;
      if (m < prev) monotone = false;
      prev = m;
      for (std::size_t j = start; j <= i; ++j) fit[j] = m;
      start = i + 1;
    }
    if (!monotone) continue;
    double sse = 0.0;
    for (std::size_t j = 0; j < n; ++j) sse += w[j] * (y[j] - fit[j]) * (y[j] - fit[j]);
    if (sse < best_sse) {
      best_sse = sse;
      best = fit;
    }
  }
  return best;
}

std::vector<IsotonicPoint> points_from_buckets(const std::vector<double>& means,
                                               const std::vector<double>& counts, double width) {
  std::vector<IsotonicPoint> pts;
  for (std::size_t b = 0; b < means.size(); ++b) {
    const double pred = (static_cast<double>(b) + 0.5) * width;
    pts.push_back({pred, means[b], counts[b]});
  }
  return pts;
}

}  // namespace

TEST_CASE("PAV keeps a monotone sequence") {
  const std::vector<double> y{0.1, 0.2, 0.3};
  const std::vector<double> w{1, 1, 1};
  CHECK(pool_adjacent_violators(y, w) == y);
}

TEST_CASE("PAV pools a violating triple") {
  const std::vector<double> y{0.3, 0.1, 0.2};
  const std::vector<double> w{1, 1, 1};
  const auto fit = pool_adjacent_violators(y, w);
  for (double v : fit) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
  const auto want = brute_force_isotonic(y, w);
  for (std::size_t i = 0; i < 3; ++i) CHECK(fit[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("PAV rejects bad weights") {
  const std::vector<double> y{0.1, 0.2};
  CHECK_THROWS_AS(pool_adjacent_violators(y, std::vector<double>{1.0, 0.0}), ContractError);
  CHECK_THROWS_AS(pool_adjacent_violators(y, std::vector<double>{1.0}), ContractError);
}

TEST_CASE("PAV equals brute-force enumeration on small instances") {
  Rng rng(2024);
  for (int inst = 0; inst < 500; ++inst) {
    const std::size_t n = 1 + static_cast<std::size_t>(inst % 8);
    std::vector<double> y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = uniform01(rng);
      w[i] = 0.1 + 5.0 * uniform01(rng);
    }
    const auto fit = pool_adjacent_violators(y, w);
    const auto want = brute_force_isotonic(y, w);
    REQUIRE(fit.size() == n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(fit[i] - want[i]) <= 1e-9);
  }
}

TEST_CASE("single bucket gives the empirical rate") {
  std::vector<IsotonicPoint> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({0.034, i < 7 ? 1.0 : 0.0, 1.0});
  const auto m = fit_isotonic(pts, 0.01);
  REQUIRE(m.values.size() == 1);
  CHECK(m.values[0] == doctest::Approx(0.07).epsilon(1e-12));
  CHECK(m.apply(0.0) == doctest::Approx(0.07));
  CHECK(m.apply(0.9) == doctest::Approx(0.07));
}

TEST_CASE("fit_isotonic rejects empty input") {
  CHECK_THROWS_AS(fit_isotonic(std::vector<IsotonicPoint>{}, 0.01), ContractError);
}

TEST_CASE("bucketed fit equals PAV over bucket means") {
  const double width = 0.1;
  const std::vector<double> means{0.05, 0.3, 0.2, 0.4, 0.35};
  const std::vector<double> counts{10, 20, 5, 8, 12};
  const auto m = fit_isotonic(points_from_buckets(means, counts, width), width);
  CHECK(m.values == pool_adjacent_violators(means, counts));
  CHECK(m.buckets == std::vector<std::uint32_t>{0, 1, 2, 3, 4});
  CHECK(m.breakpoints.back() == doctest::Approx(0.5));
}

TEST_CASE("apply: boundary, lookup and order") {
  const double width = 0.1;
  // Buckets 2, 4 and 7 only.
  std::vector<IsotonicPoint> pts{{0.25, 0.1, 1}, {0.45, 0.3, 1}, {0.75, 0.6, 1}};
  const auto m = fit_isotonic(pts, width);
  CHECK(m.apply(0.01) == doctest::Approx(0.1));  // below the first breakpoint
  CHECK(m.apply(0.45) == doctest::Approx(0.3));
  CHECK(m.apply(0.5) == doctest::Approx(0.6));   // next populated bucket
  CHECK(m.apply(0.99) == doctest::Approx(0.6));  // past the last one
  double prev = -1.0;
  for (int i = 0; i <= 1000; ++i) {
    const double v = m.apply(i / 1000.0);
    CHECK(v >= prev);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    prev = v;
  }
}

TEST_CASE("identity data: apply returns the bucket mean of the outcomes") {
  Rng rng(4);
  std::vector<IsotonicPoint> pts;
  std::map<std::uint32_t, std::pair<double, double>> sums;
  for (int i = 0; i < 20000; ++i) {
    const double p = 0.3 * uniform01(rng);
    const double y = bernoulli(rng, p) ? 1.0 : 0.0;
    pts.push_back({p, y, 1.0});
    auto& s = sums[static_cast<std::uint32_t>(std::floor(p / 0.05))];
    s.first += y;
    s.second += 1.0;
  }
  const auto m = fit_isotonic(pts, 0.05);
  // Bucket means of a calibrated source are already increasing.
  std::vector<double> means;
  for (auto& [b, s] : sums) means.push_back(s.first / s.second);
  bool monotone = std::is_sorted(means.begin(), means.end());
  REQUIRE(monotone);
  std::size_t i = 0;
  for (auto& [b, s] : sums) {
    CHECK(m.apply((b + 0.5) * 0.05) == doctest::Approx(means[i++]).epsilon(1e-12));
  }
}

TEST_CASE("property: calibration preserves order within a partition") {
  Rng rng(6);
  for (int inst = 0; inst < 50; ++inst) {
    std::vector<IsotonicPoint> pts;
    for (int i = 0; i < 2000; ++i) pts.push_back({uniform01(rng), uniform01(rng) < 0.3 ? 1.0 : 0.0, 1.0});
    const auto m = fit_isotonic(pts, 0.02);
    for (int i = 0; i < 200; ++i) {
      double a = uniform01(rng), b = uniform01(rng);
      if (a > b) std::swap(a, b);
      CHECK(m.apply(a) <= m.apply(b));
    }
  }
}

TEST_CASE("sparse partitions fall back to the global map") {
  std::vector<Impression> imps;
  Rng rng(8);
  for (int i = 0; i < 5000; ++i) {
    Impression im;
    im.context.device_type = 0;
    im.pred_ctr = 0.2 * uniform01(rng);
    im.clicked = bernoulli(rng, im.pred_ctr);
    imps.push_back(im);
  }
  for (int i = 0; i < 3; ++i) {
    Impression im;
    im.context.device_type = 1;
    im.pred_ctr = 0.1;
    im.clicked = true;
    imps.push_back(im);
  }
  CalibrationConfig cfg;
  cfg.partition_fields = {ContextField::DeviceType};
  cfg.min_samples = 100;
  const auto set = fit_partitioned(imps, cfg);
  CHECK(set.has_ctr_partition({0}));
  CHECK_FALSE(set.has_ctr_partition({1}));
  SearchContext c;
  c.device_type = 1;
  CHECK(set.ctr(0.1, c) == set.global_ctr().apply(0.1));
}

TEST_CASE("identity miscalibration gives near-identity maps") {
  GeneratorConfig g;
  g.num_sessions = 6000;
  g.ctr_distortion.clear();
  g.cvr_distortion.clear();
  const auto recs = generate_log(g, 3);
  CalibrationConfig cfg;
  const auto set = fit_partitioned(collect_impressions(recs, 4), cfg);
  REQUIRE_FALSE(set.is_identity());
  for (double p : {0.03, 0.05, 0.08}) {
    CHECK(std::abs(set.global_ctr().apply(p) - p) < 0.01);
  }
}

TEST_CASE("per-device maps recover each device's distortion") {
  GeneratorConfig g;
  g.num_sessions = 12000;
  g.ctr_distortion = {{0.8}, {1.3}};
  const auto recs = generate_log(g, 5);
  CalibrationConfig cfg;
  cfg.partition_fields = {ContextField::DeviceType};
  const auto set = fit_partitioned(collect_impressions(recs, 6), cfg);
  for (std::int64_t dev : {0, 1}) {
    REQUIRE(set.has_ctr_partition({dev}));
    const double beta = dev == 0 ? 0.8 : 1.3;
    // Well-populated buckets around the Beta(2, 38) mode.
    for (double p : {0.025, 0.035, 0.045, 0.055}) {
      CHECK(std::abs(set.ctr(p, PartitionKey{dev}) - distort(p, beta)) < 0.012);
    }
  }
  // The two devices' maps really differ.
  CHECK(set.ctr(0.045, PartitionKey{0}) > set.ctr(0.045, PartitionKey{1}) + 0.01);
}

TEST_CASE("calibrated bucket error is below the raw one") {
  GeneratorConfig g;
  g.num_sessions = 8000;
  const auto recs = generate_log(g, 9);
  CalibrationConfig cfg;
  const auto set = fit_partitioned(collect_impressions(recs, 10), cfg);
  // Held-out impressions from a fresh corpus.
  const auto test = collect_impressions(generate_log(g, 19), 20);
  struct Acc {
    double n = 0, clicks = 0, raw = 0, cal = 0;
  };
  std::map<std::pair<PartitionKey, std::uint32_t>, Acc> buckets;
  for (const auto& im : test) {
    const auto key = set.key_of(im.context);
    auto& a = buckets[{key, static_cast<std::uint32_t>(im.pred_ctr / cfg.bin_width)}];
    a.n += 1;
    a.clicks += im.clicked ? 1.0 : 0.0;
    a.raw += im.pred_ctr;
    a.cal += set.ctr(im.pred_ctr, key);
  }
  double raw_mse = 0, cal_mse = 0, total = 0;
  for (const auto& [k, a] : buckets) {
    const double emp = a.clicks / a.n;
    raw_mse += a.n * std::pow(a.raw / a.n - emp, 2);
    cal_mse += a.n * std::pow(a.cal / a.n - emp, 2);
    total += a.n;
  }
  CHECK(cal_mse / total <= raw_mse / total);
}

TEST_CASE("calibration set persists losslessly") {
  GeneratorConfig g;
  g.num_sessions = 2000;
  const auto recs = generate_log(g, 1);
  CalibrationConfig cfg;
  cfg.min_samples = 500;
  const auto set = fit_partitioned(collect_impressions(recs, 2), cfg);
  const auto path = std::filesystem::temp_directory_path() / "adrl_test_calibration.json";
  set.save(path);
  const auto back = CalibrationSet::load(path);
  std::filesystem::remove(path);
  CHECK(back.to_text() == set.to_text());
  for (const auto& [key, m] : set.ctr_maps()) {
    for (double p : {0.01, 0.05, 0.2}) CHECK(back.ctr(p, key) == set.ctr(p, key));
  }
  CHECK_THROWS_AS(CalibrationSet::from_text("{not json"), DataError);
}

TEST_CASE("default set is the identity") {
  const CalibrationSet set;
  CHECK(set.is_identity());
  CHECK(set.ctr(0.123, SearchContext{}) == 0.123);
}
