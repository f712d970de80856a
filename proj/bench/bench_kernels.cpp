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

// Serial vs OpenMP timings of the dense kernels and the oracle grid.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "adrl/calibration.hpp"
#include "adrl/kernels.hpp"
#include "adrl/oracle.hpp"
#include "adrl/random.hpp"
#include "adrl/replay_data.hpp"

using namespace adrl;

namespace {

// Best of `reps` wall-clock runs, in milliseconds.
double time_ms(const std::function<void()>& fn, int reps = 5) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = 2.0 * uniform01(rng) - 1.0;
  return v;
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-28s %10.3f %10.3f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
              same ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads: %d\n", available_threads());
  std::printf("%-28s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  Rng rng(1);
  const DenseShape s{512, 256, 256};
  const auto x = random_vec(rng, s.batch * s.in);
  const auto w = random_vec(rng, s.in * s.out);
  const auto bias = random_vec(rng, s.out);
  const auto dy = random_vec(rng, s.batch * s.out);

  std::vector<double> ys(s.batch * s.out), yp(ys.size());
  const double f_s = time_ms([&] { dense_forward(Exec::Serial, s, x, w, bias, ys); });
  const double f_p = time_ms([&] { dense_forward(Exec::Parallel, s, x, w, bias, yp); });
  row("dense_forward 512x256x256", f_s, f_p, ys == yp);

  std::vector<double> dxs(s.batch * s.in), dxp(dxs.size());
  const double bi_s = time_ms([&] { dense_backward_input(Exec::Serial, s, dy, w, dxs); });
  const double bi_p = time_ms([&] { dense_backward_input(Exec::Parallel, s, dy, w, dxp); });
  row("dense_backward_input", bi_s, bi_p, dxs == dxp);

  std::vector<double> dws(w.size()), dbs(s.out), dwp(w.size()), dbp(s.out);
  const double bp_s = time_ms([&] {
    std::fill(dws.begin(), dws.end(), 0.0);
    std::fill(dbs.begin(), dbs.end(), 0.0);
    dense_backward_params(Exec::Serial, s, x, dy, dws, dbs);
  });
  const double bp_p = time_ms([&] {
    std::fill(dwp.begin(), dwp.end(), 0.0);
    std::fill(dbp.begin(), dbp.end(), 0.0);
    dense_backward_params(Exec::Parallel, s, x, dy, dwp, dbp);
  });
  row("dense_backward_params", bp_s, bp_p, dws == dwp && dbs == dbp);

  GeneratorConfig g;
  g.num_sessions = 50;
  const auto recs = generate_log(g, 2);
  CalibrationConfig cc;
  cc.min_samples = 100;
  const auto maps = fit_partitioned(collect_impressions(generate_log(g, 3), 4), cc);
  EnvConfig env;
  env.delta = 0.5;
  GridSpec grid;
  grid.axes[1].step = 2.0;
  grid.axes[3].step = 2.0;
  std::vector<double> gs, gp;
  const double g_s = time_ms([&] { gs = grid_rewards(recs, maps, env, grid, Exec::Serial); }, 2);
  const double g_p = time_ms([&] { gp = grid_rewards(recs, maps, env, grid, Exec::Parallel); }, 2);
  std::printf("grid: %zu points x %zu records\n", grid.size(), recs.size());
  row("grid_rewards", g_s, g_p, gs == gp);
  return ys == yp && dxs == dxp && dws == dwp && gs == gp ? 0 : 1;
}
