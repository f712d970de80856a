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

#include "adrl/kernels.hpp"

#include <cstdint>

#include "adrl/types.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace adrl {

namespace {

// Below this much work the OpenMP fork costs more than it saves.
constexpr std::size_t kParallelThreshold = 1U << 14;

bool go_parallel(Exec exec, std::size_t work) noexcept {
#ifdef _OPENMP
  return exec == Exec::Parallel && work >= kParallelThreshold && omp_get_max_threads() > 1;
#else
  (void)exec;
  (void)work;
  return false;
#endif
}

void check(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

inline void forward_row(const DenseShape& s, const double* xr, const double* w, const double* bias,
                        double* yr) noexcept {
  for (std::size_t o = 0; o < s.out; ++o) yr[o] = bias[o];
  for (std::size_t i = 0; i < s.in; ++i) {
    const double xi = xr[i];
    const double* wr = w + i * s.out;
    for (std::size_t o = 0; o < s.out; ++o) yr[o] += xi * wr[o];
  }
}

inline void backward_input_row(const DenseShape& s, const double* dyr, const double* w,
                               double* dxr) noexcept {
  for (std::size_t i = 0; i < s.in; ++i) {
    dxr[i] = dot(std::span<const double>(dyr, s.out), std::span<const double>(w + i * s.out, s.out));
  }
}

inline void backward_param_row(const DenseShape& s, std::size_t i, const double* x,
                               const double* dy, double* dw) noexcept {
  double* dwr = dw + i * s.out;
  for (std::size_t b = 0; b < s.batch; ++b) {
    const double xi = x[b * s.in + i];
    const double* dyr = dy + b * s.out;
    for (std::size_t o = 0; o < s.out; ++o) dwr[o] += xi * dyr[o];
  }
}

}  // namespace

int available_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  const std::size_t n = a.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

void dense_forward(Exec exec, DenseShape s, std::span<const double> x, std::span<const double> w,
                   std::span<const double> bias, std::span<double> y) {
  check(x.size() >= s.batch * s.in && w.size() >= s.in * s.out && bias.size() >= s.out &&
            y.size() >= s.batch * s.out,
        "dense_forward: buffer too small");
  const auto batch = static_cast<std::int64_t>(s.batch);
  if (go_parallel(exec, s.batch * s.in * s.out)) {
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < batch; ++b) {
      const auto ub = static_cast<std::size_t>(b);
      forward_row(s, x.data() + ub * s.in, w.data(), bias.data(), y.data() + ub * s.out);
    }
  } else {
    for (std::size_t b = 0; b < s.batch; ++b) {
      forward_row(s, x.data() + b * s.in, w.data(), bias.data(), y.data() + b * s.out);
    }
  }
}

void dense_backward_input(Exec exec, DenseShape s, std::span<const double> dy,
                          std::span<const double> w, std::span<double> dx) {
  check(dy.size() >= s.batch * s.out && w.size() >= s.in * s.out && dx.size() >= s.batch * s.in,
        "dense_backward_input: buffer too small");
  const auto batch = static_cast<std::int64_t>(s.batch);
  if (go_parallel(exec, s.batch * s.in * s.out)) {
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < batch; ++b) {
      const auto ub = static_cast<std::size_t>(b);
      backward_input_row(s, dy.data() + ub * s.out, w.data(), dx.data() + ub * s.in);
    }
  } else {
    for (std::size_t b = 0; b < s.batch; ++b) {
      backward_input_row(s, dy.data() + b * s.out, w.data(), dx.data() + b * s.in);
    }
  }
}

void dense_backward_params(Exec exec, DenseShape s, std::span<const double> x,
                           std::span<const double> dy, std::span<double> dw,
                           std::span<double> dbias) {
  check(x.size() >= s.batch * s.in && dy.size() >= s.batch * s.out && dw.size() >= s.in * s.out &&
            dbias.size() >= s.out,
        "dense_backward_params: buffer too small");
  const auto in = static_cast<std::int64_t>(s.in);
  if (go_parallel(exec, s.batch * s.in * s.out)) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < in; ++i) {
      backward_param_row(s, static_cast<std::size_t>(i), x.data(), dy.data(), dw.data());
    }
  } else {
    for (std::size_t i = 0; i < s.in; ++i) backward_param_row(s, i, x.data(), dy.data(), dw.data());
  }
  for (std::size_t b = 0; b < s.batch; ++b) {
    const double* dyr = dy.data() + b * s.out;
    for (std::size_t o = 0; o < s.out; ++o) dbias[o] += dyr[o];
  }
}

}  // namespace adrl
