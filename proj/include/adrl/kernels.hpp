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

#pragma once

// Dense-layer kernels. Every kernel has a serial reference path and an OpenMP
// path; both perform the same floating-point operations in the same order
// per output element, so results are bit-identical for any thread count.

#include <cstddef>
#include <span>

namespace adrl {

enum class Exec { Serial, Parallel };

/// Number of worker threads the parallel paths may use (1 without OpenMP).
int available_threads() noexcept;

/// Row-major dense weights are stored [in][out].
struct DenseShape {
  std::size_t batch = 0;
  std::size_t in = 0;
  std::size_t out = 0;
};

/// y[b][o] = bias[o] + sum_i x[b][i] * w[i][o]
void dense_forward(Exec exec, DenseShape s, std::span<const double> x, std::span<const double> w,
                   std::span<const double> bias, std::span<double> y);

/// dx[b][i] = sum_o dy[b][o] * w[i][o]
void dense_backward_input(Exec exec, DenseShape s, std::span<const double> dy,
                          std::span<const double> w, std::span<double> dx);

/// dw[i][o] += sum_b x[b][i] * dy[b][o];  dbias[o] += sum_b dy[b][o]
void dense_backward_params(Exec exec, DenseShape s, std::span<const double> x,
                           std::span<const double> dy, std::span<double> dw,
                           std::span<double> dbias);

/// Fixed-order dot product (four interleaved partial sums).
double dot(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace adrl
