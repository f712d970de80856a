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

#include "adrl/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace adrl {

void ActionBounds::validate() const {
  for (std::size_t i = 0; i < kActionDim; ++i) {
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || lo[i] > hi[i]) {
      throw ConfigError("action bounds: component " + std::to_string(i + 1) +
                        " needs finite lo <= hi");
    }
  }
  for (std::size_t i : {0u, 2u, 4u}) {
    if (lo[i] <= 0.0) throw ConfigError("action bounds: exponents must be positive");
  }
  for (std::size_t i : {1u, 3u}) {
    if (lo[i] < 0.0) throw ConfigError("action bounds: weights must be non-negative");
  }
}

bool ActionBounds::contains(const ActionVector& a) const noexcept {
  for (std::size_t i = 0; i < kActionDim; ++i) {
    if (!std::isfinite(a[i]) || a[i] < lo[i] || a[i] > hi[i]) return false;
  }
  return true;
}

ActionVector ActionBounds::clamp(const ActionVector& a) const noexcept {
  ActionVector out;
  for (std::size_t i = 0; i < kActionDim; ++i) out[i] = std::clamp(a[i], lo[i], hi[i]);
  return out;
}

ActionVector ActionBounds::midpoint() const noexcept {
  ActionVector out;
  for (std::size_t i = 0; i < kActionDim; ++i) out[i] = 0.5 * (lo[i] + hi[i]);
  return out;
}

std::array<double, kActionDim> ActionBounds::normalize(const ActionVector& a) const noexcept {
  std::array<double, kActionDim> u{};
  for (std::size_t i = 0; i < kActionDim; ++i) {
    const double width = hi[i] - lo[i];
    u[i] = width > 0.0 ? (a[i] - lo[i]) / width : 0.0;
  }
  return u;
}

ActionVector ActionBounds::denormalize(const std::array<double, kActionDim>& u) const noexcept {
  ActionVector out;
  for (std::size_t i = 0; i < kActionDim; ++i) out[i] = lo[i] + (hi[i] - lo[i]) * u[i];
  return out;
}

std::string to_string(const ActionVector& a) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < kActionDim; ++i) os << (i ? "," : "") << a[i];
  return os.str();
}

ActionVector parse_action(const std::string& text) {
  ActionVector a;
  std::istringstream is(text);
  std::string item;
  std::size_t n = 0;
  while (std::getline(is, item, ',')) {
    if (n >= kActionDim) throw ConfigError("action: expected 5 comma-separated values");
    try {
      std::size_t used = 0;
      a[n] = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("action: cannot parse component '" + item + "'");
    }
    ++n;
  }
  if (n != kActionDim) throw ConfigError("action: expected 5 comma-separated values");
  return a;
}

}  // namespace adrl
