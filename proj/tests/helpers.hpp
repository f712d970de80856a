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

#include <cstdint>
#include <vector>

#include "adrl/random.hpp"
#include "adrl/types.hpp"

namespace adrl::testing {

// Random record with `n` candidates, rates in (0.005, 0.3).
inline AuctionRecord random_record(Rng& rng, std::size_t n, std::uint64_t id = 0) {
  AuctionRecord r;
  r.record_id = id;
  r.session_id = id;
  for (std::size_t i = 0; i < n; ++i) {
    AdCandidate c;
    c.candidate_id = i + 1;
    c.bid = 0.05 + 5.0 * uniform01(rng);
    c.product_price = 1.0 + 99.0 * uniform01(rng);
    c.pred_ctr = 0.005 + 0.295 * uniform01(rng);
    c.pred_cvr = 0.005 + 0.295 * uniform01(rng);
    c.true_ctr = c.pred_ctr;
    c.true_cvr = c.pred_cvr;
    r.candidates.push_back(c);
  }
  return r;
}

inline ActionVector random_action(Rng& rng) {
  const ActionBounds b;
  ActionVector a;
  for (std::size_t k = 0; k < kActionDim; ++k) a[k] = b.lo[k] + (b.hi[k] - b.lo[k]) * uniform01(rng);
  return a;
}

}  // namespace adrl::testing
