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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adrl/kernels.hpp"
#include "adrl/random.hpp"
#include "adrl/types.hpp"

namespace adrl {

// ---------------------------------------------------------------------------
// Parameters

struct ParamEntry {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  [[nodiscard]] std::size_t size() const noexcept { return rows * cols; }
  friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

/// Names the blocks of a flat parameter vector.
class ParameterLayout {
 public:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols);
  [[nodiscard]] std::size_t size() const noexcept { return size_; }
  [[nodiscard]] const std::vector<ParamEntry>& entries() const noexcept { return entries_; }
  [[nodiscard]] const ParamEntry& entry(std::size_t i) const { return entries_.at(i); }
  [[nodiscard]] std::size_t find(const std::string& name) const;
  friend bool operator==(const ParameterLayout&, const ParameterLayout&) = default;

 private:
  std::vector<ParamEntry> entries_;
  std::size_t size_ = 0;
};

/// Flat weights of one network. Gradients use the same type and layout.
struct ParameterSet {
  ParameterLayout layout;
  std::vector<double> values;

  ParameterSet() = default;
  explicit ParameterSet(ParameterLayout l) : layout(std::move(l)), values(layout.size(), 0.0) {}

  [[nodiscard]] std::span<double> block(std::size_t entry);
  [[nodiscard]] std::span<const double> block(std::size_t entry) const;
  [[nodiscard]] ParameterSet zeros_like() const { return ParameterSet(layout); }
  void fill(double v) noexcept;
  [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

void require_same_layout(const ParameterSet& a, const ParameterSet& b, const char* where);
/// a += scale * b
void axpy(ParameterSet& a, const ParameterSet& b, double scale);
double squared_norm(const ParameterSet& p) noexcept;

/// target <- (1 - tau) * target + tau * online
void soft_update(ParameterSet& target, const ParameterSet& online, double tau);

/// Binary checkpoint: text header with the layout and optional metadata,
/// then the raw little-endian doubles. Reload is bit-exact.
void save_parameters(const std::filesystem::path& path, const ParameterSet& p,
                     const std::string& metadata = "{}");
ParameterSet load_parameters(const std::filesystem::path& path, std::string* metadata = nullptr);

// ---------------------------------------------------------------------------
// Optimizers

struct OptimizerConfig {
  enum class Kind { Sgd, Adam };
  Kind kind = Kind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerConfig cfg, const ParameterLayout& layout);

  /// params -= lr * step(grads). Rejects layout mismatches.
  void apply(ParameterSet& params, const ParameterSet& grads, double lr);
  [[nodiscard]] std::uint64_t steps() const noexcept { return steps_; }
  [[nodiscard]] const OptimizerConfig& config() const noexcept { return cfg_; }

 private:
  OptimizerConfig cfg_;
  ParameterLayout layout_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t steps_ = 0;
};

// ---------------------------------------------------------------------------
// Activations

inline double elu(double x) noexcept { return x > 0.0 ? x : std::expm1(x); }
inline double elu_grad(double x) noexcept { return x > 0.0 ? 1.0 : std::exp(x); }
double sigmoid(double x) noexcept;

// ---------------------------------------------------------------------------
// State features

/// Context attributes usable as ID features. Behaviour counters are
/// bucketed on a log2 scale.
enum class StateField {
  QueryId,
  QueryCategory,
  AgeBucket,
  Gender,
  ClickCount,
  PurchaseCount,
  AdPosition,
  DeviceType
};

std::string to_string(StateField f);
StateField parse_state_field(const std::string& name);

struct FeatureField {
  StateField field = StateField::QueryId;
  std::uint32_t vocab = 1;
  friend bool operator==(const FeatureField&, const FeatureField&) = default;
};

struct FeatureSpec {
  std::vector<FeatureField> fields;
  std::size_t embedding_dim = 8;

  void validate() const;
  /// Hashes out-of-vocabulary values into range; never fails.
  [[nodiscard]] std::uint32_t id_of(const SearchContext& c, std::size_t field) const noexcept;
  [[nodiscard]] std::size_t width() const noexcept { return fields.size() * embedding_dim; }
  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

// ---------------------------------------------------------------------------
// Networks. Parameters live outside the network objects so snapshots can be
// exchanged as plain ParameterSets.

struct ActorArch {
  std::vector<std::size_t> hidden{100, 100};
};

struct CriticArch {
  std::size_t branch_width = 500;
  std::vector<std::size_t> joint{500, 500};
  bool dueling = true;
};

class ActorNet {
 public:
  ActorNet(FeatureSpec features, ActorArch arch, ActionBounds bounds);

  [[nodiscard]] const ParameterLayout& layout() const noexcept { return layout_; }
  [[nodiscard]] const FeatureSpec& features() const noexcept { return features_; }
  [[nodiscard]] const ActorArch& arch() const noexcept { return arch_; }
  [[nodiscard]] const ActionBounds& bounds() const noexcept { return bounds_; }
  [[nodiscard]] ParameterSet init_params(Rng& rng) const;

  struct Cache {
    std::size_t batch = 0;
    std::vector<std::uint32_t> ids;           // batch x fields
    std::vector<std::vector<double>> inputs;  // input of each dense layer
    std::vector<std::vector<double>> pre;     // pre-activation of each dense layer
    std::vector<double> sig;                  // batch x 5
    std::vector<double> actions;              // batch x 5
    bool valid = false;
  };

  void forward(const ParameterSet& p, std::span<const SearchContext> states, Cache& cache,
               Exec exec = Exec::Serial) const;
  [[nodiscard]] ActionVector act(const ParameterSet& p, const SearchContext& state) const;

  /// Accumulates dL/dtheta into `grad` given dL/daction (batch x 5).
  void backward(const ParameterSet& p, const Cache& cache, std::span<const double> d_actions,
                ParameterSet& grad, Exec exec = Exec::Serial) const;

 private:
  FeatureSpec features_;
  ActorArch arch_;
  ActionBounds bounds_;
  ParameterLayout layout_;
  std::vector<std::size_t> emb_entries_;
  std::vector<std::size_t> w_entries_;
  std::vector<std::size_t> b_entries_;
};

class CriticNet {
 public:
  CriticNet(FeatureSpec features, CriticArch arch, ActionBounds bounds);

  [[nodiscard]] const ParameterLayout& layout() const noexcept { return layout_; }
  [[nodiscard]] const CriticArch& arch() const noexcept { return arch_; }
  [[nodiscard]] const FeatureSpec& features() const noexcept { return features_; }
  [[nodiscard]] const ActionBounds& bounds() const noexcept { return bounds_; }
  [[nodiscard]] ParameterSet init_params(Rng& rng) const;

  struct Cache {
    std::size_t batch = 0;
    std::vector<std::uint32_t> ids;
    std::vector<double> emb;         // batch x width
    std::vector<double> state_pre;   // batch x branch
    std::vector<double> state_h;
    std::vector<double> action_in;   // normalized actions, batch x 5
    std::vector<double> action_pre;
    std::vector<double> joint_in;    // batch x 2*branch
    std::vector<std::vector<double>> joint_pre;
    std::vector<std::vector<double>> joint_h;
    std::vector<double> q, v, a;     // batch
    bool valid = false;
  };

  /// actions: batch x 5, in raw (not normalized) coordinates.
  void forward(const ParameterSet& p, std::span<const SearchContext> states,
               std::span<const double> actions, Cache& cache, Exec exec = Exec::Serial) const;

  struct Value {
    double q = 0.0, v = 0.0, a = 0.0;
  };
  [[nodiscard]] Value evaluate(const ParameterSet& p, const SearchContext& s,
                               const ActionVector& action) const;

  /// Backpropagates dL/dQ (per sample). Either output may be null.
  /// d_actions receives dL/daction in raw coordinates (batch x 5).
  void backward(const ParameterSet& p, const Cache& cache, std::span<const double> d_q,
                ParameterSet* grad, std::span<double> d_actions, Exec exec = Exec::Serial) const;

 private:
  FeatureSpec features_;
  CriticArch arch_;
  ActionBounds bounds_;
  ParameterLayout layout_;
  std::vector<std::size_t> emb_entries_;
  std::size_t ws_ = 0, bs_ = 0, wa_ = 0, ba_ = 0;
  std::vector<std::size_t> wj_, bj_;
  std::size_t wadv_ = 0, badv_ = 0, wv_ = 0, bv_ = 0;
};

// ---------------------------------------------------------------------------
// Finite-difference verification

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares `analytic` with central differences of `loss` at `at`, one
/// coordinate at a time. The relative error is |g - fd| / max(|g|, |fd|, floor).
/// `coords` limits the check to some coordinates; empty means all.
GradientCheck check_gradient(const std::function<double(std::span<const double>)>& loss,
                             std::span<const double> at, std::span<const double> analytic,
                             double step = 1e-5, double floor = 1e-6,
                             std::span<const std::size_t> coords = {});

}  // namespace adrl
