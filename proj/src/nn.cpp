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

#include "adrl/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json_io.hpp"

namespace adrl {

// ---------------------------------------------------------------------------
// Parameters

std::size_t ParameterLayout::add(std::string name, std::size_t rows, std::size_t cols) {
  for (const auto& e : entries_) {
    if (e.name == name) throw ContractError("parameter layout already has '" + name + "'");
  }
  entries_.push_back({std::move(name), size_, rows, cols});
  size_ += rows * cols;
  return entries_.size() - 1;
}

std::size_t ParameterLayout::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw ContractError("parameter layout has no entry '" + name + "'");
}

std::span<double> ParameterSet::block(std::size_t entry) {
  const auto& e = layout.entry(entry);
  return {values.data() + e.offset, e.size()};
}

std::span<const double> ParameterSet::block(std::size_t entry) const {
  const auto& e = layout.entry(entry);
  return {values.data() + e.offset, e.size()};
}

void ParameterSet::fill(double v) noexcept { std::fill(values.begin(), values.end(), v); }

void require_same_layout(const ParameterSet& a, const ParameterSet& b, const char* where) {
  if (!(a.layout == b.layout) || a.values.size() != b.values.size()) {
    throw ContractError(std::string(where) + ": parameter layouts differ");
  }
}

void axpy(ParameterSet& a, const ParameterSet& b, double scale) {
  require_same_layout(a, b, "axpy");
  for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += scale * b.values[i];
}

double squared_norm(const ParameterSet& p) noexcept {
  double s = 0.0;
  for (double v : p.values) s += v * v;
  return s;
}

void soft_update(ParameterSet& target, const ParameterSet& online, double tau) {
  require_same_layout(target, online, "soft_update");
  if (!(tau > 0.0 && tau <= 1.0)) throw ContractError("soft_update: tau must lie in (0, 1]");
  if (tau == 1.0) {
    target.values = online.values;
    return;
  }
  const double keep = 1.0 - tau;
  for (std::size_t i = 0; i < target.values.size(); ++i) {
    target.values[i] = keep * target.values[i] + tau * online.values[i];
  }
}

namespace {
constexpr const char* kCheckpointMagic = "ADRL-PARAMS 1";
}

void save_parameters(const std::filesystem::path& path, const ParameterSet& p,
                     const std::string& metadata) {
  static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian");
  detail::json entries = detail::json::array();
  for (const auto& e : p.layout.entries()) {
    entries.push_back({{"name", e.name}, {"offset", e.offset}, {"rows", e.rows}, {"cols", e.cols}});
  }
  detail::json meta;
  try {
    meta = detail::json::parse(metadata);
  } catch (const detail::json::parse_error&) {
    throw ContractError("save_parameters: metadata must be JSON");
  }
  const detail::json header{{"layout", entries}, {"size", p.values.size()}, {"metadata", meta}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << kCheckpointMagic << '\n' << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(p.values.data()),
            static_cast<std::streamsize>(p.values.size() * sizeof(double)));
  if (!out) throw DataError("write failed: " + path.string());
}

ParameterSet load_parameters(const std::filesystem::path& path, std::string* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::string magic;
  std::string header_line;
  if (!std::getline(in, magic) || magic != kCheckpointMagic) {
    throw DataError(path.string() + ": not a parameter checkpoint");
  }
  if (!std::getline(in, header_line)) throw DataError(path.string() + ": missing header");
  ParameterLayout layout;
  std::size_t size = 0;
  try {
    const auto header = detail::json::parse(header_line);
    for (const auto& e : header.at("layout")) {
      const std::size_t idx = layout.add(e.at("name").get<std::string>(), e.at("rows").get<std::size_t>(),
                                         e.at("cols").get<std::size_t>());
      if (layout.entry(idx).offset != e.at("offset").get<std::size_t>()) {
        throw DataError(path.string() + ": inconsistent layout offsets");
      }
    }
    size = header.at("size").get<std::size_t>();
    if (metadata) *metadata = header.value("metadata", detail::json::object()).dump();
  } catch (const detail::json::exception& e) {
    throw DataError(path.string() + ": bad header: " + e.what());
  }
  if (size != layout.size()) throw DataError(path.string() + ": size does not match layout");
  ParameterSet p(std::move(layout));
  in.read(reinterpret_cast<char*>(p.values.data()),
          static_cast<std::streamsize>(size * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(size * sizeof(double))) {
    throw DataError(path.string() + ": truncated parameter payload");
  }
  return p;
}

// ---------------------------------------------------------------------------
// Optimizers

Optimizer::Optimizer(OptimizerConfig cfg, const ParameterLayout& layout)
    : cfg_(cfg), layout_(layout) {
  if (cfg_.kind == OptimizerConfig::Kind::Adam) {
    m_.assign(layout.size(), 0.0);
    v_.assign(layout.size(), 0.0);
  }
}

void Optimizer::apply(ParameterSet& params, const ParameterSet& grads, double lr) {
  require_same_layout(params, grads, "optimizer");
  if (!(params.layout == layout_)) throw ContractError("optimizer: layout differs from construction");
  ++steps_;
  auto& theta = params.values;
  const auto& g = grads.values;
  if (cfg_.kind == OptimizerConfig::Kind::Sgd) {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * g[i];
    return;
  }
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
  }
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Features

namespace {

constexpr std::pair<StateField, const char*> kStateFieldNames[] = {
    {StateField::QueryId, "query_id"},
    {StateField::QueryCategory, "query_category_id"},
    {StateField::AgeBucket, "user_age_bucket"},
    {StateField::Gender, "user_gender"},
    {StateField::ClickCount, "user_click_count"},
    {StateField::PurchaseCount, "user_purchase_count"},
    {StateField::AdPosition, "ad_position"},
    {StateField::DeviceType, "device_type"},
};

std::uint32_t log_bucket(double count) noexcept {
  if (!(count > 0.0)) return 0;
  return static_cast<std::uint32_t>(std::floor(std::log2(1.0 + count)));
}

}  // namespace

std::string to_string(StateField f) {
  for (const auto& [field, name] : kStateFieldNames) {
    if (field == f) return name;
  }
  return "unknown";
}

StateField parse_state_field(const std::string& name) {
  for (const auto& [field, n] : kStateFieldNames) {
    if (name == n) return field;
  }
  throw ConfigError("unknown state field '" + name + "'");
}

void FeatureSpec::validate() const {
  if (fields.empty()) throw ConfigError("features: at least one state field is required");
  if (embedding_dim == 0) throw ConfigError("features: embedding_dim must be >= 1");
  for (const auto& f : fields) {
    if (f.vocab == 0) throw ConfigError("features: vocab must be >= 1 for " + to_string(f.field));
  }
}

std::uint32_t FeatureSpec::id_of(const SearchContext& c, std::size_t field) const noexcept {
  const FeatureField& f = fields[field];
  std::uint64_t raw = 0;
  switch (f.field) {
    case StateField::QueryId: raw = c.query_id; break;
    case StateField::QueryCategory: raw = c.query_category_id; break;
    case StateField::AgeBucket: raw = c.user_age_bucket; break;
    case StateField::Gender: raw = c.user_gender; break;
    case StateField::ClickCount: {
      // Counters saturate in the top bucket instead of wrapping.
      return std::min<std::uint32_t>(log_bucket(c.user_click_count), f.vocab - 1);
    }
    case StateField::PurchaseCount: {
      return std::min<std::uint32_t>(log_bucket(c.user_purchase_count), f.vocab - 1);
    }
    case StateField::AdPosition: raw = c.ad_position; break;
    case StateField::DeviceType: raw = c.device_type; break;
  }
  if (raw < f.vocab) return static_cast<std::uint32_t>(raw);
  return static_cast<std::uint32_t>(mix64(raw) % f.vocab);
}

// ---------------------------------------------------------------------------
// Shared network pieces

namespace {

constexpr double kEmbeddingInit = 0.1;
constexpr double kOutputInit = 3e-3;

void uniform_fill(std::span<double> xs, double scale, Rng& rng) {
  for (double& x : xs) x = scale * (2.0 * uniform01(rng) - 1.0);
}

std::vector<std::size_t> add_embeddings(ParameterLayout& layout, const FeatureSpec& spec) {
  std::vector<std::size_t> out;
  for (const auto& f : spec.fields) {
    out.push_back(layout.add("emb." + to_string(f.field), f.vocab, spec.embedding_dim));
  }
  return out;
}

void embed(const FeatureSpec& spec, const ParameterSet& p, const std::vector<std::size_t>& entries,
           std::span<const SearchContext> states, std::vector<std::uint32_t>& ids,
           std::vector<double>& out) {
  const std::size_t nf = spec.fields.size();
  const std::size_t dim = spec.embedding_dim;
  ids.resize(states.size() * nf);
  out.resize(states.size() * nf * dim);
  for (std::size_t b = 0; b < states.size(); ++b) {
    for (std::size_t f = 0; f < nf; ++f) {
      const std::uint32_t id = spec.id_of(states[b], f);
      ids[b * nf + f] = id;
      const auto table = p.block(entries[f]);
      std::copy_n(table.begin() + static_cast<std::ptrdiff_t>(id * dim), dim,
                  out.begin() + static_cast<std::ptrdiff_t>((b * nf + f) * dim));
    }
  }
}

void embed_backward(const FeatureSpec& spec, const std::vector<std::size_t>& entries,
                    const std::vector<std::uint32_t>& ids, std::size_t batch,
                    std::span<const double> d_emb, ParameterSet& grad) {
  const std::size_t nf = spec.fields.size();
  const std::size_t dim = spec.embedding_dim;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < nf; ++f) {
      auto table = grad.block(entries[f]);
      const std::size_t id = ids[b * nf + f];
      const double* src = d_emb.data() + (b * nf + f) * dim;
      double* dst = table.data() + id * dim;
      for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
    }
  }
}

void elu_inplace(std::span<const double> pre, std::vector<double>& out) {
  out.resize(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) out[i] = elu(pre[i]);
}

void elu_backward(std::span<const double> pre, std::span<double> d) {
  for (std::size_t i = 0; i < pre.size(); ++i) d[i] *= elu_grad(pre[i]);
}

void require_batch(std::size_t n, std::size_t expected, const char* what) {
  if (n != expected) throw ContractError(std::string(what) + ": buffer size does not match batch");
}

}  // namespace

// ---------------------------------------------------------------------------
// Actor

ActorNet::ActorNet(FeatureSpec features, ActorArch arch, ActionBounds bounds)
    : features_(std::move(features)), arch_(std::move(arch)), bounds_(bounds) {
  features_.validate();
  bounds_.validate();
  emb_entries_ = add_embeddings(layout_, features_);
  std::size_t in = features_.width();
  for (std::size_t l = 0; l < arch_.hidden.size(); ++l) {
    if (arch_.hidden[l] == 0) throw ConfigError("actor: hidden widths must be >= 1");
    w_entries_.push_back(layout_.add("actor.l" + std::to_string(l) + ".w", in, arch_.hidden[l]));
    b_entries_.push_back(layout_.add("actor.l" + std::to_string(l) + ".b", 1, arch_.hidden[l]));
    in = arch_.hidden[l];
  }
  w_entries_.push_back(layout_.add("actor.out.w", in, kActionDim));
  b_entries_.push_back(layout_.add("actor.out.b", 1, kActionDim));
}

ParameterSet ActorNet::init_params(Rng& rng) const {
  ParameterSet p(layout_);
  for (std::size_t e : emb_entries_) uniform_fill(p.block(e), kEmbeddingInit, rng);
  for (std::size_t l = 0; l < w_entries_.size(); ++l) {
    const bool last = l + 1 == w_entries_.size();
    const double scale =
        last ? kOutputInit : 1.0 / std::sqrt(static_cast<double>(layout_.entry(w_entries_[l]).rows));
    uniform_fill(p.block(w_entries_[l]), scale, rng);
    uniform_fill(p.block(b_entries_[l]), scale, rng);
  }
  return p;
}

void ActorNet::forward(const ParameterSet& p, std::span<const SearchContext> states, Cache& c,
                       Exec exec) const {
  if (!(p.layout == layout_)) throw ContractError("actor forward: parameter layout mismatch");
  const std::size_t batch = states.size();
  const std::size_t nl = w_entries_.size();
  c.batch = batch;
  c.inputs.resize(nl);
  c.pre.resize(nl);
  embed(features_, p, emb_entries_, states, c.ids, c.inputs[0]);
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& we = layout_.entry(w_entries_[l]);
    const DenseShape s{batch, we.rows, we.cols};
    c.pre[l].resize(batch * we.cols);
    dense_forward(exec, s, c.inputs[l], p.block(w_entries_[l]), p.block(b_entries_[l]), c.pre[l]);
    if (l + 1 < nl) elu_inplace(c.pre[l], c.inputs[l + 1]);
  }
  const auto& z = c.pre[nl - 1];
  c.sig.resize(batch * kActionDim);
  c.actions.resize(batch * kActionDim);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < kActionDim; ++k) {
      const std::size_t i = b * kActionDim + k;
      c.sig[i] = sigmoid(z[i]);
      const double a = bounds_.lo[k] + (bounds_.hi[k] - bounds_.lo[k]) * c.sig[i];
      c.actions[i] = std::clamp(a, bounds_.lo[k], bounds_.hi[k]);
    }
  }
  c.valid = true;
}

ActionVector ActorNet::act(const ParameterSet& p, const SearchContext& state) const {
  Cache c;
  forward(p, std::span<const SearchContext>(&state, 1), c);
  ActionVector a;
  for (std::size_t k = 0; k < kActionDim; ++k) a[k] = c.actions[k];
  return a;
}

void ActorNet::backward(const ParameterSet& p, const Cache& c, std::span<const double> d_actions,
                        ParameterSet& grad, Exec exec) const {
  if (!c.valid) throw ContractError("actor backward called before forward");
  require_same_layout(p, grad, "actor backward");
  require_batch(d_actions.size(), c.batch * kActionDim, "actor backward");
  const std::size_t batch = c.batch;
  const std::size_t nl = w_entries_.size();
  std::vector<double> d(batch * kActionDim);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < kActionDim; ++k) {
      const std::size_t i = b * kActionDim + k;
      d[i] = d_actions[i] * (bounds_.hi[k] - bounds_.lo[k]) * c.sig[i] * (1.0 - c.sig[i]);
    }
  }
  std::vector<double> d_in;
  for (std::size_t l = nl; l-- > 0;) {
    const auto& we = layout_.entry(w_entries_[l]);
    const DenseShape s{batch, we.rows, we.cols};
    dense_backward_params(exec, s, c.inputs[l], d, grad.block(w_entries_[l]),
                          grad.block(b_entries_[l]));
    d_in.resize(batch * we.rows);
    dense_backward_input(exec, s, d, p.block(w_entries_[l]), d_in);
    if (l > 0) elu_backward(c.pre[l - 1], d_in);
    d.swap(d_in);
  }
  embed_backward(features_, emb_entries_, c.ids, batch, d, grad);
}

// ---------------------------------------------------------------------------
// Critic

CriticNet::CriticNet(FeatureSpec features, CriticArch arch, ActionBounds bounds)
    : features_(std::move(features)), arch_(std::move(arch)), bounds_(bounds) {
  features_.validate();
  bounds_.validate();
  if (arch_.branch_width == 0) throw ConfigError("critic: branch_width must be >= 1");
  if (arch_.joint.empty()) throw ConfigError("critic: at least one joint layer is required");
  emb_entries_ = add_embeddings(layout_, features_);
  const std::size_t bw = arch_.branch_width;
  ws_ = layout_.add("critic.state.w", features_.width(), bw);
  bs_ = layout_.add("critic.state.b", 1, bw);
  wa_ = layout_.add("critic.action.w", kActionDim, bw);
  ba_ = layout_.add("critic.action.b", 1, bw);
  std::size_t in = 2 * bw;
  for (std::size_t l = 0; l < arch_.joint.size(); ++l) {
    if (arch_.joint[l] == 0) throw ConfigError("critic: joint widths must be >= 1");
    wj_.push_back(layout_.add("critic.joint" + std::to_string(l) + ".w", in, arch_.joint[l]));
    bj_.push_back(layout_.add("critic.joint" + std::to_string(l) + ".b", 1, arch_.joint[l]));
    in = arch_.joint[l];
  }
  wadv_ = layout_.add("critic.advantage.w", in, 1);
  badv_ = layout_.add("critic.advantage.b", 1, 1);
  if (arch_.dueling) {
    wv_ = layout_.add("critic.value.w", bw, 1);
    bv_ = layout_.add("critic.value.b", 1, 1);
  }
}

ParameterSet CriticNet::init_params(Rng& rng) const {
  ParameterSet p(layout_);
  auto dense_init = [&](std::size_t w, std::size_t b, double scale) {
    uniform_fill(p.block(w), scale, rng);
    uniform_fill(p.block(b), scale, rng);
  };
  auto fan = [&](std::size_t w) {
    return 1.0 / std::sqrt(static_cast<double>(layout_.entry(w).rows));
  };
  for (std::size_t e : emb_entries_) uniform_fill(p.block(e), kEmbeddingInit, rng);
  dense_init(ws_, bs_, fan(ws_));
  dense_init(wa_, ba_, fan(wa_));
  for (std::size_t l = 0; l < wj_.size(); ++l) dense_init(wj_[l], bj_[l], fan(wj_[l]));
  dense_init(wadv_, badv_, kOutputInit);
  if (arch_.dueling) dense_init(wv_, bv_, kOutputInit);
  return p;
}

void CriticNet::forward(const ParameterSet& p, std::span<const SearchContext> states,
                        std::span<const double> actions, Cache& c, Exec exec) const {
  if (!(p.layout == layout_)) throw ContractError("critic forward: parameter layout mismatch");
  const std::size_t batch = states.size();
  require_batch(actions.size(), batch * kActionDim, "critic forward");
  const std::size_t bw = arch_.branch_width;
  c.batch = batch;
  embed(features_, p, emb_entries_, states, c.ids, c.emb);

  c.state_pre.resize(batch * bw);
  dense_forward(exec, {batch, features_.width(), bw}, c.emb, p.block(ws_), p.block(bs_), c.state_pre);
  elu_inplace(c.state_pre, c.state_h);

  c.action_in.resize(batch * kActionDim);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < kActionDim; ++k) {
      const double width = bounds_.hi[k] - bounds_.lo[k];
      const std::size_t i = b * kActionDim + k;
      c.action_in[i] = width > 0.0 ? (actions[i] - bounds_.lo[k]) / width : 0.0;
    }
  }
  c.action_pre.resize(batch * bw);
  dense_forward(exec, {batch, kActionDim, bw}, c.action_in, p.block(wa_), p.block(ba_), c.action_pre);

  c.joint_in.resize(batch * 2 * bw);
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = c.joint_in.data() + b * 2 * bw;
    for (std::size_t j = 0; j < bw; ++j) {
      row[j] = c.state_h[b * bw + j];
      row[bw + j] = elu(c.action_pre[b * bw + j]);
    }
  }

  const std::size_t nj = wj_.size();
  c.joint_pre.resize(nj);
  c.joint_h.resize(nj);
  for (std::size_t l = 0; l < nj; ++l) {
    const auto& we = layout_.entry(wj_[l]);
    const std::span<const double> in = l == 0 ? std::span<const double>(c.joint_in)
                                              : std::span<const double>(c.joint_h[l - 1]);
    c.joint_pre[l].resize(batch * we.cols);
    dense_forward(exec, {batch, we.rows, we.cols}, in, p.block(wj_[l]), p.block(bj_[l]),
                  c.joint_pre[l]);
    elu_inplace(c.joint_pre[l], c.joint_h[l]);
  }

  const std::size_t last = layout_.entry(wadv_).rows;
  c.a.resize(batch);
  dense_forward(exec, {batch, last, 1}, c.joint_h.back(), p.block(wadv_), p.block(badv_), c.a);
  c.v.assign(batch, 0.0);
  if (arch_.dueling) {
    dense_forward(exec, {batch, bw, 1}, c.state_h, p.block(wv_), p.block(bv_), c.v);
  }
  c.q.resize(batch);
  for (std::size_t b = 0; b < batch; ++b) c.q[b] = c.v[b] + c.a[b];
  c.valid = true;
}

CriticNet::Value CriticNet::evaluate(const ParameterSet& p, const SearchContext& s,
                                     const ActionVector& action) const {
  Cache c;
  forward(p, std::span<const SearchContext>(&s, 1), action.values, c);
  return {c.q[0], c.v[0], c.a[0]};
}

void CriticNet::backward(const ParameterSet& p, const Cache& c, std::span<const double> d_q,
                         ParameterSet* grad, std::span<double> d_actions, Exec exec) const {
  if (!c.valid) throw ContractError("critic backward called before forward");
  if (grad) require_same_layout(p, *grad, "critic backward");
  const std::size_t batch = c.batch;
  require_batch(d_q.size(), batch, "critic backward");
  if (!d_actions.empty()) require_batch(d_actions.size(), batch * kActionDim, "critic backward");
  const std::size_t bw = arch_.branch_width;
  const std::size_t nj = wj_.size();

  // Advantage head.
  std::vector<double> d(d_q.begin(), d_q.end());
  const std::size_t last = layout_.entry(wadv_).rows;
  if (grad) {
    dense_backward_params(exec, {batch, last, 1}, c.joint_h.back(), d, grad->block(wadv_),
                          grad->block(badv_));
  }
  std::vector<double> d_in(batch * last);
  dense_backward_input(exec, {batch, last, 1}, d, p.block(wadv_), d_in);
  d.swap(d_in);

  for (std::size_t l = nj; l-- > 0;) {
    elu_backward(c.joint_pre[l], d);
    const auto& we = layout_.entry(wj_[l]);
    const std::span<const double> in = l == 0 ? std::span<const double>(c.joint_in)
                                              : std::span<const double>(c.joint_h[l - 1]);
    if (grad) {
      dense_backward_params(exec, {batch, we.rows, we.cols}, in, d, grad->block(wj_[l]),
                            grad->block(bj_[l]));
    }
    d_in.resize(batch * we.rows);
    dense_backward_input(exec, {batch, we.rows, we.cols}, d, p.block(wj_[l]), d_in);
    d.swap(d_in);
  }

  // d now holds dL/d(joint_in): split into the two branches.
  std::vector<double> d_state(batch * bw);
  std::vector<double> d_action(batch * bw);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < bw; ++j) {
      d_state[b * bw + j] = d[b * 2 * bw + j];
      d_action[b * bw + j] = d[b * 2 * bw + bw + j];
    }
  }
  if (arch_.dueling) {
    const std::span<const double> dv(d_q.data(), batch);
    if (grad) {
      dense_backward_params(exec, {batch, bw, 1}, c.state_h, dv, grad->block(wv_), grad->block(bv_));
    }
    std::vector<double> dh(batch * bw);
    dense_backward_input(exec, {batch, bw, 1}, dv, p.block(wv_), dh);
    for (std::size_t i = 0; i < dh.size(); ++i) d_state[i] += dh[i];
  }

  elu_backward(c.action_pre, d_action);
  if (grad) {
    dense_backward_params(exec, {batch, kActionDim, bw}, c.action_in, d_action, grad->block(wa_),
                          grad->block(ba_));
  }
  if (!d_actions.empty()) {
    dense_backward_input(exec, {batch, kActionDim, bw}, d_action, p.block(wa_), d_actions);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t k = 0; k < kActionDim; ++k) {
        const double width = bounds_.hi[k] - bounds_.lo[k];
        double& da = d_actions[b * kActionDim + k];
        da = width > 0.0 ? da / width : 0.0;
      }
    }
  }

  if (grad) {
    elu_backward(c.state_pre, d_state);
    dense_backward_params(exec, {batch, features_.width(), bw}, c.emb, d_state, grad->block(ws_),
                          grad->block(bs_));
    std::vector<double> d_emb(batch * features_.width());
    dense_backward_input(exec, {batch, features_.width(), bw}, d_state, p.block(ws_), d_emb);
    embed_backward(features_, emb_entries_, c.ids, batch, d_emb, *grad);
  }
}

// ---------------------------------------------------------------------------
// Finite differences

GradientCheck check_gradient(const std::function<double(std::span<const double>)>& loss,
                             std::span<const double> at, std::span<const double> analytic,
                             double step, double floor, std::span<const std::size_t> coords) {
  if (at.size() != analytic.size()) throw ContractError("check_gradient: size mismatch");
  if (!(step > 0.0) || !(floor > 0.0)) throw ContractError("check_gradient: step and floor must be > 0");
  std::vector<double> x(at.begin(), at.end());
  GradientCheck out;
  auto visit = [&](std::size_t i) {
    if (i >= x.size()) throw ContractError("check_gradient: coordinate out of range");
    const double keep = x[i];
    x[i] = keep + step;
    const double up = loss(x);
    x[i] = keep - step;
    const double down = loss(x);
    x[i] = keep;
    const double fd = (up - down) / (2.0 * step);
    const double g = analytic[i];
    const double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), floor});
    if (rel > out.max_rel_error || out.checked == 0) {
      out.max_rel_error = std::max(out.max_rel_error, rel);
      out.worst_index = i;
    }
    ++out.checked;
  };
  if (coords.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) visit(i);
  } else {
    for (std::size_t i : coords) visit(i);
  }
  return out;
}

}  // namespace adrl
