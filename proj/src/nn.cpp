// Copyright (c) 2026 The ctxtts Authors
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

#include "ctxtts/nn.hpp"

#include <cmath>

namespace ctxtts {

Param* ParamStore::create(const std::string& name, int rows, int cols,
                          double init_scale, bool trainable, double lr_scale) {
  if (by_name_.count(name)) throw InvalidInput("duplicate parameter: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Mat(rows, cols);
  p->grad = Mat(rows, cols);
  p->trainable = trainable;
  p->lr_scale = lr_scale;
  Rng rng(mix_seed(seed_, name));
  for (double& x : p->value.v) x = rng.uniform(-init_scale, init_scale);
  p->ordinal = static_cast<int>(order_.size());
  Param* raw = p.get();
  params_.push_back(std::move(p));
  order_.push_back(raw);
  by_name_[name] = raw;
  return raw;
}

Param* ParamStore::create_zeros(const std::string& name, int rows, int cols,
                                bool trainable, double lr_scale) {
  Param* p = create(name, rows, cols, 0.0, trainable, lr_scale);
  std::fill(p->value.v.begin(), p->value.v.end(), 0.0);
  return p;
}

Param* ParamStore::create_ones(const std::string& name, int rows, int cols,
                               bool trainable, double lr_scale) {
  Param* p = create(name, rows, cols, 0.0, trainable, lr_scale);
  std::fill(p->value.v.begin(), p->value.v.end(), 1.0);
  return p;
}

Param* ParamStore::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

const Param* ParamStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

void ParamStore::zero_grads() {
  for (Param* p : order_) p->zero_grad();
}

double xavier_scale(int fan_in, int fan_out) {
  return std::sqrt(6.0 / (fan_in + fan_out));
}

LinearLayer::LinearLayer(ParamStore* ps, const std::string& prefix, int in,
                         int out, bool bias) {
  w = ps->create(prefix + ".w", in, out, xavier_scale(in, out));
  if (bias) b = ps->create_zeros(prefix + ".b", 1, out);
}

Var LinearLayer::apply(Tape& t, Var x) const {
  Var y = t.matmul(x, t.param(*w));
  if (b) y = t.add_rowvec(y, t.param(*b));
  return y;
}

LayerNormLayer::LayerNormLayer(ParamStore* ps, const std::string& prefix,
                               int dim) {
  gamma = ps->create_ones(prefix + ".gamma", 1, dim);
  beta = ps->create_zeros(prefix + ".beta", 1, dim);
}

Var LayerNormLayer::apply(Tape& t, Var x) const {
  return t.layer_norm(x, t.param(*gamma), t.param(*beta));
}

Conv1dLayer::Conv1dLayer(ParamStore* ps, const std::string& prefix, int in,
                         int out, int kernel_, int stride_)
    : kernel(kernel_), stride(stride_) {
  w = ps->create(prefix + ".w", kernel_ * in, out,
                 xavier_scale(kernel_ * in, out));
  b = ps->create_zeros(prefix + ".b", 1, out);
}

Var Conv1dLayer::apply(Tape& t, Var x) const {
  return t.conv1d(x, t.param(*w), t.param(*b), kernel, stride);
}

GruLayer::GruLayer(ParamStore* ps, const std::string& prefix, int in,
                   int hidden_)
    : hidden(hidden_) {
  w_ih = ps->create(prefix + ".w_ih", in, 3 * hidden_,
                    xavier_scale(in, hidden_));
  w_hh = ps->create(prefix + ".w_hh", hidden_, 3 * hidden_,
                    xavier_scale(hidden_, hidden_));
  b_ih = ps->create_zeros(prefix + ".b_ih", 1, 3 * hidden_);
  b_hh = ps->create_zeros(prefix + ".b_hh", 1, 3 * hidden_);
}

Var GruLayer::last_state(Tape& t, Var x) const {
  const int steps = t.val(x).rows;
  if (steps < 1) throw InvalidInput("gru: needs at least one input row");
  // Input projections for all steps at once; the per-step tail is fused.
  Var xp = t.add_rowvec(t.matmul(x, t.param(*w_ih)), t.param(*b_ih));
  Var state = t.constant(Mat(1, hidden));
  for (int s = 0; s < steps; ++s) {
    Var xs = t.slice_rows(xp, s, s + 1);
    Var hp = t.add_rowvec(t.matmul(state, t.param(*w_hh)), t.param(*b_hh));
    state = t.gru_gates(xs, hp, state);
  }
  return state;
}

SingleQueryAttention::SingleQueryAttention(ParamStore* ps,
                                           const std::string& prefix,
                                           int d_query, int d_token, int d_att_,
                                           int heads_)
    : d_att(d_att_), heads(heads_) {
  if (d_att_ % heads_ != 0)
    throw InvalidInput("attention dim must divide head count");
  q_proj = LinearLayer(ps, prefix + ".q", d_query, d_att_, false);
  k_proj = LinearLayer(ps, prefix + ".k", d_token, d_att_, false);
  v_proj = LinearLayer(ps, prefix + ".v", d_token, d_att_, false);
}

Var SingleQueryAttention::apply(Tape& t, Var query, Var tokens) const {
  Var q = q_proj.apply(t, query);   // [1 x d_att]
  Var k = k_proj.apply(t, tokens);  // [T x d_att]
  Var v = v_proj.apply(t, tokens);
  return t.sq_mha(q, k, v, heads);
}

Mat SingleQueryAttention::weights(Tape& t, Var query, Var tokens) const {
  const int d_head = d_att / heads;
  Var q = q_proj.apply(t, query);
  Var k = k_proj.apply(t, tokens);
  const double inv = 1.0 / std::sqrt(static_cast<double>(d_head));
  Mat out(heads, t.val(tokens).rows);
  for (int h = 0; h < heads; ++h) {
    Var qh = t.slice_cols(q, h * d_head, (h + 1) * d_head);
    Var kh = t.slice_cols(k, h * d_head, (h + 1) * d_head);
    Var w = t.softmax_rows(t.scale(t.matmul_bt(qh, kh), inv));
    for (int j = 0; j < out.cols; ++j) out.at(h, j) = t.val(w).at(0, j);
  }
  return out;
}

GradCheckResult gradient_check(
    ParamStore& store, const std::vector<std::pair<Param*, size_t>>& entries,
    const std::function<double()>& loss_fn,
    const std::function<void()>& grad_fn, double h) {
  store.zero_grads();
  grad_fn();
  // Snapshot before the probes: loss_fn may itself touch gradients.
  std::vector<double> analytic_vals(entries.size());
  for (size_t e = 0; e < entries.size(); ++e)
    analytic_vals[e] = entries[e].first->grad.v[entries[e].second];
  GradCheckResult res;
  for (size_t e = 0; e < entries.size(); ++e) {
    const auto& [p, i] = entries[e];
    double analytic = analytic_vals[e];
    double orig = p->value.v[i];
    double step = h * std::max(1.0, std::abs(orig));
    p->value.v[i] = orig + step;
    double fp = loss_fn();
    p->value.v[i] = orig - step;
    double fm = loss_fn();
    p->value.v[i] = orig;
    double numeric = (fp - fm) / (2.0 * step);
    // Floored relative error: near-zero gradients are compared with an
    // absolute tolerance of h so finite-difference noise does not dominate.
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    double rel = std::abs(analytic - numeric) / denom;
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.analytic = analytic;
      res.numeric = numeric;
      res.worst_param = p->name + "[" + std::to_string(i) + "]";
    }
  }
  return res;
}

}  // namespace ctxtts
