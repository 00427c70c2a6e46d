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

#ifndef CTXTTS_NN_HPP_
#define CTXTTS_NN_HPP_

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxtts/autograd.hpp"

namespace ctxtts {

// Owns all model parameters. Initialization seeds are derived from the
// parameter name, so creation order does not affect init values. Iteration
// order (creation order) is what checkpoints and the optimizer use.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed) : seed_(seed) {}

  Param* create(const std::string& name, int rows, int cols,
                double init_scale, bool trainable = true,
                double lr_scale = 1.0);
  Param* create_zeros(const std::string& name, int rows, int cols,
                      bool trainable = true, double lr_scale = 1.0);
  Param* create_ones(const std::string& name, int rows, int cols,
                     bool trainable = true, double lr_scale = 1.0);

  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;
  std::vector<Param*>& all() { return order_; }
  const std::vector<Param*>& all() const { return order_; }
  void zero_grads();
  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::vector<std::unique_ptr<Param>> params_;
  std::vector<Param*> order_;
  std::unordered_map<std::string, Param*> by_name_;
};

// Xavier-style scale for a [fan_in x fan_out] weight.
double xavier_scale(int fan_in, int fan_out);

struct LinearLayer {
  Param* w = nullptr;  // [in x out]
  Param* b = nullptr;  // [1 x out]

  LinearLayer() = default;
  LinearLayer(ParamStore* ps, const std::string& prefix, int in, int out,
              bool bias = true);
  Var apply(Tape& t, Var x) const;
};

struct LayerNormLayer {
  Param* gamma = nullptr;
  Param* beta = nullptr;

  LayerNormLayer() = default;
  LayerNormLayer(ParamStore* ps, const std::string& prefix, int dim);
  Var apply(Tape& t, Var x) const;
};

struct Conv1dLayer {
  Param* w = nullptr;  // [(kernel*in) x out]
  Param* b = nullptr;  // [1 x out]
  int kernel = 1;
  int stride = 1;

  Conv1dLayer() = default;
  Conv1dLayer(ParamStore* ps, const std::string& prefix, int in, int out,
              int kernel, int stride = 1);
  Var apply(Tape& t, Var x) const;
};

// Single-layer unidirectional GRU. Gate layout along columns: [r | z | n].
struct GruLayer {
  Param* w_ih = nullptr;  // [in x 3h]
  Param* w_hh = nullptr;  // [h x 3h]
  Param* b_ih = nullptr;  // [1 x 3h]
  Param* b_hh = nullptr;  // [1 x 3h]
  int hidden = 0;

  GruLayer() = default;
  GruLayer(ParamStore* ps, const std::string& prefix, int in, int hidden);
  // Returns the final hidden state [1 x hidden] after processing the rows of
  // x [T x in] in order, starting from h = 0.
  Var last_state(Tape& t, Var x) const;
};

// Scaled dot-product attention with a single query vector. Query, keys and
// values are projected into d_att; weights softmax to 1 over the tokens.
struct SingleQueryAttention {
  LinearLayer q_proj;  // [d_query x d_att]
  LinearLayer k_proj;  // [d_token x d_att]
  LinearLayer v_proj;  // [d_token x d_att]
  int d_att = 0;
  int heads = 1;

  SingleQueryAttention() = default;
  SingleQueryAttention(ParamStore* ps, const std::string& prefix, int d_query,
                       int d_token, int d_att, int heads = 1);
  // query [1 x d_query], tokens [T x d_token] -> [1 x d_att].
  // With heads > 1 the projected space is split into equal slices, each with
  // its own softmax, and the head outputs are concatenated.
  Var apply(Tape& t, Var query, Var tokens) const;
  // Attention weights only (for tests / inspection): [heads x T].
  Mat weights(Tape& t, Var query, Var tokens) const;
};

// Gradient checking helper: central finite differences on a scalar-valued
// function of the parameter store. Used by tests and the acceptance suite.
struct GradCheckResult {
  double max_rel_err = 0.0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::string worst_param;
};

GradCheckResult gradient_check(
    ParamStore& store, const std::vector<std::pair<Param*, size_t>>& entries,
    const std::function<double()>& loss_fn,
    const std::function<void()>& grad_fn, double h = 1e-5);

}  // namespace ctxtts

#endif  // CTXTTS_NN_HPP_
