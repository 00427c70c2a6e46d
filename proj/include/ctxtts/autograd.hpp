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

#ifndef CTXTTS_AUTOGRAD_HPP_
#define CTXTTS_AUTOGRAD_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxtts/common.hpp"

namespace ctxtts {

// Dense row-major matrix of doubles. Vectors are 1 x n or n x 1 matrices.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}
  Mat(int r, int c, std::vector<double> data)
      : rows(r), cols(c), v(std::move(data)) {}

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return v.size(); }
  double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const {
    return v.data() + static_cast<size_t>(r) * cols;
  }
};

// A named, persistent parameter array. Parameters live outside any tape and
// accumulate gradients across a batch; `lr_scale` implements per-group
// learning rates (e.g. the tiny embedding-provider fine-tuning rate) and
// `trainable=false` freezes the group entirely.
struct Param {
  std::string name;
  int ordinal = -1;  // position in the owning store
  Mat value;
  Mat grad;
  bool trainable = true;
  double lr_scale = 1.0;
  // Adam state.
  Mat adam_m;
  Mat adam_v;

  void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. One tape is built per forward pass; backward() walks the
// recorded ops in reverse. Double precision throughout so finite-difference
// gradient checks hold to ~1e-8 relative.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves -------------------------------------------------------------
  Var constant(Mat m);
  Var leaf(Mat m);  // requires grad
  // Leaf bound to a persistent parameter. Memoized per tape, so repeated
  // use of the same Param yields one node and summed gradients.
  Var param(Param& p);

  // Elementwise / linear ------------------------------------------------
  Var add(Var a, Var b);            // same shape
  Var sub(Var a, Var b);            // same shape
  Var mul(Var a, Var b);            // same shape (Hadamard)
  Var scale(Var a, double c);
  Var add_rowvec(Var a, Var row);   // a[T x d] + row[1 x d]
  Var matmul(Var a, Var b);         // [m x k] @ [k x n]
  Var matmul_bt(Var a, Var b);      // [m x k] @ [n x k]^T -> [m x n]
  Var relu(Var a);
  Var tanh_(Var a);
  Var sigmoid_(Var a);
  Var one_minus(Var a);             // 1 - a

  // Shape ops ----------------------------------------------------------
  Var slice_cols(Var a, int c0, int c1);
  Var slice_rows(Var a, int r0, int r1);
  Var concat_cols(const std::vector<Var>& xs);
  Var concat_rows(const std::vector<Var>& xs);
  // Gather rows by index (repeat allowed); backward scatter-adds.
  Var gather_rows(Var a, std::vector<int> idx);
  // Embedding lookup: rows of `table` selected by ids.
  Var embed_rows(Var table, std::vector<int> ids);
  // Zeroes the rows where keep[r] == 0 (padding re-zeroing after biased ops).
  Var mask_rows(Var a, std::vector<uint8_t> keep);
  // Stops gradient flow: value passes, backward drops.
  Var detach(Var a);

  // Attention helpers ----------------------------------------------------
  // Row softmax; masked key positions (keep == 0) get zero weight. A row
  // whose keys are all masked becomes all-zero.
  Var softmax_rows(Var a, const std::vector<uint8_t>* keep = nullptr);
  // Fused single-query multi-head scaled dot-product attention over
  // projected tokens: q [1 x d], k and v [T x d], d divisible by heads.
  // Per-head softmax(q_h . k_h / sqrt(d_head)) weighted sum of v_h,
  // heads concatenated. One tape node.
  Var sq_mha(Var q, Var k, Var v, int heads);
  // out[i][j] = p[i][bucket(j - i)] with bucket = clamp(j-i, ±clip) + clip.
  // p is [Tq x (2*clip+1)]; result is [Tq x Tk].
  Var rel_gather(Var p, int clip, int t_keys);
  // Adjoint of rel_gather: out[i][b] = sum_j [bucket(j-i)==b] a[i][j].
  Var rel_scatter(Var a, int clip);

  // Layers ---------------------------------------------------------------
  // Fused GRU cell tail: given the input projection xp [1 x 3h], the hidden
  // projection hp [1 x 3h] (gate layout [r | z | n]) and the previous state
  // [1 x h], computes sigma/tanh gating and the new state in one node.
  Var gru_gates(Var xp, Var hp, Var h_prev);
  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-6);
  // 1-D convolution over time. x is [T x Cin], w is [(K*Cin) x Cout],
  // b is [1 x Cout]; zero padding, output length = ceil(T / stride).
  Var conv1d(Var x, Var w, Var b, int kernel, int stride = 1);

  // Reductions / losses --------------------------------------------------
  Var mean_all(Var a);
  Var sum_all(Var a);
  Var mean_abs_diff(Var a, Var b);  // L1 reduced by mean over entries
  // Masked losses; `weight` has one entry per row of pred (phoneme masks) or
  // per element. Returns 0 when the mask is empty.
  Var masked_mae(Var pred, Var target, const std::vector<double>& row_weight);
  Var masked_mse(Var pred, Var target, const std::vector<double>& row_weight);
  Var softmax_xent(Var logits, const std::vector<int>& labels);

  // Access ---------------------------------------------------------------
  const Mat& val(Var x) const { return nodes_[x.id].val; }
  const Mat& grad(Var x) const { return nodes_[x.id].grad; }
  double scalar(Var x) const;

  // Runs reverse accumulation from a scalar node. When
  // `accumulate_into_params` is set, gradients of all bound parameters are
  // added into their Param::grad buffers; worker threads pass false and
  // collect gradients via bound() so Param stays single-writer.
  void backward(Var loss, bool accumulate_into_params = true);

  // Parameters bound on this tape with their leaf node ids.
  const std::vector<std::pair<Param*, int>>& bound() const {
    return bound_params_;
  }

  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Mat val;
    Mat grad;
    bool needs_grad = false;
    std::function<void()> back;  // nullptr for leaves
  };

  int push(Mat val, bool needs_grad, std::function<void()> back = nullptr);
  void ensure_grad(int id);
  bool any_grad(std::initializer_list<Var> vs) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Param*, int> param_nodes_;
  std::vector<std::pair<Param*, int>> bound_params_;
};

// Raw (untaped) kernels shared by forward and backward paths.
namespace blas {
// C += A @ B
void mm_acc(const Mat& a, const Mat& b, Mat* c);
// C += A @ B^T
void mm_bt_acc(const Mat& a, const Mat& b, Mat* c);
// C += A^T @ B
void mm_at_acc(const Mat& a, const Mat& b, Mat* c);
}  // namespace blas

// Bucket index for the relative offset j - i, clamped to [-clip, clip] and
// shifted to [0, 2*clip]. Total function over all integer pairs.
inline int relative_position_bucket(int i, int j, int clip) {
  int d = j - i;
  if (d < -clip) d = -clip;
  if (d > clip) d = clip;
  return d + clip;
}

}  // namespace ctxtts

#endif  // CTXTTS_AUTOGRAD_HPP_
