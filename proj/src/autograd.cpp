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

#include "ctxtts/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace ctxtts {

namespace blas {

// Accumulating GEMM kernels. Row-streaming saxpy form with 4-row register
// blocking: each pass over B updates four output rows, which keeps the
// inner loop contiguous (vectorizable) and cuts B traffic by 4.

namespace {

// C[i, :] += sum_p A(i, p) * B[p, :] for four rows at once. `a_stride` is
// the distance between consecutive p entries of one logical A row, and
// `a_row_stride` between the four logical rows.
inline void saxpy_rows4(const double* a0, const double* a1, const double* a2,
                        const double* a3, size_t a_step, const Mat& b,
                        double* c0, double* c1, double* c2, double* c3,
                        int k, int n) {
  for (int p = 0; p < k; ++p) {
    const double v0 = a0[p * a_step];
    const double v1 = a1[p * a_step];
    const double v2 = a2[p * a_step];
    const double v3 = a3[p * a_step];
    const double* brow = b.row(p);
    for (int j = 0; j < n; ++j) {
      const double bj = brow[j];
      c0[j] += v0 * bj;
      c1[j] += v1 * bj;
      c2[j] += v2 * bj;
      c3[j] += v3 * bj;
    }
  }
}

inline void saxpy_rows1(const double* a, size_t a_step, const Mat& b,
                        double* c, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const double v = a[p * a_step];
    const double* brow = b.row(p);
    for (int j = 0; j < n; ++j) c[j] += v * brow[j];
  }
}

}  // namespace

void mm_acc(const Mat& a, const Mat& b, Mat* c) {
  const int m = a.rows, k = a.cols, n = b.cols;
  int i = 0;
  for (; i + 4 <= m; i += 4)
    saxpy_rows4(a.row(i), a.row(i + 1), a.row(i + 2), a.row(i + 3), 1, b,
                c->row(i), c->row(i + 1), c->row(i + 2), c->row(i + 3), k, n);
  for (; i < m; ++i) saxpy_rows1(a.row(i), 1, b, c->row(i), k, n);
}

void mm_at_acc(const Mat& a, const Mat& b, Mat* c) {
  // C[i, :] += sum_p A(p, i) * B[p, :]; A columns play the role of rows.
  const int k = a.rows, m = a.cols, n = b.cols;
  const size_t step = static_cast<size_t>(a.cols);
  int i = 0;
  for (; i + 4 <= m; i += 4)
    saxpy_rows4(a.v.data() + i, a.v.data() + i + 1, a.v.data() + i + 2,
                a.v.data() + i + 3, step, b, c->row(i), c->row(i + 1),
                c->row(i + 2), c->row(i + 3), k, n);
  for (; i < m; ++i)
    saxpy_rows1(a.v.data() + i, step, b, c->row(i), k, n);
}

void mm_bt_acc(const Mat& a, const Mat& b, Mat* c) {
  const int m = a.rows, k = a.cols, n = b.rows;
  if (static_cast<long long>(m) * n * k >= 8192 && k >= 8) {
    // Transpose b once into thread-local scratch, then run the fast path.
    static thread_local std::vector<double> bt_storage;
    bt_storage.resize(static_cast<size_t>(k) * n);
    Mat bt;
    bt.rows = k;
    bt.cols = n;
    bt.v.swap(bt_storage);
    for (int j = 0; j < n; ++j) {
      const double* brow = b.row(j);
      for (int p = 0; p < k; ++p) bt.v[static_cast<size_t>(p) * n + j] = brow[p];
    }
    mm_acc(a, bt, c);
    bt_storage.swap(bt.v);
    return;
  }
  for (int i = 0; i < m; ++i) {
    const double* arow = a.row(i);
    double* crow = c->row(i);
    for (int j = 0; j < n; ++j) {
      const double* brow = b.row(j);
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

}  // namespace blas

int Tape::push(Mat val, bool needs_grad, std::function<void()> back) {
  Node n;
  n.val = std::move(val);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::ensure_grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.v.empty()) n.grad = Mat(n.val.rows, n.val.cols);
}

bool Tape::any_grad(std::initializer_list<Var> vs) const {
  for (Var v : vs)
    if (nodes_[v.id].needs_grad) return true;
  return false;
}

Var Tape::constant(Mat m) { return {push(std::move(m), false)}; }

Var Tape::leaf(Mat m) {
  int id = push(std::move(m), true);
  ensure_grad(id);
  return {id};
}

Var Tape::param(Param& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return {it->second};
  int id = push(p.value, p.trainable);
  if (p.trainable) ensure_grad(id);
  param_nodes_[&p] = id;
  bound_params_.push_back({&p, id});
  return {id};
}

#define CTXTTS_CHECK_SAME(a, b)                                     \
  if (nodes_[(a).id].val.rows != nodes_[(b).id].val.rows ||         \
      nodes_[(a).id].val.cols != nodes_[(b).id].val.cols)           \
    throw InvalidInput("shape mismatch in elementwise op");

Var Tape::add(Var a, Var b) {
  CTXTTS_CHECK_SAME(a, b);
  const Mat& av = nodes_[a.id].val;
  const Mat& bv = nodes_[b.id].val;
  Mat out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i) out.v[i] = av.v[i] + bv.v[i];
  bool ng = any_grad({a, b});
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, b, id]() {
      const Mat& g = nodes_[id].grad;
      if (nodes_[a.id].needs_grad) {
        ensure_grad(a.id);
        for (size_t i = 0; i < g.size(); ++i) nodes_[a.id].grad.v[i] += g.v[i];
      }
      if (nodes_[b.id].needs_grad) {
        ensure_grad(b.id);
        for (size_t i = 0; i < g.size(); ++i) nodes_[b.id].grad.v[i] += g.v[i];
      }
    };
  }
  return {id};
}

Var Tape::sub(Var a, Var b) {
  CTXTTS_CHECK_SAME(a, b);
  const Mat& av = nodes_[a.id].val;
  const Mat& bv = nodes_[b.id].val;
  Mat out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i) out.v[i] = av.v[i] - bv.v[i];
  bool ng = any_grad({a, b});
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, b, id]() {
      const Mat& g = nodes_[id].grad;
      if (nodes_[a.id].needs_grad) {
        ensure_grad(a.id);
        for (size_t i = 0; i < g.size(); ++i) nodes_[a.id].grad.v[i] += g.v[i];
      }
      if (nodes_[b.id].needs_grad) {
        ensure_grad(b.id);
        for (size_t i = 0; i < g.size(); ++i) nodes_[b.id].grad.v[i] -= g.v[i];
      }
    };
  }
  return {id};
}

Var Tape::mul(Var a, Var b) {
  CTXTTS_CHECK_SAME(a, b);
  const Mat& av = nodes_[a.id].val;
  const Mat& bv = nodes_[b.id].val;
  Mat out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i) out.v[i] = av.v[i] * bv.v[i];
  bool ng = any_grad({a, b});
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, b, id]() {
      const Mat& g = nodes_[id].grad;
      const Mat& av2 = nodes_[a.id].val;
      const Mat& bv2 = nodes_[b.id].val;
      if (nodes_[a.id].needs_grad) {
        ensure_grad(a.id);
        for (size_t i = 0; i < g.size(); ++i)
          nodes_[a.id].grad.v[i] += g.v[i] * bv2.v[i];
      }
      if (nodes_[b.id].needs_grad) {
        ensure_grad(b.id);
        for (size_t i = 0; i < g.size(); ++i)
          nodes_[b.id].grad.v[i] += g.v[i] * av2.v[i];
      }
    };
  }
  return {id};
}

Var Tape::scale(Var a, double c) {
  const Mat& av = nodes_[a.id].val;
  Mat out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i) out.v[i] = av.v[i] * c;
  bool ng = nodes_[a.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, c, id]() {
      const Mat& g = nodes_[id].grad;
      ensure_grad(a.id);
      for (size_t i = 0; i < g.size(); ++i) nodes_[a.id].grad.v[i] += g.v[i] * c;
    };
  }
  return {id};
}

Var Tape::add_rowvec(Var a, Var row) {
  const Mat& av = nodes_[a.id].val;
  const Mat& rv = nodes_[row.id].val;
  if (rv.rows != 1 || rv.cols != av.cols)
    throw InvalidInput("add_rowvec: row must be [1 x cols]");
  Mat out(av.rows, av.cols);
  for (int r = 0; r < av.rows; ++r)
    for (int c = 0; c < av.cols; ++c) out.at(r, c) = av.at(r, c) + rv.at(0, c);
  bool ng = any_grad({a, row});
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, row, id]() {
      const Mat& g = nodes_[id].grad;
      if (nodes_[a.id].needs_grad) {
        ensure_grad(a.id);
        for (size_t i = 0; i < g.size(); ++i) nodes_[a.id].grad.v[i] += g.v[i];
      }
      if (nodes_[row.id].needs_grad) {
        ensure_grad(row.id);
        Mat& rg = nodes_[row.id].grad;
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < g.cols; ++c) rg.at(0, c) += g.at(r, c);
      }
    };
  }
  return {id};
}

Var Tape::matmul(Var a, Var b) {
  const Mat& av = nodes_[a.id].val;
  const Mat& bv = nodes_[b.id].val;
  if (av.cols != bv.rows) throw InvalidInput("matmul: inner dims differ");
  Mat out(av.rows, bv.cols);
  blas::mm_acc(av, bv, &out);
  bool ng = any_grad({a, b});
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, b, id]() {
      const Mat& g = nodes_[id].grad;
      if (nodes_[a.id].needs_grad) {
        ensure_grad(a.id);
        blas::mm_bt_acc(g, nodes_[b.id].val, &nodes_[a.id].grad);
      }
      if (nodes_[b.id].needs_grad) {
        ensure_grad(b.id);
        blas::mm_at_acc(nodes_[a.id].val, g, &nodes_[b.id].grad);
      }
    };
  }
  return {id};
}

Var Tape::matmul_bt(Var a, Var b) {
  const Mat& av = nodes_[a.id].val;
  const Mat& bv = nodes_[b.id].val;
  if (av.cols != bv.cols) throw InvalidInput("matmul_bt: inner dims differ");
  Mat out(av.rows, bv.rows);
  blas::mm_bt_acc(av, bv, &out);
  bool ng = any_grad({a, b});
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, b, id]() {
      const Mat& g = nodes_[id].grad;
      if (nodes_[a.id].needs_grad) {
        ensure_grad(a.id);
        blas::mm_acc(g, nodes_[b.id].val, &nodes_[a.id].grad);
      }
      if (nodes_[b.id].needs_grad) {
        ensure_grad(b.id);
        blas::mm_at_acc(g, nodes_[a.id].val, &nodes_[b.id].grad);
      }
    };
  }
  return {id};
}

Var Tape::relu(Var a) {
  const Mat& av = nodes_[a.id].val;
  Mat out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i) out.v[i] = av.v[i] > 0 ? av.v[i] : 0.0;
  bool ng = nodes_[a.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, id]() {
      const Mat& g = nodes_[id].grad;
      const Mat& av2 = nodes_[a.id].val;
      ensure_grad(a.id);
      for (size_t i = 0; i < g.size(); ++i)
        if (av2.v[i] > 0) nodes_[a.id].grad.v[i] += g.v[i];
    };
  }
  return {id};
}

Var Tape::tanh_(Var a) {
  const Mat& av = nodes_[a.id].val;
  Mat out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i) out.v[i] = std::tanh(av.v[i]);
  bool ng = nodes_[a.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, id]() {
      const Mat& g = nodes_[id].grad;
      const Mat& ov = nodes_[id].val;
      ensure_grad(a.id);
      for (size_t i = 0; i < g.size(); ++i)
        nodes_[a.id].grad.v[i] += g.v[i] * (1.0 - ov.v[i] * ov.v[i]);
    };
  }
  return {id};
}

Var Tape::sigmoid_(Var a) {
  const Mat& av = nodes_[a.id].val;
  Mat out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i)
    out.v[i] = 1.0 / (1.0 + std::exp(-av.v[i]));
  bool ng = nodes_[a.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, id]() {
      const Mat& g = nodes_[id].grad;
      const Mat& ov = nodes_[id].val;
      ensure_grad(a.id);
      for (size_t i = 0; i < g.size(); ++i)
        nodes_[a.id].grad.v[i] += g.v[i] * ov.v[i] * (1.0 - ov.v[i]);
    };
  }
  return {id};
}

Var Tape::one_minus(Var a) {
  const Mat& av = nodes_[a.id].val;
  Mat out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i) out.v[i] = 1.0 - av.v[i];
  bool ng = nodes_[a.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, id]() {
      const Mat& g = nodes_[id].grad;
      ensure_grad(a.id);
      for (size_t i = 0; i < g.size(); ++i) nodes_[a.id].grad.v[i] -= g.v[i];
    };
  }
  return {id};
}

Var Tape::slice_cols(Var a, int c0, int c1) {
  const Mat& av = nodes_[a.id].val;
  if (c0 < 0 || c1 > av.cols || c0 >= c1)
    throw InvalidInput("slice_cols: bad range");
  Mat out(av.rows, c1 - c0);
  for (int r = 0; r < av.rows; ++r)
    for (int c = c0; c < c1; ++c) out.at(r, c - c0) = av.at(r, c);
  bool ng = nodes_[a.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, c0, id]() {
      const Mat& g = nodes_[id].grad;
      ensure_grad(a.id);
      Mat& ag = nodes_[a.id].grad;
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) ag.at(r, c0 + c) += g.at(r, c);
    };
  }
  return {id};
}

Var Tape::slice_rows(Var a, int r0, int r1) {
  const Mat& av = nodes_[a.id].val;
  if (r0 < 0 || r1 > av.rows || r0 >= r1)
    throw InvalidInput("slice_rows: bad range");
  Mat out(r1 - r0, av.cols);
  for (int r = r0; r < r1; ++r)
    for (int c = 0; c < av.cols; ++c) out.at(r - r0, c) = av.at(r, c);
  bool ng = nodes_[a.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, r0, id]() {
      const Mat& g = nodes_[id].grad;
      ensure_grad(a.id);
      Mat& ag = nodes_[a.id].grad;
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) ag.at(r0 + r, c) += g.at(r, c);
    };
  }
  return {id};
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw InvalidInput("concat_cols: empty list");
  int rows = nodes_[xs[0].id].val.rows;
  int cols = 0;
  bool ng = false;
  for (Var x : xs) {
    if (nodes_[x.id].val.rows != rows)
      throw InvalidInput("concat_cols: row mismatch");
    cols += nodes_[x.id].val.cols;
    ng = ng || nodes_[x.id].needs_grad;
  }
  Mat out(rows, cols);
  int off = 0;
  for (Var x : xs) {
    const Mat& xv = nodes_[x.id].val;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < xv.cols; ++c) out.at(r, off + c) = xv.at(r, c);
    off += xv.cols;
  }
  int id = push(std::move(out), ng);
  if (ng) {
    std::vector<Var> xs_copy = xs;
    nodes_[id].back = [this, xs_copy, id]() {
      const Mat& g = nodes_[id].grad;
      int off2 = 0;
      for (Var x : xs_copy) {
        const int c_n = nodes_[x.id].val.cols;
        if (nodes_[x.id].needs_grad) {
          ensure_grad(x.id);
          Mat& xg = nodes_[x.id].grad;
          for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < c_n; ++c) xg.at(r, c) += g.at(r, off2 + c);
        }
        off2 += c_n;
      }
    };
  }
  return {id};
}

Var Tape::concat_rows(const std::vector<Var>& xs) {
  if (xs.empty()) throw InvalidInput("concat_rows: empty list");
  int cols = nodes_[xs[0].id].val.cols;
  int rows = 0;
  bool ng = false;
  for (Var x : xs) {
    if (nodes_[x.id].val.cols != cols)
      throw InvalidInput("concat_rows: col mismatch");
    rows += nodes_[x.id].val.rows;
    ng = ng || nodes_[x.id].needs_grad;
  }
  Mat out(rows, cols);
  int off = 0;
  for (Var x : xs) {
    const Mat& xv = nodes_[x.id].val;
    for (int r = 0; r < xv.rows; ++r)
      for (int c = 0; c < cols; ++c) out.at(off + r, c) = xv.at(r, c);
    off += xv.rows;
  }
  int id = push(std::move(out), ng);
  if (ng) {
    std::vector<Var> xs_copy = xs;
    nodes_[id].back = [this, xs_copy, id]() {
      const Mat& g = nodes_[id].grad;
      int off2 = 0;
      for (Var x : xs_copy) {
        const int r_n = nodes_[x.id].val.rows;
        if (nodes_[x.id].needs_grad) {
          ensure_grad(x.id);
          Mat& xg = nodes_[x.id].grad;
          for (int r = 0; r < r_n; ++r)
            for (int c = 0; c < g.cols; ++c) xg.at(r, c) += g.at(off2 + r, c);
        }
        off2 += r_n;
      }
    };
  }
  return {id};
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
  const Mat& av = nodes_[a.id].val;
  for (int i : idx)
    if (i < 0 || i >= av.rows) throw InvalidInput("gather_rows: index range");
  Mat out(static_cast<int>(idx.size()), av.cols);
  for (size_t r = 0; r < idx.size(); ++r)
    for (int c = 0; c < av.cols; ++c)
      out.at(static_cast<int>(r), c) = av.at(idx[r], c);
  bool ng = nodes_[a.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, idx, id]() {
      const Mat& g = nodes_[id].grad;
      ensure_grad(a.id);
      Mat& ag = nodes_[a.id].grad;
      for (size_t r = 0; r < idx.size(); ++r)
        for (int c = 0; c < g.cols; ++c)
          ag.at(idx[r], c) += g.at(static_cast<int>(r), c);
    };
  }
  return {id};
}

Var Tape::embed_rows(Var table, std::vector<int> ids) {
  return gather_rows(table, std::move(ids));
}

Var Tape::mask_rows(Var a, std::vector<uint8_t> keep) {
  const Mat& av = nodes_[a.id].val;
  if (static_cast<int>(keep.size()) != av.rows)
    throw InvalidInput("mask_rows: mask length");
  Mat out(av.rows, av.cols);
  for (int r = 0; r < av.rows; ++r) {
    if (!keep[r]) continue;
    for (int c = 0; c < av.cols; ++c) out.at(r, c) = av.at(r, c);
  }
  bool ng = nodes_[a.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, keep, id]() {
      const Mat& g = nodes_[id].grad;
      ensure_grad(a.id);
      Mat& ag = nodes_[a.id].grad;
      for (int r = 0; r < g.rows; ++r) {
        if (!keep[r]) continue;
        for (int c = 0; c < g.cols; ++c) ag.at(r, c) += g.at(r, c);
      }
    };
  }
  return {id};
}

Var Tape::detach(Var a) { return constant(nodes_[a.id].val); }

Var Tape::softmax_rows(Var a, const std::vector<uint8_t>* keep) {
  const Mat& av = nodes_[a.id].val;
  if (keep && static_cast<int>(keep->size()) != av.cols)
    throw InvalidInput("softmax_rows: mask length");
  for (double x : av.v)
    if (!std::isfinite(x)) throw NumericError("softmax_rows: non-finite logit");
  Mat out(av.rows, av.cols);
  for (int r = 0; r < av.rows; ++r) {
    double mx = -1e300;
    for (int c = 0; c < av.cols; ++c)
      if (!keep || (*keep)[c]) mx = std::max(mx, av.at(r, c));
    double z = 0.0;
    for (int c = 0; c < av.cols; ++c) {
      if (keep && !(*keep)[c]) continue;
      out.at(r, c) = std::exp(av.at(r, c) - mx);
      z += out.at(r, c);
    }
    if (z > 0)
      for (int c = 0; c < av.cols; ++c) out.at(r, c) /= z;
  }
  bool ng = nodes_[a.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, id]() {
      const Mat& g = nodes_[id].grad;
      const Mat& s = nodes_[id].val;
      ensure_grad(a.id);
      Mat& ag = nodes_[a.id].grad;
      for (int r = 0; r < g.rows; ++r) {
        double dot = 0.0;
        for (int c = 0; c < g.cols; ++c) dot += g.at(r, c) * s.at(r, c);
        for (int c = 0; c < g.cols; ++c)
          ag.at(r, c) += s.at(r, c) * (g.at(r, c) - dot);
      }
    };
  }
  return {id};
}

Var Tape::sq_mha(Var q, Var k, Var v, int heads) {
  const Mat& qv = nodes_[q.id].val;
  const Mat& kv = nodes_[k.id].val;
  const Mat& vv = nodes_[v.id].val;
  const int d = qv.cols, tt = kv.rows;
  if (qv.rows != 1 || kv.cols != d || vv.cols != d || vv.rows != tt)
    throw InvalidInput("sq_mha: shape mismatch");
  if (heads < 1 || d % heads != 0)
    throw InvalidInput("sq_mha: heads must divide dim");
  const int dh = d / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  for (double x : qv.v)
    if (!std::isfinite(x)) throw NumericError("sq_mha: non-finite query");
  // Per-head weights saved for the backward pass: [heads x T].
  auto weights = std::make_shared<Mat>(heads, tt);
  Mat out(1, d);
  for (int h = 0; h < heads; ++h) {
    const int c0 = h * dh;
    double mx = -1e300;
    for (int j = 0; j < tt; ++j) {
      double s = 0.0;
      const double* krow = kv.row(j) + c0;
      const double* qrow = qv.v.data() + c0;
      for (int c = 0; c < dh; ++c) s += qrow[c] * krow[c];
      weights->at(h, j) = s * inv;
      mx = std::max(mx, weights->at(h, j));
    }
    double z = 0.0;
    for (int j = 0; j < tt; ++j) {
      double e = std::exp(weights->at(h, j) - mx);
      weights->at(h, j) = e;
      z += e;
    }
    for (int j = 0; j < tt; ++j) {
      weights->at(h, j) /= z;
      const double w = weights->at(h, j);
      const double* vrow = vv.row(j) + c0;
      for (int c = 0; c < dh; ++c) out.v[c0 + c] += w * vrow[c];
    }
  }
  bool ng = any_grad({q, k, v});
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, q, k, v, heads, dh, inv, weights, id]() {
      const Mat& g = nodes_[id].grad;
      const Mat& qv2 = nodes_[q.id].val;
      const Mat& kv2 = nodes_[k.id].val;
      const Mat& vv2 = nodes_[v.id].val;
      const int tt2 = kv2.rows;
      ensure_grad(q.id);
      ensure_grad(k.id);
      ensure_grad(v.id);
      Mat& gq = nodes_[q.id].grad;
      Mat& gk = nodes_[k.id].grad;
      Mat& gv = nodes_[v.id].grad;
      for (int h = 0; h < heads; ++h) {
        const int c0 = h * dh;
        // dw_j = g . v_j ; dv_j += w_j * g
        std::vector<double> dw(tt2);
        for (int j = 0; j < tt2; ++j) {
          const double w = weights->at(h, j);
          const double* vrow = vv2.row(j) + c0;
          double* gvrow = gv.row(j) + c0;
          double s = 0.0;
          for (int c = 0; c < dh; ++c) {
            s += g.v[c0 + c] * vrow[c];
            gvrow[c] += w * g.v[c0 + c];
          }
          dw[j] = s;
        }
        // Softmax backward: dlogit_j = w_j * (dw_j - sum_i w_i dw_i).
        double dot = 0.0;
        for (int j = 0; j < tt2; ++j) dot += dw[j] * weights->at(h, j);
        for (int j = 0; j < tt2; ++j) {
          double dlogit = weights->at(h, j) * (dw[j] - dot) * inv;
          const double* krow = kv2.row(j) + c0;
          const double* qrow = qv2.v.data() + c0;
          double* gkrow = gk.row(j) + c0;
          for (int c = 0; c < dh; ++c) {
            gq.v[c0 + c] += dlogit * krow[c];
            gkrow[c] += dlogit * qrow[c];
          }
        }
      }
    };
  }
  return {id};
}

Var Tape::rel_gather(Var p, int clip, int t_keys) {
  const Mat& pv = nodes_[p.id].val;
  if (pv.cols != 2 * clip + 1) throw InvalidInput("rel_gather: bucket count");
  Mat out(pv.rows, t_keys);
  for (int i = 0; i < pv.rows; ++i)
    for (int j = 0; j < t_keys; ++j)
      out.at(i, j) = pv.at(i, relative_position_bucket(i, j, clip));
  bool ng = nodes_[p.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, p, clip, id]() {
      const Mat& g = nodes_[id].grad;
      ensure_grad(p.id);
      Mat& pg = nodes_[p.id].grad;
      for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j)
          pg.at(i, relative_position_bucket(i, j, clip)) += g.at(i, j);
    };
  }
  return {id};
}

Var Tape::rel_scatter(Var a, int clip) {
  const Mat& av = nodes_[a.id].val;
  Mat out(av.rows, 2 * clip + 1);
  for (int i = 0; i < av.rows; ++i)
    for (int j = 0; j < av.cols; ++j)
      out.at(i, relative_position_bucket(i, j, clip)) += av.at(i, j);
  bool ng = nodes_[a.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    int t_keys = av.cols;
    nodes_[id].back = [this, a, clip, t_keys, id]() {
      const Mat& g = nodes_[id].grad;
      ensure_grad(a.id);
      Mat& ag = nodes_[a.id].grad;
      for (int i = 0; i < ag.rows; ++i)
        for (int j = 0; j < t_keys; ++j)
          ag.at(i, j) += g.at(i, relative_position_bucket(i, j, clip));
    };
  }
  return {id};
}

Var Tape::gru_gates(Var xp, Var hp, Var h_prev) {
  const Mat& xpv = nodes_[xp.id].val;
  const Mat& hpv = nodes_[hp.id].val;
  const Mat& hv = nodes_[h_prev.id].val;
  const int h = hv.cols;
  if (xpv.rows != 1 || hpv.rows != 1 || hv.rows != 1 || xpv.cols != 3 * h ||
      hpv.cols != 3 * h)
    throw InvalidInput("gru_gates: shape mismatch");
  // Gates saved for the backward pass.
  auto gates = std::make_shared<Mat>(3, h);  // rows: r, z, n
  Mat out(1, h);
  for (int u = 0; u < h; ++u) {
    double r = 1.0 / (1.0 + std::exp(-(xpv.v[u] + hpv.v[u])));
    double z = 1.0 / (1.0 + std::exp(-(xpv.v[h + u] + hpv.v[h + u])));
    double n = std::tanh(xpv.v[2 * h + u] + r * hpv.v[2 * h + u]);
    gates->at(0, u) = r;
    gates->at(1, u) = z;
    gates->at(2, u) = n;
    out.v[u] = (1.0 - z) * n + z * hv.v[u];
  }
  bool ng = any_grad({xp, hp, h_prev});
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, xp, hp, h_prev, gates, h, id]() {
      const Mat& g = nodes_[id].grad;
      const Mat& hpv2 = nodes_[hp.id].val;
      const Mat& hv2 = nodes_[h_prev.id].val;
      ensure_grad(xp.id);
      ensure_grad(hp.id);
      ensure_grad(h_prev.id);
      Mat& gxp = nodes_[xp.id].grad;
      Mat& ghp = nodes_[hp.id].grad;
      Mat& gh = nodes_[h_prev.id].grad;
      for (int u = 0; u < h; ++u) {
        const double r = gates->at(0, u);
        const double z = gates->at(1, u);
        const double n = gates->at(2, u);
        const double dh = g.v[u];
        const double dz = dh * (hv2.v[u] - n);
        const double dn = dh * (1.0 - z);
        gh.v[u] += dh * z;
        const double dn_pre = dn * (1.0 - n * n);
        gxp.v[2 * h + u] += dn_pre;
        ghp.v[2 * h + u] += dn_pre * r;
        const double dr = dn_pre * hpv2.v[2 * h + u];
        const double dr_pre = dr * r * (1.0 - r);
        gxp.v[u] += dr_pre;
        ghp.v[u] += dr_pre;
        const double dz_pre = dz * z * (1.0 - z);
        gxp.v[h + u] += dz_pre;
        ghp.v[h + u] += dz_pre;
      }
    };
  }
  return {id};
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Mat& xv = nodes_[x.id].val;
  const Mat& gv = nodes_[gamma.id].val;
  const Mat& bv = nodes_[beta.id].val;
  if (gv.cols != xv.cols || bv.cols != xv.cols)
    throw InvalidInput("layer_norm: dim mismatch");
  const int d = xv.cols;
  Mat out(xv.rows, d);
  std::vector<double> means(xv.rows), istds(xv.rows);
  for (int r = 0; r < xv.rows; ++r) {
    double m = 0.0;
    for (int c = 0; c < d; ++c) m += xv.at(r, c);
    m /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) {
      double dd = xv.at(r, c) - m;
      var += dd * dd;
    }
    var /= d;
    double istd = 1.0 / std::sqrt(var + eps);
    means[r] = m;
    istds[r] = istd;
    for (int c = 0; c < d; ++c)
      out.at(r, c) = (xv.at(r, c) - m) * istd * gv.at(0, c) + bv.at(0, c);
  }
  bool ng = any_grad({x, gamma, beta});
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, x, gamma, beta, means, istds, id]() {
      const Mat& g = nodes_[id].grad;
      const Mat& xv2 = nodes_[x.id].val;
      const Mat& gv2 = nodes_[gamma.id].val;
      const int d2 = xv2.cols;
      for (int r = 0; r < xv2.rows; ++r) {
        // xhat = (x - mean) * istd
        if (nodes_[gamma.id].needs_grad) {
          ensure_grad(gamma.id);
          for (int c = 0; c < d2; ++c)
            nodes_[gamma.id].grad.at(0, c) +=
                g.at(r, c) * (xv2.at(r, c) - means[r]) * istds[r];
        }
        if (nodes_[beta.id].needs_grad) {
          ensure_grad(beta.id);
          for (int c = 0; c < d2; ++c)
            nodes_[beta.id].grad.at(0, c) += g.at(r, c);
        }
        if (nodes_[x.id].needs_grad) {
          ensure_grad(x.id);
          double sum_gy = 0.0, sum_gyx = 0.0;
          for (int c = 0; c < d2; ++c) {
            double gy = g.at(r, c) * gv2.at(0, c);
            double xh = (xv2.at(r, c) - means[r]) * istds[r];
            sum_gy += gy;
            sum_gyx += gy * xh;
          }
          for (int c = 0; c < d2; ++c) {
            double gy = g.at(r, c) * gv2.at(0, c);
            double xh = (xv2.at(r, c) - means[r]) * istds[r];
            nodes_[x.id].grad.at(r, c) +=
                istds[r] * (gy - sum_gy / d2 - xh * sum_gyx / d2);
          }
        }
      }
    };
  }
  return {id};
}

Var Tape::conv1d(Var x, Var w, Var b, int kernel, int stride) {
  const Mat& xv = nodes_[x.id].val;
  const Mat& wv = nodes_[w.id].val;
  const Mat& bv = nodes_[b.id].val;
  const int t = xv.rows, cin = xv.cols, cout = wv.cols;
  if (wv.rows != kernel * cin) throw InvalidInput("conv1d: weight shape");
  if (bv.cols != cout) throw InvalidInput("conv1d: bias shape");
  const int pad = (kernel - 1) / 2;
  const int t_out = (t + stride - 1) / stride;

  // im2col: the convolution becomes one GEMM over the unfolded input.
  auto unfold = std::make_shared<Mat>(t_out, kernel * cin);
  for (int o = 0; o < t_out; ++o) {
    double* urow = unfold->row(o);
    for (int k = 0; k < kernel; ++k) {
      int ti = o * stride + k - pad;
      if (ti < 0 || ti >= t) continue;
      const double* xrow = xv.row(ti);
      double* dst = urow + k * cin;
      for (int ci = 0; ci < cin; ++ci) dst[ci] = xrow[ci];
    }
  }
  Mat out(t_out, cout);
  for (int o = 0; o < t_out; ++o) {
    double* orow = out.row(o);
    for (int c = 0; c < cout; ++c) orow[c] = bv.at(0, c);
  }
  blas::mm_acc(*unfold, wv, &out);

  bool ng = any_grad({x, w, b});
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, x, w, b, kernel, stride, unfold, id]() {
      const Mat& g = nodes_[id].grad;
      const Mat& xv2 = nodes_[x.id].val;
      const Mat& wv2 = nodes_[w.id].val;
      const int t2 = xv2.rows, cin2 = xv2.cols, cout2 = wv2.cols;
      const int pad2 = (kernel - 1) / 2;
      if (nodes_[b.id].needs_grad) {
        ensure_grad(b.id);
        Mat& bg = nodes_[b.id].grad;
        for (int o = 0; o < g.rows; ++o)
          for (int c = 0; c < cout2; ++c) bg.at(0, c) += g.at(o, c);
      }
      if (nodes_[w.id].needs_grad) {
        ensure_grad(w.id);
        blas::mm_at_acc(*unfold, g, &nodes_[w.id].grad);
      }
      if (nodes_[x.id].needs_grad) {
        ensure_grad(x.id);
        Mat du(g.rows, kernel * cin2);
        blas::mm_bt_acc(g, wv2, &du);
        Mat& xg = nodes_[x.id].grad;
        for (int o = 0; o < g.rows; ++o) {
          const double* durow = du.row(o);
          for (int k = 0; k < kernel; ++k) {
            int ti = o * stride + k - pad2;
            if (ti < 0 || ti >= t2) continue;
            double* xgrow = xg.row(ti);
            const double* src = durow + k * cin2;
            for (int ci = 0; ci < cin2; ++ci) xgrow[ci] += src[ci];
          }
        }
      }
    };
  }
  return {id};
}

Var Tape::mean_all(Var a) {
  const Mat& av = nodes_[a.id].val;
  if (av.size() == 0) throw InvalidInput("mean_all: empty");
  double s = 0.0;
  for (double x : av.v) s += x;
  Mat out(1, 1);
  out.v[0] = s / static_cast<double>(av.size());
  bool ng = nodes_[a.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, id]() {
      double g = nodes_[id].grad.v[0] / nodes_[a.id].val.size();
      ensure_grad(a.id);
      for (double& x : nodes_[a.id].grad.v) x += g;
    };
  }
  return {id};
}

Var Tape::sum_all(Var a) {
  const Mat& av = nodes_[a.id].val;
  double s = 0.0;
  for (double x : av.v) s += x;
  Mat out(1, 1);
  out.v[0] = s;
  bool ng = nodes_[a.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, id]() {
      double g = nodes_[id].grad.v[0];
      ensure_grad(a.id);
      for (double& x : nodes_[a.id].grad.v) x += g;
    };
  }
  return {id};
}

Var Tape::mean_abs_diff(Var a, Var b) {
  CTXTTS_CHECK_SAME(a, b);
  const Mat& av = nodes_[a.id].val;
  const Mat& bv = nodes_[b.id].val;
  double s = 0.0;
  for (size_t i = 0; i < av.size(); ++i) s += std::abs(av.v[i] - bv.v[i]);
  Mat out(1, 1);
  out.v[0] = s / static_cast<double>(av.size());
  bool ng = any_grad({a, b});
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, a, b, id]() {
      const Mat& av2 = nodes_[a.id].val;
      const Mat& bv2 = nodes_[b.id].val;
      double g = nodes_[id].grad.v[0] / av2.size();
      for (size_t i = 0; i < av2.size(); ++i) {
        double d = av2.v[i] - bv2.v[i];
        double sg = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
        if (nodes_[a.id].needs_grad) {
          ensure_grad(a.id);
          nodes_[a.id].grad.v[i] += g * sg;
        }
        if (nodes_[b.id].needs_grad) {
          ensure_grad(b.id);
          nodes_[b.id].grad.v[i] -= g * sg;
        }
      }
    };
  }
  return {id};
}

Var Tape::masked_mae(Var pred, Var target,
                     const std::vector<double>& row_weight) {
  CTXTTS_CHECK_SAME(pred, target);
  const Mat& pv = nodes_[pred.id].val;
  const Mat& tv = nodes_[target.id].val;
  if (static_cast<int>(row_weight.size()) != pv.rows)
    throw InvalidInput("masked_mae: weight length");
  double wsum = 0.0, s = 0.0;
  for (int r = 0; r < pv.rows; ++r) {
    if (row_weight[r] == 0.0) continue;
    wsum += row_weight[r] * pv.cols;
    for (int c = 0; c < pv.cols; ++c)
      s += row_weight[r] * std::abs(pv.at(r, c) - tv.at(r, c));
  }
  Mat out(1, 1);
  out.v[0] = wsum > 0 ? s / wsum : 0.0;
  bool ng = any_grad({pred, target});
  int id = push(std::move(out), ng);
  if (ng && wsum > 0) {
    nodes_[id].back = [this, pred, target, row_weight, wsum, id]() {
      const Mat& pv2 = nodes_[pred.id].val;
      const Mat& tv2 = nodes_[target.id].val;
      double g = nodes_[id].grad.v[0] / wsum;
      for (int r = 0; r < pv2.rows; ++r) {
        if (row_weight[r] == 0.0) continue;
        for (int c = 0; c < pv2.cols; ++c) {
          double d = pv2.at(r, c) - tv2.at(r, c);
          double sg = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
          if (nodes_[pred.id].needs_grad) {
            ensure_grad(pred.id);
            nodes_[pred.id].grad.at(r, c) += g * row_weight[r] * sg;
          }
          if (nodes_[target.id].needs_grad) {
            ensure_grad(target.id);
            nodes_[target.id].grad.at(r, c) -= g * row_weight[r] * sg;
          }
        }
      }
    };
  }
  return {id};
}

Var Tape::masked_mse(Var pred, Var target,
                     const std::vector<double>& row_weight) {
  CTXTTS_CHECK_SAME(pred, target);
  const Mat& pv = nodes_[pred.id].val;
  const Mat& tv = nodes_[target.id].val;
  if (static_cast<int>(row_weight.size()) != pv.rows)
    throw InvalidInput("masked_mse: weight length");
  double wsum = 0.0, s = 0.0;
  for (int r = 0; r < pv.rows; ++r) {
    if (row_weight[r] == 0.0) continue;
    wsum += row_weight[r] * pv.cols;
    for (int c = 0; c < pv.cols; ++c) {
      double d = pv.at(r, c) - tv.at(r, c);
      s += row_weight[r] * d * d;
    }
  }
  Mat out(1, 1);
  out.v[0] = wsum > 0 ? s / wsum : 0.0;
  bool ng = any_grad({pred, target});
  int id = push(std::move(out), ng);
  if (ng && wsum > 0) {
    nodes_[id].back = [this, pred, target, row_weight, wsum, id]() {
      const Mat& pv2 = nodes_[pred.id].val;
      const Mat& tv2 = nodes_[target.id].val;
      double g = nodes_[id].grad.v[0] / wsum;
      for (int r = 0; r < pv2.rows; ++r) {
        if (row_weight[r] == 0.0) continue;
        for (int c = 0; c < pv2.cols; ++c) {
          double d = pv2.at(r, c) - tv2.at(r, c);
          if (nodes_[pred.id].needs_grad) {
            ensure_grad(pred.id);
            nodes_[pred.id].grad.at(r, c) += g * row_weight[r] * 2.0 * d;
          }
          if (nodes_[target.id].needs_grad) {
            ensure_grad(target.id);
            nodes_[target.id].grad.at(r, c) -= g * row_weight[r] * 2.0 * d;
          }
        }
      }
    };
  }
  return {id};
}

Var Tape::softmax_xent(Var logits, const std::vector<int>& labels) {
  const Mat& lv = nodes_[logits.id].val;
  if (static_cast<int>(labels.size()) != lv.rows)
    throw InvalidInput("softmax_xent: label count");
  Mat probs(lv.rows, lv.cols);
  double loss = 0.0;
  for (int r = 0; r < lv.rows; ++r) {
    if (labels[r] < 0 || labels[r] >= lv.cols)
      throw InvalidInput("softmax_xent: label range");
    double mx = lv.at(r, 0);
    for (int c = 1; c < lv.cols; ++c) mx = std::max(mx, lv.at(r, c));
    double z = 0.0;
    for (int c = 0; c < lv.cols; ++c) {
      probs.at(r, c) = std::exp(lv.at(r, c) - mx);
      z += probs.at(r, c);
    }
    for (int c = 0; c < lv.cols; ++c) probs.at(r, c) /= z;
    loss -= std::log(std::max(probs.at(r, labels[r]), 1e-300));
  }
  Mat out(1, 1);
  out.v[0] = loss / lv.rows;
  bool ng = nodes_[logits.id].needs_grad;
  int id = push(std::move(out), ng);
  if (ng) {
    nodes_[id].back = [this, logits, labels, probs, id]() {
      double g = nodes_[id].grad.v[0] / probs.rows;
      ensure_grad(logits.id);
      Mat& lg = nodes_[logits.id].grad;
      for (int r = 0; r < probs.rows; ++r)
        for (int c = 0; c < probs.cols; ++c)
          lg.at(r, c) +=
              g * (probs.at(r, c) - (c == labels[r] ? 1.0 : 0.0));
    };
  }
  return {id};
}

double Tape::scalar(Var x) const {
  const Mat& m = nodes_[x.id].val;
  if (m.size() != 1) throw InvalidInput("scalar: not a 1x1 node");
  return m.v[0];
}

void Tape::backward(Var loss, bool accumulate_into_params) {
  Node& ln = nodes_[loss.id];
  if (ln.val.size() != 1) throw InvalidInput("backward: loss must be scalar");
  if (!ln.needs_grad) return;
  ensure_grad(loss.id);
  ln.grad.v[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    // Nodes with no received gradient (empty buffer) are off the loss path.
    if (nodes_[i].back && nodes_[i].needs_grad && !nodes_[i].grad.v.empty())
      nodes_[i].back();
  }
  if (!accumulate_into_params) return;
  for (auto& [p, id] : bound_params_) {
    if (!p->trainable) continue;
    if (p->grad.v.empty()) p->grad = Mat(p->value.rows, p->value.cols);
    const Mat& g = nodes_[id].grad;
    for (size_t i = 0; i < g.size(); ++i) p->grad.v[i] += g.v[i];
  }
}

#undef CTXTTS_CHECK_SAME

}  // namespace ctxtts
