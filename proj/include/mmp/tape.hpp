/* Copyright 2026 The mmpred Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Tape owns the values produced during one forward evaluation. Operations
// are free functions over Var handles; each records the closure needed to
// replay its backward step, in execution order, so Tape::backward walks the
// record in reverse. Leaves can reference external storage (parameters) via
// integer tags; gradients for tagged leaves are collected after backward.

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <utility>
#include <vector>

#include "mmp/common.hpp"

namespace mmp {

template <class S>
class Tape;

// Lightweight handle into a Tape. Copyable, trivially cheap.
template <class S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat<S>& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // Scalar convenience for 1x1 vars.
  S scalar() const { return value()(0, 0); }
};

// Column validity mask for attention; element i applies to key/row i of the
// attended sequence. Empty mask means "all valid".
using AttnMask = std::vector<std::uint8_t>;

template <class S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf holding its own value. Rejects non-finite input.
  Var<S> input(Mat<S> value, bool requires_grad = false) {
    if (!value.allFinite()) {
      throw ValueError("tape input contains NaN/Inf");
    }
    Slot s;
    s.storage = std::move(value);
    s.external = nullptr;
    s.requires_grad = requires_grad;
    slots_.push_back(std::move(s));
    return {this, static_cast<int>(slots_.size()) - 1};
  }

  // Leaf referencing external storage (a parameter). The pointed-to matrix
  // must outlive the tape. Gradients are retrievable per tag after backward.
  // Tapes with gradients disabled treat these leaves as constants, so no
  // backward closures are recorded anywhere downstream.
  Var<S> leaf_external(const Mat<S>* value, int tag) {
    Slot s;
    s.external = value;
    s.requires_grad = grad_enabled_;
    slots_.push_back(std::move(s));
    const int id = static_cast<int>(slots_.size()) - 1;
    tagged_.push_back({id, tag});
    return {this, id};
  }

  void set_grad_enabled(bool on) { grad_enabled_ = on; }

  const Mat<S>& value(int id) const {
    const Slot& s = slots_[id];
    return s.external ? *s.external : s.storage;
  }

  bool requires_grad(int id) const { return slots_[id].requires_grad; }

  // Allocates the result slot of an op.
  Var<S> result(Mat<S> value, bool requires_grad) {
    if (check_values_ && !value.allFinite()) {
      throw ValueError("op produced NaN/Inf");
    }
    Slot s;
    s.storage = std::move(value);
    s.requires_grad = requires_grad;
    slots_.push_back(std::move(s));
    return {this, static_cast<int>(slots_.size()) - 1};
  }

  void record(std::function<void(Tape&)> backward) {
    nodes_.push_back(std::move(backward));
  }

  // Gradient of a slot, or nullptr if nothing has flowed into it.
  const Mat<S>* grad_of(int id) const {
    const Slot& s = slots_[id];
    return s.grad.size() > 0 ? &s.grad : nullptr;
  }

  template <class Expr>
  void accum(int id, const Expr& e) {
    Slot& s = slots_[id];
    if (!s.requires_grad) return;
    if (s.grad.size() == 0) {
      const Mat<S>& v = value(id);
      s.grad = Mat<S>::Zero(v.rows(), v.cols());
    }
    s.grad += e;
  }

  // Runs the backward sweep from a scalar output. Gradients of leaves that
  // the output does not depend on stay zero.
  void backward(const Var<S>& output) {
    if (!output.valid() || output.tape != this) {
      throw ContractError("backward: output is not on this tape");
    }
    if (value(output.id).size() != 1) {
      throw ContractError("backward: output must be scalar");
    }
    for (Slot& s : slots_) s.grad.resize(0, 0);
    slots_[output.id].requires_grad = true;
    accum(output.id, Mat<S>::Ones(1, 1));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      (*it)(*this);
    }
  }

  // Gradient of a var; zero matrix when nothing flowed into it.
  Mat<S> gradient(const Var<S>& v) const {
    const Mat<S>* g = grad_of(v.id);
    if (g) return *g;
    const Mat<S>& val = value(v.id);
    return Mat<S>::Zero(val.rows(), val.cols());
  }

  // Visits (tag, grad) for every tagged leaf that received gradient.
  template <class Fn>
  void for_each_tagged_grad(Fn&& fn) const {
    for (const auto& [id, tag] : tagged_) {
      const Mat<S>* g = grad_of(id);
      if (g) fn(tag, *g);
    }
  }

  void set_check_values(bool on) { check_values_ = on; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Slot {
    Mat<S> storage;
    const Mat<S>* external = nullptr;
    Mat<S> grad;
    bool requires_grad = false;
  };
  std::vector<Slot> slots_;
  std::vector<std::function<void(Tape&)>> nodes_;
  std::vector<std::pair<int, int>> tagged_;
  bool check_values_ = false;
  bool grad_enabled_ = true;
};

template <class S>
const Mat<S>& Var<S>::value() const {
  return tape->value(id);
}

namespace detail {

template <class S>
Tape<S>& same_tape(const Var<S>& a, const Var<S>& b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw ContractError("operands live on different tapes");
  }
  return *a.tape;
}

template <class S>
void require_same_shape(const Var<S>& a, const Var<S>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch (" +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and scalar ops
// ---------------------------------------------------------------------------

template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  Tape<S>& t = detail::same_tape(a, b);
  detail::require_same_shape(a, b, "add");
  const bool rg = t.requires_grad(a.id) || t.requires_grad(b.id);
  Var<S> out = t.result(a.value() + b.value(), rg);
  if (rg) {
    t.record([a = a.id, b = b.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      t.accum(a, *g);
      t.accum(b, *g);
    });
  }
  return out;
}

template <class S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  Tape<S>& t = detail::same_tape(a, b);
  detail::require_same_shape(a, b, "sub");
  const bool rg = t.requires_grad(a.id) || t.requires_grad(b.id);
  Var<S> out = t.result(a.value() - b.value(), rg);
  if (rg) {
    t.record([a = a.id, b = b.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      t.accum(a, *g);
      t.accum(b, -*g);
    });
  }
  return out;
}

template <class S>
Var<S> neg(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  const bool rg = t.requires_grad(a.id);
  Var<S> out = t.result(-a.value(), rg);
  if (rg) {
    t.record([a = a.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (g) t.accum(a, -*g);
    });
  }
  return out;
}

// Elementwise product.
template <class S>
Var<S> cmul(const Var<S>& a, const Var<S>& b) {
  Tape<S>& t = detail::same_tape(a, b);
  detail::require_same_shape(a, b, "cmul");
  const bool rg = t.requires_grad(a.id) || t.requires_grad(b.id);
  Var<S> out = t.result(a.value().cwiseProduct(b.value()), rg);
  if (rg) {
    t.record([a = a.id, b = b.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      t.accum(a, g->cwiseProduct(t.value(b)));
      t.accum(b, g->cwiseProduct(t.value(a)));
    });
  }
  return out;
}

template <class S>
Var<S> scale(const Var<S>& a, S c) {
  Tape<S>& t = *a.tape;
  const bool rg = t.requires_grad(a.id);
  Var<S> out = t.result(a.value() * c, rg);
  if (rg) {
    t.record([a = a.id, o = out.id, c](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (g) t.accum(a, *g * c);
    });
  }
  return out;
}

template <class S>
Var<S> add_scalar(const Var<S>& a, S c) {
  Tape<S>& t = *a.tape;
  const bool rg = t.requires_grad(a.id);
  Var<S> out = t.result(a.value().array() + c, rg);
  if (rg) {
    t.record([a = a.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (g) t.accum(a, *g);
    });
  }
  return out;
}

template <class S>
Var<S> relu(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  const bool rg = t.requires_grad(a.id);
  Var<S> out = t.result(a.value().cwiseMax(S(0)), rg);
  if (rg) {
    t.record([a = a.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      const Mat<S>& x = t.value(a);
      t.accum(a, g->cwiseProduct(
                     (x.array() > S(0)).template cast<S>().matrix()));
    });
  }
  return out;
}

template <class S>
Var<S> exp_op(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  const bool rg = t.requires_grad(a.id);
  Var<S> out = t.result(a.value().array().exp().matrix(), rg);
  if (rg) {
    t.record([a = a.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (g) t.accum(a, g->cwiseProduct(t.value(o)));
    });
  }
  return out;
}

// log(max(x, eps)); gradient is zero on the clamped region.
template <class S>
Var<S> log_guarded(const Var<S>& a, S eps = S(1e-12)) {
  Tape<S>& t = *a.tape;
  const bool rg = t.requires_grad(a.id);
  Var<S> out = t.result(a.value().cwiseMax(eps).array().log().matrix(), rg);
  if (rg) {
    t.record([a = a.id, o = out.id, eps](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      const Mat<S>& x = t.value(a);
      Mat<S> gx = g->cwiseQuotient(x.cwiseMax(eps));
      gx = (x.array() > eps).select(gx, Mat<S>::Zero(x.rows(), x.cols()));
      t.accum(a, gx);
    });
  }
  return out;
}

// sqrt(max(x, eps)); gradient is zero on the clamped region.
template <class S>
Var<S> sqrt_guarded(const Var<S>& a, S eps = S(1e-12)) {
  Tape<S>& t = *a.tape;
  const bool rg = t.requires_grad(a.id);
  Var<S> out = t.result(a.value().cwiseMax(eps).array().sqrt().matrix(), rg);
  if (rg) {
    t.record([a = a.id, o = out.id, eps](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      const Mat<S>& x = t.value(a);
      const Mat<S>& y = t.value(o);
      Mat<S> gx = g->cwiseQuotient(S(2) * y);
      gx = (x.array() > eps).select(gx, Mat<S>::Zero(x.rows(), x.cols()));
      t.accum(a, gx);
    });
  }
  return out;
}

template <class S>
Var<S> square(const Var<S>& a) {
  return cmul(a, a);
}

// Elementwise Huber penalty of a residual.
template <class S>
Var<S> huber_cwise(const Var<S>& a, S delta) {
  Tape<S>& t = *a.tape;
  const bool rg = t.requires_grad(a.id);
  const auto& x = a.value().array();
  Mat<S> y = (x.abs() <= delta)
                 .select(S(0.5) * x.square(), delta * (x.abs() - S(0.5) * delta))
                 .matrix();
  Var<S> out = t.result(std::move(y), rg);
  if (rg) {
    t.record([a = a.id, o = out.id, delta](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      const Mat<S>& x = t.value(a);
      t.accum(a, g->cwiseProduct(x.cwiseMax(-delta).cwiseMin(delta)));
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <class S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  Tape<S>& t = detail::same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree (" +
                     std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + ")");
  }
  const bool rg = t.requires_grad(a.id) || t.requires_grad(b.id);
  Var<S> out = t.result(a.value() * b.value(), rg);
  if (rg) {
    t.record([a = a.id, b = b.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      t.accum(a, *g * t.value(b).transpose());
      t.accum(b, t.value(a).transpose() * *g);
    });
  }
  return out;
}

template <class S>
Var<S> transpose(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  const bool rg = t.requires_grad(a.id);
  Var<S> out = t.result(a.value().transpose(), rg);
  if (rg) {
    t.record([a = a.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (g) t.accum(a, g->transpose());
    });
  }
  return out;
}

// Adds a 1xN row vector to every row of an MxN matrix.
template <class S>
Var<S> rowwise_add(const Var<S>& x, const Var<S>& row) {
  Tape<S>& t = detail::same_tape(x, row);
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw ShapeError("rowwise_add: row must be 1x" + std::to_string(x.cols()));
  }
  const bool rg = t.requires_grad(x.id) || t.requires_grad(row.id);
  Mat<S> y = x.value();
  y.rowwise() += Eigen::RowVector<S, Eigen::Dynamic>(row.value().row(0));
  Var<S> out = t.result(std::move(y), rg);
  if (rg) {
    t.record([x = x.id, r = row.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      t.accum(x, *g);
      t.accum(r, g->colwise().sum());
    });
  }
  return out;
}

// x * W + b with b broadcast over rows. b may be invalid() to skip the bias.
template <class S>
Var<S> linear(const Var<S>& x, const Var<S>& weight, const Var<S>& bias) {
  Var<S> y = matmul(x, weight);
  if (bias.valid()) y = rowwise_add(y, bias);
  return y;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <class S>
Var<S> block(const Var<S>& x, Eigen::Index r0, Eigen::Index c0,
             Eigen::Index nr, Eigen::Index nc) {
  Tape<S>& t = *x.tape;
  if (r0 < 0 || c0 < 0 || nr < 0 || nc < 0 || r0 + nr > x.rows() ||
      c0 + nc > x.cols()) {
    throw ShapeError("block: out of range");
  }
  const bool rg = t.requires_grad(x.id);
  Var<S> out = t.result(x.value().block(r0, c0, nr, nc), rg);
  if (rg) {
    t.record([x = x.id, o = out.id, r0, c0, nr, nc](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      const Mat<S>& v = t.value(x);
      Mat<S> gx = Mat<S>::Zero(v.rows(), v.cols());
      gx.block(r0, c0, nr, nc) = *g;
      t.accum(x, gx);
    });
  }
  return out;
}

template <class S>
Var<S> slice_rows(const Var<S>& x, Eigen::Index r0, Eigen::Index nr) {
  return block(x, r0, 0, nr, x.cols());
}

template <class S>
Var<S> slice_cols(const Var<S>& x, Eigen::Index c0, Eigen::Index nc) {
  return block(x, 0, c0, x.rows(), nc);
}

template <class S>
Var<S> gather_rows(const Var<S>& x, std::vector<Eigen::Index> idx) {
  Tape<S>& t = *x.tape;
  for (Eigen::Index i : idx) {
    if (i < 0 || i >= x.rows()) throw ShapeError("gather_rows: index out of range");
  }
  const bool rg = t.requires_grad(x.id);
  Mat<S> y(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t j = 0; j < idx.size(); ++j) y.row(j) = x.value().row(idx[j]);
  Var<S> out = t.result(std::move(y), rg);
  if (rg) {
    t.record([x = x.id, o = out.id, idx = std::move(idx)](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      const Mat<S>& v = t.value(x);
      Mat<S> gx = Mat<S>::Zero(v.rows(), v.cols());
      for (std::size_t j = 0; j < idx.size(); ++j) gx.row(idx[j]) += g->row(j);
      t.accum(x, gx);
    });
  }
  return out;
}

template <class S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Tape<S>& t = *parts[0].tape;
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  bool rg = false;
  for (const Var<S>& p : parts) {
    if (p.tape != &t) throw ContractError("concat_rows: mixed tapes");
    if (p.cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += p.rows();
    rg = rg || t.requires_grad(p.id);
  }
  Mat<S> y(rows, cols);
  Eigen::Index r = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets, sizes;
  for (const Var<S>& p : parts) {
    y.middleRows(r, p.rows()) = p.value();
    ids.push_back(p.id);
    offsets.push_back(r);
    sizes.push_back(p.rows());
    r += p.rows();
  }
  Var<S> out = t.result(std::move(y), rg);
  if (rg) {
    t.record([ids = std::move(ids), offsets = std::move(offsets),
              sizes = std::move(sizes), o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      for (std::size_t j = 0; j < ids.size(); ++j) {
        t.accum(ids[j], g->middleRows(offsets[j], sizes[j]));
      }
    });
  }
  return out;
}

template <class S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  Tape<S>& t = *parts[0].tape;
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  bool rg = false;
  for (const Var<S>& p : parts) {
    if (p.tape != &t) throw ContractError("concat_cols: mixed tapes");
    if (p.rows() != rows) throw ShapeError("concat_cols: row mismatch");
    cols += p.cols();
    rg = rg || t.requires_grad(p.id);
  }
  Mat<S> y(rows, cols);
  Eigen::Index c = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets, sizes;
  for (const Var<S>& p : parts) {
    y.middleCols(c, p.cols()) = p.value();
    ids.push_back(p.id);
    offsets.push_back(c);
    sizes.push_back(p.cols());
    c += p.cols();
  }
  Var<S> out = t.result(std::move(y), rg);
  if (rg) {
    t.record([ids = std::move(ids), offsets = std::move(offsets),
              sizes = std::move(sizes), o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      for (std::size_t j = 0; j < ids.size(); ++j) {
        t.accum(ids[j], g->middleCols(offsets[j], sizes[j]));
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <class S>
Var<S> sum_all(const Var<S>& x) {
  Tape<S>& t = *x.tape;
  const bool rg = t.requires_grad(x.id);
  Mat<S> y(1, 1);
  y(0, 0) = x.value().sum();
  Var<S> out = t.result(std::move(y), rg);
  if (rg) {
    t.record([x = x.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      const Mat<S>& v = t.value(x);
      t.accum(x, Mat<S>::Constant(v.rows(), v.cols(), (*g)(0, 0)));
    });
  }
  return out;
}

template <class S>
Var<S> mean_all(const Var<S>& x) {
  const S n = static_cast<S>(x.value().size());
  return scale(sum_all(x), S(1) / n);
}

// MxN -> 1xN column means.
template <class S>
Var<S> mean_rows(const Var<S>& x) {
  Tape<S>& t = *x.tape;
  const bool rg = t.requires_grad(x.id);
  Var<S> out = t.result(x.value().colwise().mean(), rg);
  if (rg) {
    t.record([x = x.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      const Mat<S>& v = t.value(x);
      const S inv = S(1) / static_cast<S>(v.rows());
      t.accum(x, (Mat<S>::Ones(v.rows(), 1) * *g) * inv);
    });
  }
  return out;
}

// MxN -> Mx1 row sums.
template <class S>
Var<S> rowwise_sum(const Var<S>& x) {
  Tape<S>& t = *x.tape;
  const bool rg = t.requires_grad(x.id);
  Var<S> out = t.result(x.value().rowwise().sum(), rg);
  if (rg) {
    t.record([x = x.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      const Mat<S>& v = t.value(x);
      t.accum(x, *g * Mat<S>::Ones(1, v.cols()));
    });
  }
  return out;
}

// MxN -> 1xN columnwise max; gradient flows to the first maximal row.
template <class S>
Var<S> colwise_max(const Var<S>& x) {
  Tape<S>& t = *x.tape;
  if (x.rows() == 0) throw ShapeError("colwise_max: empty input");
  const bool rg = t.requires_grad(x.id);
  const Mat<S>& v = x.value();
  Mat<S> y(1, v.cols());
  std::vector<Eigen::Index> argmax(v.cols());
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index r = 0;
    v.col(c).maxCoeff(&r);
    argmax[c] = r;
    y(0, c) = v(r, c);
  }
  Var<S> out = t.result(std::move(y), rg);
  if (rg) {
    t.record([x = x.id, o = out.id, argmax = std::move(argmax)](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      const Mat<S>& v = t.value(x);
      Mat<S> gx = Mat<S>::Zero(v.rows(), v.cols());
      for (Eigen::Index c = 0; c < v.cols(); ++c) gx(argmax[c], c) = (*g)(0, c);
      t.accum(x, gx);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Softmax family
// ---------------------------------------------------------------------------

namespace detail {

template <class S>
Mat<S> softmax_rows_value(const Mat<S>& x) {
  Mat<S> y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const S m = x.row(r).maxCoeff();
    Eigen::Array<S, 1, Eigen::Dynamic> e = (x.row(r).array() - m).exp();
    y.row(r) = (e / e.sum()).matrix();
  }
  return y;
}

// Shared backward for softmax stored in slot y: gx = y .* (g - rowsum(g .* y)).
template <class S>
void softmax_rows_backward(Tape<S>& t, int x, int y_id, const Mat<S>& g) {
  const Mat<S>& y = t.value(y_id);
  Mat<S> gx(y.rows(), y.cols());
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const S dot = g.row(r).dot(y.row(r));
    gx.row(r) = y.row(r).cwiseProduct(g.row(r).array().matrix() -
                                      Mat<S>::Constant(1, y.cols(), dot));
  }
  t.accum(x, gx);
}

}  // namespace detail

// Softmax along the given axis: axis=1 normalizes each row (default),
// axis=0 each column. Rejects non-finite input.
template <class S>
Var<S> softmax(const Var<S>& x, int axis = 1) {
  Tape<S>& t = *x.tape;
  if (!x.value().allFinite()) throw ValueError("softmax: non-finite input");
  if (axis != 0 && axis != 1) throw ContractError("softmax: axis must be 0 or 1");
  const bool rg = t.requires_grad(x.id);
  Mat<S> y = axis == 1
                 ? detail::softmax_rows_value<S>(x.value())
                 : Mat<S>(detail::softmax_rows_value<S>(x.value().transpose())
                              .transpose());
  Var<S> out = t.result(std::move(y), rg);
  if (rg) {
    t.record([x = x.id, o = out.id, axis](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      if (axis == 1) {
        detail::softmax_rows_backward(t, x, o, *g);
      } else {
        const Mat<S>& y = t.value(o);
        Mat<S> gx(y.rows(), y.cols());
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
          const S dot = g->col(c).dot(y.col(c));
          gx.col(c) = y.col(c).cwiseProduct(
              g->col(c) - Mat<S>::Constant(y.rows(), 1, dot));
        }
        t.accum(x, gx);
      }
    });
  }
  return out;
}

// Row softmax in log space; numerically safe for building KL terms.
template <class S>
Var<S> log_softmax_rows(const Var<S>& x) {
  Tape<S>& t = *x.tape;
  if (!x.value().allFinite()) throw ValueError("log_softmax: non-finite input");
  const bool rg = t.requires_grad(x.id);
  const Mat<S>& v = x.value();
  Mat<S> y(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const S m = v.row(r).maxCoeff();
    const S lse = m + std::log((v.row(r).array() - m).exp().sum());
    y.row(r) = v.row(r).array() - lse;
  }
  Var<S> out = t.result(std::move(y), rg);
  if (rg) {
    t.record([x = x.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      const Mat<S>& y = t.value(o);
      Mat<S> gx(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const S gsum = g->row(r).sum();
        gx.row(r) = g->row(r) - y.row(r).array().exp().matrix() * gsum;
      }
      t.accum(x, gx);
    });
  }
  return out;
}

// Row softmax with a column validity mask: masked columns get exactly zero
// weight. Throws DegenerateMaskError when every column is masked.
template <class S>
Var<S> masked_softmax_rows(const Var<S>& x, const AttnMask& mask) {
  Tape<S>& t = *x.tape;
  if (mask.empty()) return softmax(x, 1);
  if (static_cast<Eigen::Index>(mask.size()) != x.cols()) {
    throw ShapeError("masked_softmax_rows: mask length must equal columns");
  }
  bool any_valid = false;
  for (std::uint8_t m : mask) any_valid = any_valid || (m != 0);
  if (!any_valid) {
    throw DegenerateMaskError("masked_softmax_rows: all positions masked");
  }
  if (!x.value().allFinite()) throw ValueError("masked_softmax: non-finite input");
  const bool rg = t.requires_grad(x.id);
  const Mat<S>& v = x.value();
  Mat<S> y = Mat<S>::Zero(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    S m = -std::numeric_limits<S>::infinity();
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      if (mask[c]) m = std::max(m, v(r, c));
    }
    S denom = S(0);
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      if (mask[c]) denom += std::exp(v(r, c) - m);
    }
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      if (mask[c]) y(r, c) = std::exp(v(r, c) - m) / denom;
    }
  }
  Var<S> out = t.result(std::move(y), rg);
  if (rg) {
    // Masked entries of y are zero, so the plain softmax backward already
    // sends them zero gradient.
    t.record([x = x.id, o = out.id](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (g) detail::softmax_rows_backward(t, x, o, *g);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layer normalization (per row)
// ---------------------------------------------------------------------------

template <class S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gain, const Var<S>& offset,
                  S eps = S(1e-5)) {
  Tape<S>& t = *x.tape;
  if (gain.rows() != 1 || gain.cols() != x.cols() || offset.rows() != 1 ||
      offset.cols() != x.cols()) {
    throw ShapeError("layer_norm: gain/offset must be 1x" +
                     std::to_string(x.cols()));
  }
  const bool rg = t.requires_grad(x.id) || t.requires_grad(gain.id) ||
                  t.requires_grad(offset.id);
  const Mat<S>& v = x.value();
  const Eigen::Index n = v.cols();
  Mat<S> xhat(v.rows(), n);
  Mat<S> inv_std(v.rows(), 1);
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const S mu = v.row(r).mean();
    const S var = (v.row(r).array() - mu).square().sum() / static_cast<S>(n);
    const S is = S(1) / std::sqrt(var + eps);
    inv_std(r, 0) = is;
    xhat.row(r) = (v.row(r).array() - mu) * is;
  }
  Mat<S> y = xhat;
  y.array().rowwise() *= gain.value().row(0).array();
  y.rowwise() += Eigen::RowVector<S, Eigen::Dynamic>(offset.value().row(0));
  // Store xhat and inv_std as captured values for the backward pass.
  Var<S> out = t.result(std::move(y), rg);
  if (rg) {
    t.record([x = x.id, ga = gain.id, of = offset.id, o = out.id,
              xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<S>& t) {
      const Mat<S>* g = t.grad_of(o);
      if (!g) return;
      const Mat<S>& gainv = t.value(ga);
      const Eigen::Index n = xhat.cols();
      Mat<S> gx(xhat.rows(), n);
      for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
        // d = dL/dxhat for this row.
        Eigen::Array<S, 1, Eigen::Dynamic> d =
            g->row(r).array() * gainv.row(0).array();
        const S dsum = d.sum();
        const S dxhat_dot = (d * xhat.row(r).array()).sum();
        gx.row(r) = (inv_std(r, 0) / static_cast<S>(n)) *
                    (static_cast<S>(n) * d - dsum -
                     xhat.row(r).array() * dxhat_dot)
                        .matrix();
      }
      t.accum(x, gx);
      t.accum(ga, (g->array() * xhat.array()).colwise().sum().matrix());
      t.accum(of, g->colwise().sum());
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

// Projection weights for one multi-head attention block, as tape vars.
template <class S>
struct AttentionVars {
  Var<S> wq, bq, wk, bk, wv, bv, wo, bo;
};

// Scaled dot-product multi-head attention with input/output projections.
// queries: Nq x D, keys/values: Nk x D. The mask marks valid key rows.
// Positional encodings, when used, are added to queries/keys by the caller.
template <class S>
Var<S> multi_head_attention(const Var<S>& queries, const Var<S>& keys,
                            const Var<S>& values, const AttentionVars<S>& w,
                            int heads, const AttnMask& mask = {}) {
  if (queries.cols() != keys.cols() || queries.cols() != values.cols()) {
    throw ShapeError("attention: query/key/value feature dims disagree");
  }
  if (keys.rows() != values.rows()) {
    throw ShapeError("attention: key/value sequence lengths disagree");
  }
  const Eigen::Index d = queries.cols();
  if (heads <= 0 || d % heads != 0) {
    throw ShapeError("attention: feature dim must be divisible by heads");
  }
  const Eigen::Index dh = d / heads;
  const S inv_sqrt_dh = S(1) / std::sqrt(static_cast<S>(dh));

  Var<S> q = linear(queries, w.wq, w.bq);
  Var<S> k = linear(keys, w.wk, w.bk);
  Var<S> v = linear(values, w.wv, w.bv);

  std::vector<Var<S>> ctx;
  ctx.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Var<S> qh = slice_cols(q, h * dh, dh);
    Var<S> kh = slice_cols(k, h * dh, dh);
    Var<S> vh = slice_cols(v, h * dh, dh);
    Var<S> scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
    Var<S> weights = masked_softmax_rows(scores, mask);
    ctx.push_back(matmul(weights, vh));
  }
  Var<S> merged = heads == 1 ? ctx[0] : concat_cols(ctx);
  return linear(merged, w.wo, w.bo);
}

// ---------------------------------------------------------------------------
// compute_gradients: convenience wrapper matching the training contract.
// ---------------------------------------------------------------------------

// Runs backward from a scalar and returns gradients for the requested vars;
// vars the output does not depend on get zero gradients.
template <class S>
std::vector<Mat<S>> compute_gradients(Tape<S>& tape, const Var<S>& scalar_output,
                                      const std::vector<Var<S>>& wrt) {
  tape.backward(scalar_output);
  std::vector<Mat<S>> grads;
  grads.reserve(wrt.size());
  for (const Var<S>& v : wrt) grads.push_back(tape.gradient(v));
  return grads;
}

}  // namespace mmp
