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

// Parameter storage and reusable network blocks built on the tape.
//
// A ParamStore owns named tensors and their gradient accumulators. Blocks
// register parameters at construction time and replay their forward pass on
// a Binding, which lazily exposes each parameter as a tape leaf exactly once
// per tape.

#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mmp/common.hpp"
#include "mmp/tape.hpp"

namespace mmp {

template <class S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
};

template <class S>
class ParamStore {
 public:
  int add(std::string name, Mat<S> value) {
    if (index_.count(name)) {
      throw ConfigError("duplicate parameter name: " + name);
    }
    const int idx = static_cast<int>(params_.size());
    Param<S> p;
    p.name = std::move(name);
    p.grad = Mat<S>::Zero(value.rows(), value.cols());
    p.value = std::move(value);
    index_[p.name] = idx;
    params_.push_back(std::move(p));
    return idx;
  }

  int add_xavier(std::string name, Eigen::Index rows, Eigen::Index cols,
                 Rng& rng) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(rows + cols));
    Mat<S> w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        w(r, c) = static_cast<S>(rng.uniform(-limit, limit));
      }
    }
    return add(std::move(name), std::move(w));
  }

  int add_zeros(std::string name, Eigen::Index rows, Eigen::Index cols) {
    return add(std::move(name), Mat<S>::Zero(rows, cols));
  }

  int add_ones(std::string name, Eigen::Index rows, Eigen::Index cols) {
    return add(std::move(name), Mat<S>::Ones(rows, cols));
  }

  Param<S>& at(int idx) { return params_[idx]; }
  const Param<S>& at(int idx) const { return params_[idx]; }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  std::size_t size() const { return params_.size(); }

  void zero_grads() {
    for (Param<S>& p : params_) p.grad.setZero();
  }

  // Adds tape gradients (scaled) into the matching parameter accumulators.
  void accumulate_from(const Tape<S>& tape, S scale = S(1)) {
    tape.for_each_tagged_grad([this, scale](int tag, const Mat<S>& g) {
      params_[tag].grad += g * scale;
    });
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const Param<S>& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

 private:
  std::vector<Param<S>> params_;
  std::unordered_map<std::string, int> index_;
};

// Exposes parameters of one store as leaves of one tape, creating each leaf
// on first use.
template <class S>
class Binding {
 public:
  Binding(Tape<S>& tape, ParamStore<S>& store)
      : tape_(&tape), store_(&store), cache_(store.size(), -1) {}

  Var<S> operator[](int param_index) {
    if (param_index < 0 ||
        static_cast<std::size_t>(param_index) >= store_->size()) {
      throw ContractError("binding: parameter index out of range");
    }
    if (cache_.size() < store_->size()) cache_.resize(store_->size(), -1);
    int& id = cache_[param_index];
    if (id < 0) {
      Var<S> v =
          tape_->leaf_external(&store_->at(param_index).value, param_index);
      id = v.id;
    }
    return {tape_, id};
  }

  Tape<S>& tape() { return *tape_; }

 private:
  Tape<S>* tape_;
  ParamStore<S>* store_;
  std::vector<int> cache_;
};

// ---------------------------------------------------------------------------
// Blocks
// ---------------------------------------------------------------------------

template <class S>
struct LinearLayer {
  int w = -1;
  int b = -1;

  LinearLayer() = default;
  LinearLayer(ParamStore<S>& store, const std::string& prefix,
              Eigen::Index in_dim, Eigen::Index out_dim, Rng& rng) {
    w = store.add_xavier(prefix + ".w", in_dim, out_dim, rng);
    b = store.add_zeros(prefix + ".b", 1, out_dim);
  }

  Var<S> apply(Binding<S>& p, const Var<S>& x) const {
    return linear(x, p[w], p[b]);
  }
};

// Stack of linear layers with ReLU between them (none after the last).
template <class S>
struct MlpBlock {
  std::vector<LinearLayer<S>> layers;

  MlpBlock() = default;
  MlpBlock(ParamStore<S>& store, const std::string& prefix,
           const std::vector<Eigen::Index>& dims, Rng& rng) {
    if (dims.size() < 2) throw ConfigError("mlp needs at least two dims");
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      layers.emplace_back(store, prefix + ".fc" + std::to_string(i), dims[i],
                          dims[i + 1], rng);
    }
  }

  Var<S> apply(Binding<S>& p, const Var<S>& x) const {
    Var<S> h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      h = layers[i].apply(p, h);
      if (i + 1 < layers.size()) h = relu(h);
    }
    return h;
  }
};

template <class S>
struct LayerNormBlock {
  int gain = -1;
  int offset = -1;

  LayerNormBlock() = default;
  LayerNormBlock(ParamStore<S>& store, const std::string& prefix,
                 Eigen::Index dim) {
    gain = store.add_ones(prefix + ".gain", 1, dim);
    offset = store.add_zeros(prefix + ".offset", 1, dim);
  }

  Var<S> apply(Binding<S>& p, const Var<S>& x) const {
    return layer_norm(x, p[gain], p[offset]);
  }
};

template <class S>
struct AttentionBlock {
  LinearLayer<S> q, k, v, o;
  int heads = 1;

  AttentionBlock() = default;
  AttentionBlock(ParamStore<S>& store, const std::string& prefix,
                 Eigen::Index dim, int num_heads, Rng& rng)
      : q(store, prefix + ".q", dim, dim, rng),
        k(store, prefix + ".k", dim, dim, rng),
        v(store, prefix + ".v", dim, dim, rng),
        o(store, prefix + ".o", dim, dim, rng),
        heads(num_heads) {}

  Var<S> apply(Binding<S>& p, const Var<S>& queries, const Var<S>& keys,
               const Var<S>& values, const AttnMask& mask = {}) const {
    AttentionVars<S> w{p[q.w], p[q.b], p[k.w], p[k.b],
                       p[v.w], p[v.b], p[o.w], p[o.b]};
    return multi_head_attention(queries, keys, values, w, heads, mask);
  }
};

// Post-norm transformer encoder layer. `pos` (optional) is added to the
// attention queries and keys but not the values.
template <class S>
struct EncoderLayerBlock {
  AttentionBlock<S> self_attn;
  MlpBlock<S> ffn;
  LayerNormBlock<S> norm1, norm2;

  EncoderLayerBlock() = default;
  EncoderLayerBlock(ParamStore<S>& store, const std::string& prefix,
                    Eigen::Index dim, Eigen::Index ffn_dim, int heads, Rng& rng)
      : self_attn(store, prefix + ".attn", dim, heads, rng),
        ffn(store, prefix + ".ffn", {dim, ffn_dim, dim}, rng),
        norm1(store, prefix + ".norm1", dim),
        norm2(store, prefix + ".norm2", dim) {}

  Var<S> apply(Binding<S>& p, const Var<S>& x, const Var<S>& pos,
               const AttnMask& mask = {}) const {
    Var<S> qk = pos.valid() ? add(x, pos) : x;
    Var<S> a = self_attn.apply(p, qk, qk, x, mask);
    Var<S> h = norm1.apply(p, add(x, a));
    Var<S> f = ffn.apply(p, h);
    return norm2.apply(p, add(h, f));
  }
};

// Post-norm transformer decoder layer. `query_pos` is added to the decoder
// queries in both attentions; `mem_pos` (optional) to the cross-attention
// keys. `skip_self` drops the self-attention sublayer entirely.
template <class S>
struct DecoderLayerBlock {
  AttentionBlock<S> self_attn, cross_attn;
  MlpBlock<S> ffn;
  LayerNormBlock<S> norm1, norm2, norm3;
  bool skip_self = false;

  DecoderLayerBlock() = default;
  DecoderLayerBlock(ParamStore<S>& store, const std::string& prefix,
                    Eigen::Index dim, Eigen::Index ffn_dim, int heads, Rng& rng,
                    bool skip_self_attention = false)
      : cross_attn(store, prefix + ".cross", dim, heads, rng),
        ffn(store, prefix + ".ffn", {dim, ffn_dim, dim}, rng),
        norm2(store, prefix + ".norm2", dim),
        norm3(store, prefix + ".norm3", dim),
        skip_self(skip_self_attention) {
    if (!skip_self) {
      self_attn = AttentionBlock<S>(store, prefix + ".self", dim, heads, rng);
      norm1 = LayerNormBlock<S>(store, prefix + ".norm1", dim);
    }
  }

  Var<S> apply(Binding<S>& p, const Var<S>& x, const Var<S>& query_pos,
               const Var<S>& memory, const Var<S>& mem_pos,
               const AttnMask& mem_mask = {}) const {
    Var<S> h = x;
    if (!skip_self) {
      Var<S> qk = query_pos.valid() ? add(h, query_pos) : h;
      Var<S> a = self_attn.apply(p, qk, qk, h);
      h = norm1.apply(p, add(h, a));
    }
    Var<S> q = query_pos.valid() ? add(h, query_pos) : h;
    Var<S> k = mem_pos.valid() ? add(memory, mem_pos) : memory;
    Var<S> c = cross_attn.apply(p, q, k, memory, mem_mask);
    h = norm2.apply(p, add(h, c));
    Var<S> f = ffn.apply(p, h);
    return norm3.apply(p, add(h, f));
  }
};

}  // namespace mmp
