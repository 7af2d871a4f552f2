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

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mmp/common.hpp"
#include "mmp/nn.hpp"

namespace mmp {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  double clip_norm = 0.1;
};

// AdamW with decoupled weight decay and global gradient-norm clipping.
template <class S>
class AdamW {
 public:
  explicit AdamW(const AdamWConfig& cfg = {}) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  long step_count() const { return step_; }

  // Applies one update from the gradients accumulated in the store, then
  // leaves the gradients untouched (caller decides when to zero them).
  void step(ParamStore<S>& store) {
    ensure_state(store);
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < store.size(); ++i) {
      const Mat<S>& g = store.at(static_cast<int>(i)).grad;
      if (!g.allFinite()) {
        throw TrainingDivergenceError("non-finite gradient in parameter " +
                                      store.at(static_cast<int>(i)).name);
      }
      sq_sum += static_cast<double>(g.squaredNorm());
    }
    const double norm = std::sqrt(sq_sum);
    const S clip_scale =
        (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm)
            ? static_cast<S>(cfg_.clip_norm / norm)
            : S(1);

    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

    for (std::size_t i = 0; i < store.size(); ++i) {
      Param<S>& p = store.at(static_cast<int>(i));
      Mat<S> g = p.grad * clip_scale;
      Mat<S>& m = m_[i];
      Mat<S>& v = v_[i];
      m = static_cast<S>(cfg_.beta1) * m + static_cast<S>(1.0 - cfg_.beta1) * g;
      v = static_cast<S>(cfg_.beta2) * v.array().matrix() +
          static_cast<S>(1.0 - cfg_.beta2) * g.cwiseProduct(g);
      const Mat<S> mhat = m / static_cast<S>(bc1);
      const Mat<S> vhat = v / static_cast<S>(bc2);
      p.value -=
          static_cast<S>(cfg_.lr) *
          (mhat.array() / (vhat.array().sqrt() + static_cast<S>(cfg_.eps)))
              .matrix();
      p.value -= static_cast<S>(cfg_.lr * cfg_.weight_decay) * p.value;
      if (!p.value.allFinite()) {
        throw TrainingDivergenceError("non-finite value in parameter " +
                                      p.name);
      }
    }
  }

  // Moment access for checkpointing.
  std::vector<Mat<S>>& first_moments() { return m_; }
  std::vector<Mat<S>>& second_moments() { return v_; }
  void set_step_count(long s) { step_ = s; }
  void ensure_state(const ParamStore<S>& store) {
    if (m_.size() == store.size()) return;
    m_.resize(store.size());
    v_.resize(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
      const Mat<S>& val = store.at(static_cast<int>(i)).value;
      if (m_[i].size() == 0) m_[i] = Mat<S>::Zero(val.rows(), val.cols());
      if (v_[i].size() == 0) v_[i] = Mat<S>::Zero(val.rows(), val.cols());
    }
  }

 private:
  AdamWConfig cfg_;
  long step_ = 0;
  std::vector<Mat<S>> m_;
  std::vector<Mat<S>> v_;
};

}  // namespace mmp
