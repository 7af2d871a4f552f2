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

// The training loop: seeded shuffling, per-scenario tapes, mini-batch
// gradient accumulation, and a line-oriented metrics log.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "mmp/losses.hpp"
#include "mmp/optim.hpp"

namespace mmp {

struct TrainConfig {
  Strategy strategy = Strategy::kRts;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 0;
  AdamWConfig optimizer;
  bool augment = true;
  AugmentConfig augment_cfg;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  }
};

struct EpochStats {
  int epoch = 0;
  double reg = 0.0, conf = 0.0, cls = 0.0, total = 0.0;
  double training_total = 0.0;
  std::array<double, 3> sigma = {1.0, 1.0, 1.0};
  int scenario_count = 0;
};

inline void log_epoch(std::ostream& out, const EpochStats& st,
                      const std::string& split, Strategy strategy) {
  out << "epoch=" << st.epoch << " split=" << split
      << " strategy=" << strategy_name(strategy) << " reg=" << st.reg
      << " conf=" << st.conf << " cls=" << st.cls << " total=" << st.total
      << " training_total=" << st.training_total << " sigma1=" << st.sigma[0]
      << " sigma2=" << st.sigma[1] << " sigma3=" << st.sigma[2]
      << " n=" << st.scenario_count << "\n";
}

template <class S>
class Trainer {
 public:
  Trainer(Model<S>& model, const TrainConfig& cfg,
          const RegionPartition* partition)
      : model_(model),
        cfg_(cfg),
        partition_(partition),
        opt_(cfg.optimizer),
        weights_(LossWeights<S>::attach(model.params())) {
    cfg_.validate();
    if (cfg_.strategy == Strategy::kRts) {
      if (partition_ == nullptr) {
        throw ConfigError("region strategy requires a partition");
      }
      pmap_ = map_proposals_to_regions(model.config().K, partition_->M);
    } else {
      pmap_ = map_proposals_to_regions(model.config().K, 1);
    }
  }

  const LossWeights<S>& weights() const { return weights_; }
  AdamW<S>& optimizer() { return opt_; }
  const ProposalRegionMap& proposal_map() const { return pmap_; }

  // One pass over the dataset. Scenarios are normalized (and optionally
  // augmented) on the fly; each contributes 1/batch of its gradient before
  // every optimizer step. Deterministic in (config seed, epoch).
  EpochStats train_epoch(const Dataset& dataset, int epoch) {
    if (dataset.scenarios.empty()) {
      throw ContractError("cannot train on an empty dataset");
    }
    std::vector<std::size_t> order(dataset.scenarios.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg_.seed, 0x5u + 2u * epoch));
    shuffle_rng.shuffle(order);

    EpochStats stats;
    stats.epoch = epoch;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t batch_end =
          std::min(order.size(), pos + static_cast<std::size_t>(cfg_.batch_size));
      const S inv_batch = S(1) / static_cast<S>(batch_end - pos);
      model_.params().zero_grads();
      for (; pos < batch_end; ++pos) {
        const Scenario& raw = dataset.scenarios[order[pos]];
        Scenario s = normalize_scenario(raw);
        if (cfg_.augment) {
          Rng aug_rng(derive_seed(derive_seed(cfg_.seed, 0x10000u + epoch),
                                  order[pos]));
          s = augment_scenario(s, aug_rng, cfg_.augment_cfg);
        }
        Tape<S> tape;
        Var<S> loss;
        LossReport report;
        try {
          std::tie(loss, report) = scenario_loss(
              model_, tape, s, cfg_.strategy,
              cfg_.strategy == Strategy::kRts ? partition_ : nullptr,
              cfg_.strategy == Strategy::kRts ? &pmap_ : nullptr, weights_);
        } catch (const ValueError& e) {
          throw TrainingDivergenceError("non-finite values on scenario " +
                                        s.id + ": " + e.what());
        }
        if (!std::isfinite(report.training_total)) {
          throw TrainingDivergenceError("non-finite loss on scenario " + s.id);
        }
        tape.backward(loss);
        model_.params().accumulate_from(tape, inv_batch);
        stats.reg += report.reg;
        stats.conf += report.conf;
        stats.cls += report.cls;
        stats.total += report.total;
        stats.training_total += report.training_total;
        ++stats.scenario_count;
      }
      opt_.step(model_.params());
    }
    const double n = stats.scenario_count;
    stats.reg /= n;
    stats.conf /= n;
    stats.cls /= n;
    stats.total /= n;
    stats.training_total /= n;
    stats.sigma = weights_.sigmas(model_.params());
    return stats;
  }

  // Full run; logs one line per epoch when a stream is given.
  std::vector<EpochStats> fit(const Dataset& dataset, std::ostream* log) {
    std::vector<EpochStats> history;
    for (int e = 0; e < cfg_.epochs; ++e) {
      history.push_back(train_epoch(dataset, e));
      if (log != nullptr) {
        log_epoch(*log, history.back(), dataset.split, cfg_.strategy);
      }
    }
    return history;
  }

 private:
  Model<S>& model_;
  TrainConfig cfg_;
  const RegionPartition* partition_;
  AdamW<S> opt_;
  ProposalRegionMap pmap_;
  LossWeights<S> weights_;
};

}  // namespace mmp
