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

// Runs a trained model over a dataset split: forward pass, endpoint NMS,
// metric aggregation, optional per-region miss-rate matrix and per-mode
// coverage for labeled synthetic data.

#pragma once

#include <map>
#include <vector>

#include "mmp/metrics.hpp"
#include "mmp/model.hpp"

namespace mmp {

struct EvalConfig {
  int k_out = 6;
  double nms_threshold_m = 2.0;
  double miss_threshold_m = 2.0;
};

template <class S>
Forecast extract_forecast(const HeadOutput<S>& head) {
  Forecast f;
  f.trajectories = head.trajectories.value().template cast<double>();
  const Mat<S>& s = head.scores.value();
  f.scores.resize(s.rows());
  for (Eigen::Index k = 0; k < s.rows(); ++k) {
    f.scores(k) = static_cast<double>(s(k, 0));
  }
  return f;
}

// Forward pass without gradient recording; returns the final head's
// predictions in the normalized frame.
template <class S>
Forecast predict(Model<S>& model, const Scenario& normalized) {
  Tape<S> tape;
  tape.set_grad_enabled(false);
  ModelOutput<S> out = model.forward(tape, normalized);
  return extract_forecast(out.final_head());
}

struct SplitEvaluation {
  MetricsReport report;
  // Fraction of non-missed cases per synthetic mode label, for labeled data.
  std::map<int, double> mode_hit_rate;
  // Minimum hit rate over the labeled modes (1.0 when no labels exist).
  double mode_coverage = 1.0;
  bool has_mr_matrix = false;
  MRMatrix mr_matrix;
};

// Evaluates every scenario that carries a ground-truth future. Scenarios
// are normalized on the fly; pass a partition plus proposal map to also
// collect the per-region miss-rate matrix.
template <class S>
SplitEvaluation evaluate_split(Model<S>& model, const Dataset& dataset,
                               const EvalConfig& cfg,
                               const RegionPartition* partition = nullptr,
                               const ProposalRegionMap* pmap = nullptr) {
  SplitEvaluation ev;
  ev.report.k_eval = cfg.k_out;
  ev.report.miss_threshold_m = cfg.miss_threshold_m;
  const bool with_matrix = partition != nullptr && pmap != nullptr;
  MRMatrixBuilder builder(with_matrix ? partition->M : 1);
  std::map<int, std::pair<int, int>> mode_counts;  // label -> (hits, cases)
  double ade_sum = 0.0, fde_sum = 0.0;
  int miss_sum = 0, cases = 0;
  for (const Scenario& raw : dataset.scenarios) {
    if (!raw.has_future()) continue;
    Scenario s = normalize_scenario(raw);
    Forecast f = predict(model, s);
    NmsResult nms = nms_select(f, cfg.nms_threshold_m, cfg.k_out);
    CaseMetrics cm =
        compute_case_metrics(f, nms.selected, s.future, cfg.miss_threshold_m);
    ade_sum += cm.min_ade;
    fde_sum += cm.min_fde;
    miss_sum += cm.miss ? 1 : 0;
    ++cases;
    if (raw.mode_label >= 0) {
      auto& [hits, total] = mode_counts[raw.mode_label];
      hits += cm.miss ? 0 : 1;
      ++total;
    }
    if (with_matrix) {
      builder.add_case(f, s.future, *partition, *pmap, cfg.miss_threshold_m);
    }
  }
  if (cases > 0) {
    ev.report.min_ade = ade_sum / cases;
    ev.report.min_fde = fde_sum / cases;
    ev.report.miss_rate = static_cast<double>(miss_sum) / cases;
  }
  ev.report.case_count = cases;
  for (const auto& [label, counts] : mode_counts) {
    const double rate =
        counts.second > 0
            ? static_cast<double>(counts.first) / counts.second
            : 0.0;
    ev.mode_hit_rate[label] = rate;
    ev.mode_coverage = std::min(ev.mode_coverage, rate);
  }
  if (with_matrix) {
    ev.has_mr_matrix = true;
    ev.mr_matrix = builder.build();
  }
  return ev;
}

}  // namespace mmp
