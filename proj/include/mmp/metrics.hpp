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

// Inference-side selection and scoring: endpoint non-maximum suppression,
// the minADE / minFDE / miss-rate suite, and the per-region miss-rate
// matrix.

#pragma once

#include <string>
#include <vector>

#include "mmp/common.hpp"
#include "mmp/partition.hpp"

namespace mmp {

// Model predictions for one case, in plain doubles. Row k of `trajectories`
// is proposal k's future as (x1, y1, ..., xT, yT); `scores` are raw selector
// outputs.
struct Forecast {
  MatX trajectories;
  Eigen::VectorXd scores;

  int proposals() const { return static_cast<int>(trajectories.rows()); }
  int steps() const { return static_cast<int>(trajectories.cols() / 2); }
  Vec2 endpoint(int k) const {
    const Eigen::Index c = trajectories.cols();
    return {trajectories(k, c - 2), trajectories(k, c - 1)};
  }
  Vec2 point(int k, int step) const {
    return {trajectories(k, 2 * step), trajectories(k, 2 * step + 1)};
  }
  // Softmax over all K raw scores.
  Eigen::VectorXd confidences() const;
};

struct NmsResult {
  std::vector<int> selected;  // exactly K_out indices, admission order
  // Threshold tier at which the last element was admitted. Every pairwise
  // endpoint distance in the selection is >= this value.
  double final_threshold = 0.0;
};

// Greedy confidence-descending selection that rejects candidates whose
// endpoint lies strictly within the threshold of an already-selected one.
// When a pass cannot fill K_out, the threshold halves and rejected
// candidates are rescanned; below 1e-9 it drops to 0, which admits
// everything and guarantees termination.
NmsResult nms_select(const Forecast& forecast, double threshold_m, int k_out);

struct CaseMetrics {
  double min_ade = 0.0;
  double min_fde = 0.0;
  bool miss = false;
};

CaseMetrics compute_case_metrics(const Forecast& forecast,
                                 const std::vector<int>& selected,
                                 const Points& gt_future,
                                 double miss_threshold_m);

struct MetricsReport {
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;
  int k_eval = 0;
  double miss_threshold_m = 2.0;
  int case_count = 0;

  std::string to_json_text() const;
};

// M x M miss rates: cell (i, j) scores region-i proposals (best of the
// block's N endpoints) on cases whose ground truth lies in region j. Cells
// with no cases are NaN and excluded from the means.
struct MRMatrix {
  MatX values;

  double mean_diagonal() const;
  double mean_off_diagonal() const;
  std::string to_csv() const;
};

// Accumulates per-case misses into an MR matrix.
class MRMatrixBuilder {
 public:
  explicit MRMatrixBuilder(int regions)
      : miss_(MatX::Zero(regions, regions)),
        count_(MatX::Zero(regions, regions)) {}

  void add_case(const Forecast& forecast, const Points& gt_future,
                const RegionPartition& partition,
                const ProposalRegionMap& pmap, double miss_threshold_m);
  MRMatrix build() const;

 private:
  MatX miss_;
  MatX count_;
};

}  // namespace mmp
