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

#include "mmp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace mmp {

Eigen::VectorXd Forecast::confidences() const {
  const double m = scores.maxCoeff();
  Eigen::ArrayXd e = (scores.array() - m).exp();
  return (e / e.sum()).matrix();
}

NmsResult nms_select(const Forecast& forecast, double threshold_m, int k_out) {
  const int k = forecast.proposals();
  if (k_out < 1 || k_out > k) {
    throw ConfigError("nms: K_out " + std::to_string(k_out) +
                      " exceeds proposal count " + std::to_string(k));
  }
  if (threshold_m < 0.0) throw ConfigError("nms: negative threshold");
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return forecast.scores(a) > forecast.scores(b) ||
           (forecast.scores(a) == forecast.scores(b) && a < b);
  });

  NmsResult res;
  std::vector<Vec2> kept_endpoints;
  double threshold = threshold_m;
  std::vector<int> remaining = order;
  while (static_cast<int>(res.selected.size()) < k_out) {
    std::vector<int> rejected;
    for (int idx : remaining) {
      if (static_cast<int>(res.selected.size()) == k_out) break;
      const Vec2 e = forecast.endpoint(idx);
      bool excluded = false;
      for (const Vec2& s : kept_endpoints) {
        if ((e - s).norm() < threshold) {
          excluded = true;
          break;
        }
      }
      if (excluded) {
        rejected.push_back(idx);
      } else {
        res.selected.push_back(idx);
        kept_endpoints.push_back(e);
        res.final_threshold = threshold;
      }
    }
    remaining = std::move(rejected);
    if (static_cast<int>(res.selected.size()) < k_out) {
      threshold /= 2.0;
      if (threshold < 1e-9) threshold = 0.0;
    }
  }
  return res;
}

CaseMetrics compute_case_metrics(const Forecast& forecast,
                                 const std::vector<int>& selected,
                                 const Points& gt_future,
                                 double miss_threshold_m) {
  if (selected.empty()) throw ContractError("metrics need >= 1 selection");
  if (gt_future.rows() != forecast.steps()) {
    throw ShapeError("ground-truth future length does not match predictions");
  }
  CaseMetrics cm;
  cm.min_ade = std::numeric_limits<double>::infinity();
  cm.min_fde = std::numeric_limits<double>::infinity();
  const int steps = forecast.steps();
  for (int idx : selected) {
    double sum = 0.0;
    for (int t = 0; t < steps; ++t) {
      sum += (forecast.point(idx, t) - Vec2(gt_future.row(t))).norm();
    }
    cm.min_ade = std::min(cm.min_ade, sum / steps);
    cm.min_fde = std::min(
        cm.min_fde,
        (forecast.endpoint(idx) - Vec2(gt_future.row(steps - 1))).norm());
  }
  cm.miss = cm.min_fde > miss_threshold_m;
  return cm;
}

std::string MetricsReport::to_json_text() const {
  nlohmann::json j;
  j["min_ade"] = min_ade;
  j["min_fde"] = min_fde;
  j["miss_rate"] = miss_rate;
  j["k_eval"] = k_eval;
  j["miss_threshold_m"] = miss_threshold_m;
  j["case_count"] = case_count;
  return j.dump(2);
}

double MRMatrix::mean_diagonal() const {
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    if (!std::isnan(values(i, i))) {
      sum += values(i, i);
      ++n;
    }
  }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

double MRMatrix::mean_off_diagonal() const {
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (i != j && !std::isnan(values(i, j))) {
        sum += values(i, j);
        ++n;
      }
    }
  }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

std::string MRMatrix::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j > 0) out << ",";
      if (std::isnan(values(i, j))) {
        out << "nan";
      } else {
        out << values(i, j);
      }
    }
    out << "\n";
  }
  return out.str();
}

void MRMatrixBuilder::add_case(const Forecast& forecast,
                               const Points& gt_future,
                               const RegionPartition& partition,
                               const ProposalRegionMap& pmap,
                               double miss_threshold_m) {
  if (forecast.proposals() != pmap.K) {
    throw ShapeError("forecast proposal count does not match the region map");
  }
  const Vec2 gt_end = gt_future.row(gt_future.rows() - 1);
  const int j = partition.assign(gt_end);
  for (int region = 0; region < pmap.M; ++region) {
    double best = std::numeric_limits<double>::infinity();
    for (int n = 0; n < pmap.per_region; ++n) {
      const int k = pmap.first_proposal(region) + n;
      best = std::min(best, (forecast.endpoint(k) - gt_end).norm());
    }
    if (best > miss_threshold_m) miss_(region, j) += 1.0;
    count_(region, j) += 1.0;
  }
}

MRMatrix MRMatrixBuilder::build() const {
  MRMatrix m;
  m.values = miss_.binaryExpr(count_, [](double miss, double count) {
    return count > 0.0 ? miss / count
                       : std::numeric_limits<double>::quiet_NaN();
  });
  return m;
}

}  // namespace mmp
