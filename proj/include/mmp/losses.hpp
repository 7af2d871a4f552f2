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

// Proposal supervision: which proposals a head trains on, the regression /
// confidence / classification terms, and the uncertainty-weighted total.
//
// Region strategy: only the N proposals mapped to the ground-truth
// endpoint's region are supervised. Vanilla strategy: only the single
// proposal with minimum final displacement error.

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "mmp/model.hpp"
#include "mmp/partition.hpp"

namespace mmp {

enum class Strategy { kVanilla, kRts };

inline const char* strategy_name(Strategy s) {
  return s == Strategy::kVanilla ? "vanilla" : "rts";
}

inline Strategy strategy_from_name(const std::string& name) {
  if (name == "vanilla") return Strategy::kVanilla;
  if (name == "rts") return Strategy::kRts;
  throw ConfigError("unknown strategy '" + name + "' (want vanilla or rts)");
}

// Unconstrained log-sigma scalars; sigma_i = exp(u_i) stays positive and
// starts at 1.
template <class S>
struct LossWeights {
  int u_reg = -1;
  int u_conf = -1;
  int u_cls = -1;

  static LossWeights attach(ParamStore<S>& store) {
    LossWeights w;
    const int existing = store.find("loss.u_reg");
    if (existing >= 0) {
      w.u_reg = existing;
      w.u_conf = store.find("loss.u_conf");
      w.u_cls = store.find("loss.u_cls");
      return w;
    }
    w.u_reg = store.add_zeros("loss.u_reg", 1, 1);
    w.u_conf = store.add_zeros("loss.u_conf", 1, 1);
    w.u_cls = store.add_zeros("loss.u_cls", 1, 1);
    return w;
  }

  std::array<double, 3> sigmas(const ParamStore<S>& store) const {
    return {std::exp(static_cast<double>(store.at(u_reg).value(0, 0))),
            std::exp(static_cast<double>(store.at(u_conf).value(0, 0))),
            std::exp(static_cast<double>(store.at(u_cls).value(0, 0)))};
  }
};

template <class S>
Vec2 proposal_endpoint(const Mat<S>& traj, Eigen::Index k) {
  const Eigen::Index c = traj.cols();
  return {static_cast<double>(traj(k, c - 2)),
          static_cast<double>(traj(k, c - 1))};
}

inline Vec2 future_endpoint(const Points& future) {
  return future.row(future.rows() - 1);
}

// Indices a head supervises, from the trajectory values of that same head.
// Vanilla ties resolve to the lowest index.
template <class S>
std::vector<Eigen::Index> select_supervised_proposals(
    const Mat<S>& traj_values, const Points& gt_future, Strategy strategy,
    const RegionPartition* partition, const ProposalRegionMap* pmap) {
  if (gt_future.rows() == 0) {
    throw ContractError("proposal selection requires a ground-truth future");
  }
  const Vec2 gt_end = future_endpoint(gt_future);
  if (strategy == Strategy::kVanilla) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < traj_values.rows(); ++k) {
      const double d = (proposal_endpoint(traj_values, k) - gt_end).norm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return {best};
  }
  if (partition == nullptr || pmap == nullptr) {
    throw ContractError("region strategy requires a partition and proposal map");
  }
  const int region = partition->assign(gt_end);
  std::vector<Eigen::Index> out;
  for (int j = 0; j < pmap->per_region; ++j) {
    out.push_back(pmap->first_proposal(region) + j);
  }
  return out;
}

// Mean Huber penalty (delta 1 m) over the selected trajectories, averaged
// over all steps and both coordinates.
template <class S>
Var<S> regression_loss(const Var<S>& trajectories,
                       const std::vector<Eigen::Index>& selected,
                       const Points& gt_future) {
  Tape<S>& t = *trajectories.tape;
  const Eigen::Index steps = gt_future.rows();
  if (trajectories.cols() != 2 * steps) {
    throw ShapeError("trajectory width does not match ground-truth length");
  }
  Mat<S> target(static_cast<Eigen::Index>(selected.size()), 2 * steps);
  for (Eigen::Index r = 0; r < target.rows(); ++r) {
    for (Eigen::Index i = 0; i < steps; ++i) {
      target(r, 2 * i) = static_cast<S>(gt_future(i, 0));
      target(r, 2 * i + 1) = static_cast<S>(gt_future(i, 1));
    }
  }
  Var<S> picked = gather_rows(trajectories, selected);
  Var<S> err = sub(picked, t.input(std::move(target)));
  return mean_all(huber_cwise(err, S(1)));
}

// KL divergence between the endpoint-distance distribution lambda (softmax
// of negated final displacement errors, treated as a fixed target) and the
// score distribution tau (softmax over the selected raw scores).
template <class S>
Var<S> confidence_loss(const Var<S>& scores, const Var<S>& trajectories,
                       const std::vector<Eigen::Index>& selected,
                       const Points& gt_future) {
  Tape<S>& t = *scores.tape;
  const Eigen::Index n = static_cast<Eigen::Index>(selected.size());
  if (n < 1) throw ContractError("confidence loss requires a selection");
  const Vec2 gt_end = future_endpoint(gt_future);
  Eigen::ArrayXd neg_d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    neg_d(i) =
        -(proposal_endpoint(trajectories.value(), selected[i]) - gt_end).norm();
  }
  const Eigen::ArrayXd shifted = neg_d - neg_d.maxCoeff();
  Eigen::ArrayXd lambda = shifted.exp();
  lambda /= lambda.sum();
  double entropy_term = 0.0;  // sum of lambda_i * log(lambda_i)
  Mat<S> lambda_row(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    entropy_term += lambda(i) * std::log(lambda(i));
    lambda_row(0, i) = static_cast<S>(lambda(i));
  }
  Var<S> log_tau =
      log_softmax_rows(transpose(gather_rows(scores, selected)));
  Var<S> cross = sum_all(cmul(t.input(std::move(lambda_row)), log_tau));
  Mat<S> h(1, 1);
  h(0, 0) = static_cast<S>(entropy_term);
  return sub(t.input(std::move(h)), cross);
}

// Negative log probability of the ground-truth region, where a region's
// probability is the sum of its proposals' softmax-over-K scores.
template <class S>
Var<S> classification_loss(const Var<S>& scores, int gt_region,
                           const ProposalRegionMap& pmap) {
  Var<S> probs = softmax(transpose(scores), 1);  // 1 x K
  Var<S> region_mass = rowwise_sum(
      block(probs, 0, pmap.first_proposal(gt_region), 1, pmap.per_region));
  return neg(log_guarded(region_mass));
}

// L = reg/sigma1^2 + conf/sigma2^2 + cls/sigma3^2 + sum_i log(sigma_i + 1)
// with sigma_i = exp(u_i). `cls` may be invalid, which drops both its
// weighted term and the sigma3 regularizer.
template <class S>
Var<S> total_loss(const Var<S>& reg, const Var<S>& conf, const Var<S>& cls,
                  const Var<S>& u_reg, const Var<S>& u_conf,
                  const Var<S>& u_cls) {
  auto weighted = [](const Var<S>& loss, const Var<S>& u) {
    return cmul(loss, exp_op(scale(u, S(-2))));
  };
  auto regularizer = [](const Var<S>& u) {
    return log_guarded(add_scalar(exp_op(u), S(1)));
  };
  Var<S> total = add(weighted(reg, u_reg), weighted(conf, u_conf));
  total = add(total, add(regularizer(u_reg), regularizer(u_conf)));
  if (cls.valid()) {
    total = add(total, weighted(cls, u_cls));
    total = add(total, regularizer(u_cls));
  }
  return total;
}

template <class S>
struct HeadLoss {
  Var<S> reg, conf, cls, total;  // cls invalid under the vanilla strategy
  std::vector<Eigen::Index> selected;
  int gt_region = -1;
};

template <class S>
HeadLoss<S> head_loss(Binding<S>& bind, const HeadOutput<S>& head,
                      const Points& gt_future, Strategy strategy,
                      const RegionPartition* partition,
                      const ProposalRegionMap* pmap,
                      const LossWeights<S>& weights) {
  HeadLoss<S> out;
  out.selected = select_supervised_proposals(head.trajectories.value(),
                                             gt_future, strategy, partition,
                                             pmap);
  out.reg = regression_loss(head.trajectories, out.selected, gt_future);
  out.conf =
      confidence_loss(head.scores, head.trajectories, out.selected, gt_future);
  Var<S> u1 = bind[weights.u_reg];
  Var<S> u2 = bind[weights.u_conf];
  Var<S> u3 = bind[weights.u_cls];
  if (strategy == Strategy::kRts) {
    out.gt_region = partition->assign(future_endpoint(gt_future));
    out.cls = classification_loss(head.scores, out.gt_region, *pmap);
  }
  out.total = total_loss(out.reg, out.conf, out.cls, u1, u2, u3);
  return out;
}

struct LossReport {
  // Final-head values; `total` is the uncertainty-weighted combination of
  // the three parts.
  double reg = 0.0, conf = 0.0, cls = 0.0, total = 0.0;
  // Sum over every head's total: the quantity actually minimized.
  double training_total = 0.0;
  std::vector<std::array<double, 4>> per_head;  // reg, conf, cls, total
  std::array<double, 3> sigma = {1.0, 1.0, 1.0};
  std::vector<Eigen::Index> selected;  // final head
  int gt_region = -1;
};

// Full supervision for one scenario: every intermediate head plus the final
// head contributes its own uncertainty-weighted loss; the returned Var is
// their sum.
template <class S>
std::pair<Var<S>, LossReport> scenario_loss(Model<S>& model, Tape<S>& tape,
                                            const Scenario& scenario,
                                            Strategy strategy,
                                            const RegionPartition* partition,
                                            const ProposalRegionMap* pmap,
                                            const LossWeights<S>& weights) {
  if (!scenario.has_future()) {
    throw ContractError("training scenario lacks a ground-truth future");
  }
  ModelOutput<S> out = model.forward(tape, scenario);
  Binding<S> bind(tape, model.params());
  LossReport report;
  Var<S> sum;
  for (std::size_t i = 0; i < out.heads.size(); ++i) {
    HeadLoss<S> hl = head_loss(bind, out.heads[i], scenario.future, strategy,
                               partition, pmap, weights);
    sum = sum.valid() ? add(sum, hl.total) : hl.total;
    const double cls_v =
        hl.cls.valid() ? static_cast<double>(hl.cls.scalar()) : 0.0;
    report.per_head.push_back({static_cast<double>(hl.reg.scalar()),
                               static_cast<double>(hl.conf.scalar()), cls_v,
                               static_cast<double>(hl.total.scalar())});
    if (i + 1 == out.heads.size()) {
      report.reg = report.per_head.back()[0];
      report.conf = report.per_head.back()[1];
      report.cls = cls_v;
      report.total = report.per_head.back()[3];
      report.selected = hl.selected;
      report.gt_region = hl.gt_region;
    }
  }
  report.training_total = static_cast<double>(sum.scalar());
  report.sigma = weights.sigmas(model.params());
  return {sum, report};
}

}  // namespace mmp
