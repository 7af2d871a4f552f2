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

// End-to-end verification harness. Each numbered check prints one
// "ACCEPTANCE n: PASS|FAIL" line; the exit code is the failure count.
// Criteria may be selected by number on the command line (default: all).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "mmp/checkpoint.hpp"
#include "mmp/dataset_io.hpp"
#include "mmp/evaluation.hpp"
#include "mmp/synthetic.hpp"
#include "mmp/trainer.hpp"
#include "support/gradcheck.hpp"

using mmp::MatX;
using mmp::Points;
using mmp::Rng;
using mmp::Scenario;
using mmp::Strategy;
using mmp::Var;
using mmptest::GradCheckResult;
using mmptest::check_gradients;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

MatX rand_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -2.0,
              double hi = 2.0) {
  MatX m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

// Mixes every output entry into one scalar with fixed weights.
Var<double> weigh(mmp::Tape<double>& t, const Var<double>& v, const MatX& w) {
  return mmp::sum_all(mmp::cmul(v, t.input(w)));
}

// ---------------------------------------------------------------------------
// Criterion 1: finite-difference gradient suite.

GradCheckResult op_gradient_suite(int* instances) {
  Rng rng(2024);
  GradCheckResult all;
  const int reps = 5;
  auto& count = *instances;
  count = 0;
  auto chk = [&](const GradCheckResult& r) {
    all.merge(r);
    ++count;
  };

  auto shape = [&]() {
    return std::pair<Eigen::Index, Eigen::Index>(1 + rng.uniform_int(4),
                                                 1 + rng.uniform_int(5));
  };

  for (int r = 0; r < reps; ++r) {
    auto [n, d] = shape();
    MatX a = rand_mat(rng, n, d), b = rand_mat(rng, n, d);
    MatX w = rand_mat(rng, n, d, -1, 1);

    chk(check_gradients("add", {a, b}, [&](auto& t, auto& v) {
      return weigh(t, mmp::add(v[0], v[1]), w);
    }));
    chk(check_gradients("sub", {a, b}, [&](auto& t, auto& v) {
      return weigh(t, mmp::sub(v[0], v[1]), w);
    }));
    chk(check_gradients("cmul", {a, b}, [&](auto& t, auto& v) {
      return weigh(t, mmp::cmul(v[0], v[1]), w);
    }));
    chk(check_gradients("neg_scale_shift", {a}, [&](auto& t, auto& v) {
      return weigh(t, mmp::add_scalar(mmp::scale(mmp::neg(v[0]), 1.7), -0.4),
                   w);
    }));
    chk(check_gradients("square", {a}, [&](auto& t, auto& v) {
      return weigh(t, mmp::square(v[0]), w);
    }));
    chk(check_gradients("exp", {a}, [&](auto& t, auto& v) {
      return weigh(t, mmp::exp_op(v[0]), w);
    }));

    MatX pos = rand_mat(rng, n, d, 0.1, 3.0);
    chk(check_gradients("log_guarded", {pos}, [&](auto& t, auto& v) {
      return weigh(t, mmp::log_guarded(v[0]), w);
    }));
    chk(check_gradients("sqrt_guarded", {pos}, [&](auto& t, auto& v) {
      return weigh(t, mmp::sqrt_guarded(v[0]), w);
    }));

    // Keep elementwise kinks (0 for relu, +-delta for huber) at a safe
    // distance so the central difference stays one-sided.
    MatX nck = a;
    for (Eigen::Index i = 0; i < nck.size(); ++i) {
      double& x = *(nck.data() + i);
      if (std::abs(x) < 0.05) x += 0.1;
      if (std::abs(std::abs(x) - 1.0) < 0.05) x += 0.1;
    }
    chk(check_gradients("relu", {nck}, [&](auto& t, auto& v) {
      return weigh(t, mmp::relu(v[0]), w);
    }));
    chk(check_gradients("huber", {nck}, [&](auto& t, auto& v) {
      return weigh(t, mmp::huber_cwise(v[0], 1.0), w);
    }));

    chk(check_gradients("softmax_rows", {a}, [&](auto& t, auto& v) {
      return weigh(t, mmp::softmax(v[0], 1), w);
    }));
    chk(check_gradients("softmax_cols", {a}, [&](auto& t, auto& v) {
      return weigh(t, mmp::softmax(v[0], 0), w);
    }));
    chk(check_gradients("log_softmax", {a}, [&](auto& t, auto& v) {
      return weigh(t, mmp::log_softmax_rows(v[0]), w);
    }));

    mmp::AttnMask mask(static_cast<std::size_t>(d), 0);
    for (Eigen::Index j = 0; j < d; ++j) {
      mask[static_cast<std::size_t>(j)] = rng.uniform(0, 1) < 0.7 ? 1 : 0;
    }
    mask[static_cast<std::size_t>(rng.uniform_int(
        static_cast<std::uint64_t>(d)))] = 1;
    chk(
        check_gradients("masked_softmax", {a}, [&](auto& t, auto& v) {
          return weigh(t, mmp::masked_softmax_rows(v[0], mask), w);
        }));

    MatX gain = rand_mat(rng, 1, d, 0.5, 1.5);
    MatX offset = rand_mat(rng, 1, d, -0.5, 0.5);
    chk(check_gradients("layer_norm", {a, gain, offset},
                              [&](auto& t, auto& v) {
                                return weigh(
                                    t, mmp::layer_norm(v[0], v[1], v[2]), w);
                              }));

    // Distinct entries keep the column maxima unambiguous.
    MatX distinct(n, d);
    for (Eigen::Index i = 0; i < distinct.size(); ++i) {
      *(distinct.data() + i) = 0.37 * static_cast<double>(i) +
                               rng.uniform(0, 0.1);
    }
    chk(check_gradients("colwise_max", {distinct},
                              [&](auto& t, auto& v) {
                                return weigh(t, mmp::colwise_max(v[0]),
                                             MatX::Ones(1, d));
                              }));

    MatX mean_w = rand_mat(rng, 1, d);
    chk(check_gradients("reductions", {a}, [&](auto& t, auto& v) {
      Var<double> s = mmp::add(weigh(t, mmp::rowwise_sum(v[0]),
                                     MatX::Ones(n, 1)),
                               weigh(t, mmp::mean_rows(v[0]), mean_w));
      s = mmp::add(s, mmp::sum_all(v[0]));
      return mmp::add(s, mmp::mean_all(v[0]));
    }));

    const Eigen::Index k = 1 + rng.uniform_int(3);
    MatX ma = rand_mat(rng, n, k), mb = rand_mat(rng, k, d);
    chk(check_gradients("matmul", {ma, mb}, [&](auto& t, auto& v) {
      return weigh(t, mmp::matmul(v[0], v[1]), w);
    }));
    chk(check_gradients("transpose", {a}, [&](auto& t, auto& v) {
      return weigh(t, mmp::transpose(v[0]), w.transpose());
    }));

    MatX lw = rand_mat(rng, d, k), lb = rand_mat(rng, 1, k);
    MatX lin_w = rand_mat(rng, n, k);
    chk(check_gradients("linear", {a, lw, lb}, [&](auto& t, auto& v) {
      return weigh(t, mmp::linear(v[0], v[1], v[2]), lin_w);
    }));
    MatX row = rand_mat(rng, 1, d);
    chk(check_gradients("rowwise_add", {a, row}, [&](auto& t, auto& v) {
      return weigh(t, mmp::rowwise_add(v[0], v[1]), w);
    }));

    MatX c2 = rand_mat(rng, n, d);
    MatX rows_w = rand_mat(rng, 2 * n, d), cols_w = rand_mat(rng, n, 2 * d);
    chk(check_gradients("concat", {a, c2}, [&](auto& t, auto& v) {
      std::vector<Var<double>> parts = {v[0], v[1]};
      return mmp::add(weigh(t, mmp::concat_rows(parts), rows_w),
                      weigh(t, mmp::concat_cols(parts), cols_w));
    }));

    MatX big = rand_mat(rng, n + 2, d + 2);
    MatX sr_w = rand_mat(rng, n, d + 2), sc_w = rand_mat(rng, n + 2, d);
    chk(check_gradients("block_slice", {big}, [&](auto& t, auto& v) {
      Var<double> bl = mmp::block(v[0], 1, 1, n, d);
      Var<double> sr = mmp::slice_rows(v[0], 0, n);
      Var<double> sc = mmp::slice_cols(v[0], 1, d);
      return mmp::add(weigh(t, bl, w),
                      mmp::add(weigh(t, sr, sr_w), weigh(t, sc, sc_w)));
    }));

    std::vector<Eigen::Index> idx = {n - 1, 0, n - 1};  // duplicates on purpose
    MatX gather_w = rand_mat(rng, 3, d);
    chk(check_gradients("gather", {a}, [&](auto& t, auto& v) {
      return weigh(t, mmp::gather_rows(v[0], idx), gather_w);
    }));
  }

  // Multi-head attention over every learnable tensor, masked and not.
  for (int r = 0; r < reps; ++r) {
    const Eigen::Index D = 4, nq = 2 + rng.uniform_int(2),
                       nk = 2 + rng.uniform_int(3);
    std::vector<MatX> in = {rand_mat(rng, nq, D), rand_mat(rng, nk, D),
                            rand_mat(rng, nk, D), rand_mat(rng, D, D),
                            rand_mat(rng, 1, D),  rand_mat(rng, D, D),
                            rand_mat(rng, 1, D),  rand_mat(rng, D, D),
                            rand_mat(rng, 1, D),  rand_mat(rng, D, D),
                            rand_mat(rng, 1, D)};
    MatX w = rand_mat(rng, nq, D);
    mmp::AttnMask mask(static_cast<std::size_t>(nk), 1);
    if (nk > 1) mask[0] = 0;
    for (int use_mask = 0; use_mask < 2; ++use_mask) {
      chk(check_gradients(
          use_mask ? "attention_masked" : "attention", in,
          [&](auto& t, auto& v) {
            mmp::AttentionVars<double> av{v[3], v[4], v[5], v[6],
                                          v[7], v[8], v[9], v[10]};
            Var<double> out = mmp::multi_head_attention(
                v[0], v[1], v[2], av, 2,
                use_mask ? mask : mmp::AttnMask{});
            return weigh(t, out, w);
          }));
    }
  }
  return all;
}

// Samples parameter coordinates of the full pipeline and compares reverse-
// mode gradients against central differences.
std::string model_gradient_check() {
  mmp::ModelConfig mc;
  mc.hidden = 8;
  mc.heads = 2;
  mc.K = 4;
  mc.M = 2;
  mc.t_future = 5;
  mmp::Model<double> model(mc, 404);

  mmp::SyntheticConfig sc;
  sc.count = 2;
  sc.t_obs = mc.t_obs;
  sc.t_future = mc.t_future;
  mmp::Dataset ds = mmp::generate_synthetic_dataset(sc, 405);
  Scenario norm = mmp::normalize_scenario(ds.scenarios[0]);

  Rng rng(406);
  const int n_heads = mc.social_decoder_layers + 1;
  std::vector<MatX> wt, ws;
  for (int h = 0; h < n_heads; ++h) {
    wt.push_back(rand_mat(rng, mc.K, 2 * mc.t_future, -1, 1));
    ws.push_back(rand_mat(rng, mc.K, 1, -1, 1));
  }
  auto scalarize = [&](mmp::Tape<double>& tape) {
    mmp::ModelOutput<double> out = model.forward(tape, norm);
    Var<double> acc;
    for (int h = 0; h < n_heads; ++h) {
      Var<double> v = mmp::add(weigh(tape, out.heads[h].trajectories, wt[h]),
                               weigh(tape, out.heads[h].scores, ws[h]));
      acc = acc.valid() ? mmp::add(acc, v) : v;
    }
    return acc;
  };

  mmp::Tape<double> tape;
  Var<double> y = scalarize(tape);
  tape.backward(y);
  model.params().zero_grads();
  model.params().accumulate_from(tape, 1.0);

  auto eval = [&]() {
    mmp::Tape<double> t;
    t.set_grad_enabled(false);
    return scalarize(t).scalar();
  };

  const double h = 1e-6;
  int checked = 0;
  auto& store = model.params();
  for (std::size_t p = 0; p < store.size(); ++p) {
    auto& param = store.at(static_cast<int>(p));
    const Eigen::Index n = param.value.size();
    const int samples = n <= 2 ? static_cast<int>(n) : 2;
    for (int s = 0; s < samples; ++s) {
      const Eigen::Index i = static_cast<Eigen::Index>(
          rng.uniform_int(static_cast<std::uint64_t>(n)));
      double* slot = param.value.data() + i;
      const double saved = *slot;
      *slot = saved + h;
      const double up = eval();
      *slot = saved - h;
      const double dn = eval();
      *slot = saved;
      const double fd = (up - dn) / (2 * h);
      const double got = param.grad(i);
      if (std::abs(got - fd) >
          1e-4 * std::max(std::abs(fd), std::abs(got)) + 1e-7) {
        return "pipeline gradient mismatch at " + param.name + "[" +
               std::to_string(i) + "]: reverse " + std::to_string(got) +
               " vs fd " + std::to_string(fd);
      }
      ++checked;
    }
  }
  if (checked < 100) {
    return "only " + std::to_string(checked) + " pipeline coordinates checked";
  }
  return "";
}

std::string criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  int instances = 0;
  GradCheckResult ops = op_gradient_suite(&instances);
  if (instances < 100) {
    return "only " + std::to_string(instances) + " random op instances";
  }
  if (!ops.ok()) {
    return "operation suite: " + ops.failures.front();
  }
  if (ops.coords < 100) {
    return "operation suite covered only " + std::to_string(ops.coords) +
           " coordinates";
  }
  std::string model_fail = model_gradient_check();
  if (!model_fail.empty()) return model_fail;
  const double dt = seconds_since(t0);
  if (dt > 120.0) {
    return "gradient suite took " + std::to_string(dt) + " s (budget 120)";
  }
  std::cerr << "criterion 1: " << instances << " op instances, "
            << ops.coords << " op coordinates, " << dt << " s\n";
  return "";
}

// ---------------------------------------------------------------------------
// Criteria 2 and 3: region training vs vanilla on the synthetic junction.

struct TrainedPair {
  std::unique_ptr<mmp::Model<float>> rts, vanilla;
  mmp::RegionPartition partition;
  mmp::ProposalRegionMap pmap;
  mmp::Dataset val;
  double rts_minutes = 0.0, vanilla_minutes = 0.0;
};

mmp::ModelConfig experiment_config() {
  mmp::ModelConfig mc;
  mc.hidden = 32;
  mc.encoder_layers = 1;
  mc.decoder_layers = 2;
  mc.social_decoder_layers = 4;
  mc.heads = 2;
  mc.K = 36;
  mc.M = 3;
  return mc;
}

TrainedPair run_comparison_experiment(int epochs) {
  TrainedPair out;
  mmp::SyntheticConfig sc;
  sc.count = 3000;
  mmp::Dataset train = mmp::generate_synthetic_dataset(sc, 1001);
  sc.count = 500;
  out.val = mmp::generate_synthetic_dataset(sc, 2001);
  out.val.split = "val";

  std::vector<mmp::Vec2> endpoints;
  endpoints.reserve(train.scenarios.size());
  for (const Scenario& s : train.scenarios) {
    Scenario n = mmp::normalize_scenario(s);
    endpoints.push_back(mmp::future_endpoint(n.future));
  }
  out.partition = mmp::fit_partition(endpoints, 3, 1001);
  out.pmap = mmp::map_proposals_to_regions(36, 3);

  const mmp::ModelConfig mc = experiment_config();
  auto train_one = [&](Strategy st, double* minutes) {
    auto model = std::make_unique<mmp::Model<float>>(mc, 42);
    mmp::TrainConfig tc;
    tc.strategy = st;
    tc.epochs = epochs;
    tc.batch_size = 32;
    tc.seed = 11;
    tc.augment = false;
    mmp::Trainer<float> trainer(
        *model, tc, st == Strategy::kRts ? &out.partition : nullptr);
    const auto t0 = std::chrono::steady_clock::now();
    trainer.fit(train, &std::cerr);
    *minutes = seconds_since(t0) / 60.0;
    std::cerr << mmp::strategy_name(st) << " training took " << *minutes
              << " min\n";
    return model;
  };
  out.rts = train_one(Strategy::kRts, &out.rts_minutes);
  out.vanilla = train_one(Strategy::kVanilla, &out.vanilla_minutes);
  return out;
}

void run_criteria_2_3(std::map<int, std::string>& verdicts, int epochs) {
  TrainedPair tp = run_comparison_experiment(epochs);
  mmp::EvalConfig ec;  // K_out 6, 2 m thresholds

  mmp::SplitEvaluation rts_ev = mmp::evaluate_split(
      *tp.rts, tp.val, ec, &tp.partition, &tp.pmap);
  mmp::SplitEvaluation van_ev = mmp::evaluate_split(*tp.vanilla, tp.val, ec);

  std::cerr << "rts: MR " << rts_ev.report.miss_rate << " minADE "
            << rts_ev.report.min_ade << " minFDE " << rts_ev.report.min_fde
            << " coverage " << rts_ev.mode_coverage << "\n";
  std::cerr << "vanilla: MR " << van_ev.report.miss_rate << " minADE "
            << van_ev.report.min_ade << " minFDE " << van_ev.report.min_fde
            << "\n";

  std::string fail2;
  if (!(rts_ev.report.miss_rate < van_ev.report.miss_rate)) {
    fail2 = "val MR rts " + std::to_string(rts_ev.report.miss_rate) +
            " not strictly below vanilla " +
            std::to_string(van_ev.report.miss_rate);
  } else if (rts_ev.mode_coverage < 0.90) {
    fail2 = "mode coverage " + std::to_string(rts_ev.mode_coverage) +
            " below 0.90";
  } else if (tp.rts_minutes > 45.0 || tp.vanilla_minutes > 45.0) {
    fail2 = "training exceeded the 45 min budget";
  }
  verdicts[2] = fail2;

  const double diag = rts_ev.mr_matrix.mean_diagonal();
  const double off = rts_ev.mr_matrix.mean_off_diagonal();
  std::cerr << "mr matrix mean diagonal " << diag << " off-diagonal " << off
            << "\n"
            << rts_ev.mr_matrix.to_csv();
  std::string fail3;
  if (!rts_ev.has_mr_matrix || std::isnan(diag) || std::isnan(off)) {
    fail3 = "miss-rate matrix not populated";
  } else if (!(diag < off - 0.2)) {
    fail3 = "mean diagonal " + std::to_string(diag) +
            " not below mean off-diagonal " + std::to_string(off) +
            " by 0.2";
  }
  verdicts[3] = fail3;
}

// ---------------------------------------------------------------------------
// Criterion 4: cluster balance over 1000 random point sets.

std::string criterion4() {
  Rng rng(404);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 4 + static_cast<int>(rng.uniform_int(60));
    const int M = 1 + static_cast<int>(rng.uniform_int(
                          static_cast<std::uint64_t>(std::min(n, 8))));
    std::vector<mmp::Vec2> pts;
    for (int i = 0; i < n; ++i) {
      pts.push_back(mmp::Vec2(rng.uniform(-30, 30), rng.uniform(-30, 30)));
    }
    mmp::KMeansResult r = mmp::constrained_kmeans(pts, M, rep);
    std::vector<int> sizes(M, 0);
    for (int a : r.assignment) sizes[a]++;
    const int lo = *std::min_element(sizes.begin(), sizes.end());
    const int hi = *std::max_element(sizes.begin(), sizes.end());
    if (hi - lo > 1) {
      return "set " + std::to_string(rep) + ": cluster sizes differ by " +
             std::to_string(hi - lo);
    }
  }
  return "";
}

// ---------------------------------------------------------------------------
// Criterion 5: invariance and equivariance of the predictor.

struct Captured {
  std::vector<MatX> trajectories, scores;
};

Captured capture(mmp::Model<double>& model, const Scenario& s) {
  mmp::Tape<double> tape;
  tape.set_grad_enabled(false);
  mmp::ModelOutput<double> out = model.forward(tape, s);
  Captured c;
  for (const auto& h : out.heads) {
    c.trajectories.push_back(h.trajectories.value());
    c.scores.push_back(h.scores.value());
  }
  return c;
}

double captured_diff(const Captured& a, const Captured& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
    m = std::max(m,
                 (a.trajectories[i] - b.trajectories[i]).cwiseAbs().maxCoeff());
    m = std::max(m, (a.scores[i] - b.scores[i]).cwiseAbs().maxCoeff());
  }
  return m;
}

std::string criterion5() {
  mmp::ModelConfig mc;
  mc.hidden = 16;
  mc.encoder_layers = 1;
  mc.decoder_layers = 2;
  mc.social_decoder_layers = 4;
  mc.heads = 2;
  mc.K = 6;
  mc.M = 3;
  mc.t_obs = 8;
  mc.t_future = 5;
  mmp::Model<double> model(mc, 505);

  Rng rng(506);
  Scenario s;
  s.id = "invariance";
  s.target_history.points = rand_mat(rng, mc.t_obs, 2, -4, 4);
  s.target_history.points(mc.t_obs - 1, 0) = 0;
  s.target_history.points(mc.t_obs - 1, 1) = 0;
  s.target_history.valid.assign(static_cast<std::size_t>(mc.t_obs), 1);
  for (int v = 0; v < 4; ++v) {
    mmp::VehicleTrack nb;
    nb.points = rand_mat(rng, mc.t_obs, 2, -10, 10);
    nb.valid.assign(static_cast<std::size_t>(mc.t_obs), 1);
    for (int i = 0; i < v; ++i) nb.valid[static_cast<std::size_t>(i)] = 0;
    s.neighbor_histories.push_back(nb);
  }
  for (int l = 0; l < 5; ++l) {
    mmp::MapPolyline pl;
    pl.points = rand_mat(rng, 4, 2, -20, 20);
    s.map_polylines.push_back(pl);
  }
  s.normalized = true;

  Captured base = capture(model, s);
  for (int rep = 0; rep < 5; ++rep) {
    Scenario p = s;
    rng.shuffle(p.neighbor_histories);
    const double d = captured_diff(base, capture(model, p));
    if (d >= 1e-9) {
      return "vehicle-order difference " + std::to_string(d);
    }
    Scenario q = s;
    rng.shuffle(q.map_polylines);
    const double dm = captured_diff(base, capture(model, q));
    if (dm >= 1e-9) {
      return "map-order difference " + std::to_string(dm);
    }
  }

  std::vector<int> perm(static_cast<std::size_t>(mc.K));
  for (int k = 0; k < mc.K; ++k) perm[static_cast<std::size_t>(k)] = k;
  rng.shuffle(perm);
  const int idx = model.params().find("proposal.embed");
  MatX original = model.params().at(idx).value;
  MatX permuted(original.rows(), original.cols());
  for (int k = 0; k < mc.K; ++k) {
    permuted.row(k) = original.row(perm[static_cast<std::size_t>(k)]);
  }
  model.params().at(idx).value = permuted;
  Captured moved = capture(model, s);
  for (std::size_t h = 0; h < base.trajectories.size(); ++h) {
    for (int k = 0; k < mc.K; ++k) {
      int best = -1;
      double best_d = 1e300;
      for (int j = 0; j < mc.K; ++j) {
        const double d = (moved.trajectories[h].row(k) -
                          base.trajectories[h].row(j))
                             .cwiseAbs()
                             .maxCoeff();
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      if (best != perm[static_cast<std::size_t>(k)] || best_d > 1e-9) {
        return "proposal permutation broke at head " + std::to_string(h) +
               " row " + std::to_string(k);
      }
    }
  }
  return "";
}

// ---------------------------------------------------------------------------
// Criterion 6: loss identities.

std::string criterion6() {
  // KL term: matching score and endpoint-distance distributions cost zero.
  {
    mmp::Tape<double> t;
    Points gt(4, 2);
    gt << 0, 1.5, 0, 3, 0, 4.5, 0, 6;
    const std::vector<double> d = {1.0, 2.0, 0.5, 3.0, 1.5};
    MatX traj = MatX::Zero(5, 8);
    MatX sc(5, 1);
    for (int k = 0; k < 5; ++k) {
      traj(k, 6) = 0.0;
      traj(k, 7) = 6.0 + d[static_cast<std::size_t>(k)];
      sc(k, 0) = -d[static_cast<std::size_t>(k)];
    }
    Var<double> kl = mmp::confidence_loss(t.input(sc), t.input(traj),
                                          {0, 1, 2, 3, 4}, gt);
    if (std::abs(kl.scalar()) > 1e-12) {
      return "KL at lambda == tau is " + std::to_string(kl.scalar());
    }
  }
  // Classification: uniform scores price six regions at ln 6.
  {
    mmp::Tape<double> t;
    MatX sc = MatX::Constant(6, 1, 0.25);
    mmp::ProposalRegionMap pmap = mmp::map_proposals_to_regions(6, 6);
    for (int r = 0; r < 6; ++r) {
      Var<double> cls = mmp::classification_loss(t.input(sc), r, pmap);
      if (std::abs(cls.scalar() - std::log(6.0)) > 1e-9) {
        return "uniform classification loss is " +
               std::to_string(cls.scalar());
      }
    }
  }
  // Combination at sigma = 1: parts plus three log-2 regularizers.
  {
    mmp::Tape<double> t;
    auto in = [&](double v) {
      MatX m(1, 1);
      m(0, 0) = v;
      return t.input(m);
    };
    Var<double> total = mmp::total_loss(in(0.31), in(0.07), in(1.9), in(0.0),
                                        in(0.0), in(0.0));
    const double expect = 0.31 + 0.07 + 1.9 + 3.0 * std::log(2.0);
    if (std::abs(total.scalar() - expect) > 1e-12) {
      return "total loss " + std::to_string(total.scalar()) + " vs " +
             std::to_string(expect);
    }
  }
  return "";
}

// ---------------------------------------------------------------------------
// Criterion 7: selection contract on random prediction sets.

std::string criterion7() {
  Rng rng(707);
  for (int rep = 0; rep < 1000; ++rep) {
    const int k = 6 + static_cast<int>(rng.uniform_int(10));
    mmp::Forecast f;
    f.trajectories = rand_mat(rng, k, 8, -15, 15);
    f.scores.resize(k);
    for (int i = 0; i < k; ++i) f.scores(i) = rng.uniform(-3, 3);
    // Occasional near-duplicates force the halving path.
    if (rep % 3 == 0) {
      for (int i = 1; i < k; ++i) {
        f.trajectories.row(i) = f.trajectories.row(0);
      }
    }
    mmp::NmsResult r = mmp::nms_select(f, 2.0, 6);
    if (r.selected.size() != 6) {
      return "set " + std::to_string(rep) + ": selected " +
             std::to_string(r.selected.size());
    }
    mmp::NmsResult again = mmp::nms_select(f, 2.0, 6);
    if (r.selected != again.selected ||
        r.final_threshold != again.final_threshold) {
      return "set " + std::to_string(rep) + ": nondeterministic selection";
    }
    for (std::size_t a = 0; a < r.selected.size(); ++a) {
      for (std::size_t b = a + 1; b < r.selected.size(); ++b) {
        const double d = (f.endpoint(r.selected[a]) -
                          f.endpoint(r.selected[b]))
                             .norm();
        if (d < r.final_threshold) {
          return "set " + std::to_string(rep) + ": separation " +
                 std::to_string(d) + " below tier " +
                 std::to_string(r.final_threshold);
        }
      }
    }
  }
  return "";
}

// ---------------------------------------------------------------------------
// Criterion 8: overfitting ten scenarios.

std::string criterion8() {
  mmp::SyntheticConfig sc;
  sc.count = 10;
  sc.speed_min = 6.8;
  sc.speed_max = 7.2;
  sc.noise_std = 0.005;
  sc.t_future = 15;
  mmp::Dataset ds = mmp::generate_synthetic_dataset(sc, 809);

  std::vector<mmp::Vec2> endpoints;
  for (const mmp::Scenario& s : ds.scenarios) {
    endpoints.push_back(
        mmp::future_endpoint(mmp::normalize_scenario(s).future));
  }
  mmp::RegionPartition part = mmp::fit_partition(endpoints, 10, 808);

  mmp::ModelConfig mc;
  mc.hidden = 32;
  mc.encoder_layers = 1;
  mc.decoder_layers = 1;
  mc.social_decoder_layers = 1;
  mc.heads = 2;
  mc.K = 10;
  mc.M = 10;
  mc.t_future = 15;
  mmp::Model<double> model(mc, 808);

  mmp::TrainConfig tc;
  tc.strategy = Strategy::kRts;
  tc.epochs = 1;
  tc.batch_size = 1;
  tc.seed = 810;
  tc.augment = false;
  tc.optimizer.lr = 2e-3;
  mmp::Trainer<double> trainer(model, tc, &part);
  mmp::TrainConfig fine = tc;
  fine.optimizer.lr = 5e-4;
  mmp::Trainer<double> polish(model, fine, &part);

  mmp::EvalConfig ec;
  ec.k_out = 10;

  double reg = 1e300;
  double mr = 1e300;
  int epoch = 0;
  for (; epoch < 300; ++epoch) {
    mmp::EpochStats st = epoch >= 150 ? polish.train_epoch(ds, epoch)
                                      : trainer.train_epoch(ds, epoch);
    reg = st.reg;
    if (reg < 0.05) {
      mr = mmp::evaluate_split(model, ds, ec).report.miss_rate;
      if (mr == 0.0) break;
    }
    if ((epoch + 1) % 25 == 0) {
      std::cerr << "overfit epoch " << epoch + 1 << " reg " << st.reg
                << " total " << st.training_total << "\n";
    }
  }
  if (reg >= 0.05) {
    return "final-head regression " + std::to_string(reg) +
           " after 300 epochs";
  }
  std::cerr << "overfit reached reg " << reg << " at epoch " << epoch + 1
            << "\n";
  mmp::SplitEvaluation ev = mmp::evaluate_split(model, ds, ec);
  if (ev.report.miss_rate != 0.0) {
    return "overfit miss rate " + std::to_string(ev.report.miss_rate);
  }
  return "";
}

// ---------------------------------------------------------------------------
// Criterion 9: round trips.

std::string criterion9() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mmp_acceptance9";
  fs::create_directories(dir);

  mmp::SyntheticConfig sc;
  sc.count = 20;
  mmp::Dataset ds = mmp::generate_synthetic_dataset(sc, 909);
  const std::string data_path = (dir / "round.jsonl").string();
  mmp::write_dataset(data_path, ds);
  mmp::Dataset back = mmp::read_dataset(data_path);
  if (back.scenarios.size() != ds.scenarios.size()) {
    return "dataset round trip lost scenarios";
  }
  for (std::size_t i = 0; i < ds.scenarios.size(); ++i) {
    if (mmp::scenario_to_json_line(ds.scenarios[i]) !=
        mmp::scenario_to_json_line(back.scenarios[i])) {
      return "dataset round trip changed scenario " + ds.scenarios[i].id;
    }
  }

  for (const Scenario& s : ds.scenarios) {
    Scenario n = mmp::normalize_scenario(s);
    Points hist = mmp::denormalize_trajectory(n.target_history.points,
                                              n.frame);
    const double dh = (hist - s.target_history.points).cwiseAbs().maxCoeff();
    Points fut = mmp::denormalize_trajectory(n.future, n.frame);
    const double df = (fut - s.future).cwiseAbs().maxCoeff();
    if (std::max(dh, df) >= 1e-9) {
      return "normalization round trip error " +
             std::to_string(std::max(dh, df)) + " on " + s.id;
    }
  }

  mmp::ModelConfig mc;
  mc.hidden = 16;
  mc.encoder_layers = 1;
  mc.decoder_layers = 1;
  mc.social_decoder_layers = 2;
  mc.heads = 2;
  mc.K = 6;
  mc.M = 3;
  Scenario probe = mmp::normalize_scenario(ds.scenarios[0]);
  {
    mmp::Model<float> m(mc, 910);
    mmp::Forecast before = mmp::predict(m, probe);
    const std::string p = (dir / "m32.ckpt").string();
    mmp::save_checkpoint(p, m.params(), mmp::CheckpointMeta{});
    mmp::Model<float> r(mc, 911);
    mmp::load_checkpoint(p, r.params());
    mmp::Forecast after = mmp::predict(r, probe);
    if ((before.trajectories - after.trajectories).cwiseAbs().maxCoeff() !=
            0.0 ||
        (before.scores - after.scores).cwiseAbs().maxCoeff() != 0.0) {
      return "float checkpoint forward not bit-identical";
    }
  }
  {
    mmp::Model<double> m(mc, 912);
    mmp::Forecast before = mmp::predict(m, probe);
    const std::string p = (dir / "m64.ckpt").string();
    mmp::save_checkpoint(p, m.params(), mmp::CheckpointMeta{});
    mmp::Model<double> r(mc, 913);
    mmp::load_checkpoint(p, r.params());
    mmp::Forecast after = mmp::predict(r, probe);
    if ((before.trajectories - after.trajectories).cwiseAbs().maxCoeff() !=
            0.0 ||
        (before.scores - after.scores).cwiseAbs().maxCoeff() != 0.0) {
      return "double checkpoint forward not bit-identical";
    }
  }
  fs::remove_all(dir);
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto selected = [&](int n) { return wanted.empty() || wanted.count(n); };

  std::map<int, std::string> verdicts;
  if (selected(1)) verdicts[1] = criterion1();
  if (selected(2) || selected(3)) {
    run_criteria_2_3(verdicts, /*epochs=*/10);
  }
  if (selected(4)) verdicts[4] = criterion4();
  if (selected(5)) verdicts[5] = criterion5();
  if (selected(6)) verdicts[6] = criterion6();
  if (selected(7)) verdicts[7] = criterion7();
  if (selected(8)) verdicts[8] = criterion8();
  if (selected(9)) verdicts[9] = criterion9();

  int failures = 0;
  for (const auto& [n, detail] : verdicts) {
    if (!selected(n)) continue;
    if (detail.empty()) {
      std::cout << "ACCEPTANCE " << n << ": PASS\n";
    } else {
      std::cout << "ACCEPTANCE " << n << ": FAIL (" << detail << ")\n";
      ++failures;
    }
  }
  return failures;
}
