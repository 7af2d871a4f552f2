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

// mmpred: command-line pipeline for multimodal trajectory prediction.
// Subcommands: gen-data, fit-partition, train, eval, predict, plot.
// Exit codes: 0 success, 1 usage error, 2 config error, 3 runtime error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmp/checkpoint.hpp"
#include "mmp/dataset_io.hpp"
#include "mmp/evaluation.hpp"
#include "mmp/model.hpp"
#include "mmp/partition.hpp"
#include "mmp/run_config.hpp"
#include "mmp/svg_plot.hpp"
#include "mmp/synthetic.hpp"
#include "mmp/trainer.hpp"

namespace {

using nlohmann::json;

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> dataset;
  std::optional<std::string> partition;
  std::optional<std::string> checkpoint;
  std::optional<std::string> out;
  std::optional<std::string> strategy;
  std::optional<std::string> split;
  std::optional<std::string> precision;
  std::optional<std::string> method;
  std::optional<std::uint64_t> seed;
  std::optional<int> k;
  std::optional<int> m;
  std::optional<int> epochs;
  std::optional<int> count;
  std::optional<double> miss_threshold;
  std::optional<double> nms_threshold;
};

mmp::RunConfig resolve(const Flags& f) {
  mmp::RunConfig rc;
  if (f.config) {
    try {
      rc = mmp::load_run_config(*f.config);
    } catch (const mmp::ConfigError&) {
      throw;
    } catch (const mmp::Error& e) {
      throw mmp::ConfigError("config file " + *f.config + ": " + e.what());
    }
  }
  if (f.dataset) rc.dataset = *f.dataset;
  if (f.partition) rc.partition = *f.partition;
  if (f.checkpoint) rc.checkpoint = *f.checkpoint;
  if (f.out) rc.out = *f.out;
  if (f.seed) rc.seed = *f.seed;
  if (f.strategy) rc.train.strategy = mmp::strategy_from_name(*f.strategy);
  if (f.split) rc.split = *f.split;
  if (f.precision) rc.precision = *f.precision;
  if (f.method) rc.partition_method = *f.method;
  if (f.k) rc.model.K = *f.k;
  if (f.m) rc.model.M = *f.m;
  if (f.epochs) rc.train.epochs = *f.epochs;
  if (f.count) rc.synthetic.count = *f.count;
  if (f.miss_threshold) rc.eval.miss_threshold_m = *f.miss_threshold;
  if (f.nms_threshold) rc.eval.nms_threshold_m = *f.nms_threshold;
  rc.train.seed = rc.seed;
  return rc;
}

void require_setting(const std::string& value, const std::string& name) {
  if (value.empty()) {
    throw mmp::ConfigError("missing required setting: " + name);
  }
}

void require_input_file(const std::string& path, const std::string& name) {
  if (!std::filesystem::exists(path)) {
    throw mmp::ConfigError(name + " does not exist: " + path);
  }
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw mmp::IoError("cannot open for writing: " + tmp);
    out << text;
    if (!out) throw mmp::IoError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <class S>
struct LoadedModel {
  mmp::CheckpointMeta meta;
  std::unique_ptr<mmp::Model<S>> model;
};

template <class S>
LoadedModel<S> load_model(const std::string& path) {
  const mmp::CheckpointMeta meta = mmp::peek_checkpoint_meta(path);
  const mmp::ModelConfig mc =
      mmp::ModelConfig::from_json_text(meta.model_config_json);
  LoadedModel<S> lm{meta, std::make_unique<mmp::Model<S>>(mc, meta.seed)};
  // Checkpoints carry the loss-balance parameters attached during training.
  mmp::LossWeights<S>::attach(lm.model->params());
  mmp::load_checkpoint<S>(path, lm.model->params());
  return lm;
}

// Runs fn with a float or double tag matching the checkpoint's stored width.
template <class Fn>
int with_checkpoint_precision(const std::string& path, Fn&& fn) {
  const std::uint32_t bytes = mmp::checkpoint_scalar_bytes(path);
  if (bytes == 4) return fn(float{});
  if (bytes == 8) return fn(double{});
  throw mmp::ConfigError("unsupported checkpoint scalar width: " +
                         std::to_string(bytes));
}

int cmd_gen_data(const Flags& f) {
  mmp::RunConfig rc = resolve(f);
  rc.validate();
  require_setting(rc.out, "out (--out)");
  const mmp::Dataset dataset =
      mmp::generate_synthetic_dataset(rc.synthetic, rc.seed, rc.split);
  mmp::write_dataset(rc.out, dataset);
  std::cout << "wrote " << dataset.scenarios.size() << " scenarios to "
            << rc.out << "\n";
  return 0;
}

int cmd_fit_partition(const Flags& f) {
  mmp::RunConfig rc = resolve(f);
  rc.validate();
  require_setting(rc.out, "out (--out)");
  if (rc.partition_method == "fan") {
    mmp::RegionPartition p = mmp::manual_fan_partition(rc.model.M);
    mmp::write_partition(rc.out, p);
    std::cout << "wrote fan partition with M=" << p.M << " to " << rc.out
              << "\n";
    return 0;
  }
  require_setting(rc.dataset, "dataset (--dataset)");
  require_input_file(rc.dataset, "dataset");
  const mmp::Dataset dataset = mmp::read_dataset(rc.dataset);
  std::vector<mmp::Vec2> endpoints;
  for (const mmp::Scenario& raw : dataset.scenarios) {
    if (!raw.has_future()) continue;
    const mmp::Scenario s = mmp::normalize_scenario(raw);
    endpoints.push_back(s.future.row(s.future.rows() - 1).transpose());
  }
  if (endpoints.empty()) {
    throw mmp::ConfigError("dataset has no ground-truth futures: " +
                           rc.dataset);
  }
  mmp::RegionPartition p = mmp::fit_partition(endpoints, rc.model.M, rc.seed);
  mmp::write_partition(rc.out, p);
  std::cout << "fit K-means partition with M=" << p.M << " on "
            << endpoints.size() << " endpoints, wrote " << rc.out << "\n";
  return 0;
}

template <class S>
int run_train(const mmp::RunConfig& rc) {
  const mmp::Dataset dataset = mmp::read_dataset(rc.dataset);
  std::unique_ptr<mmp::RegionPartition> partition;
  mmp::ModelConfig mc = rc.model;
  if (!rc.partition.empty()) {
    partition =
        std::make_unique<mmp::RegionPartition>(mmp::read_partition(rc.partition));
    mc.M = partition->M;
  }
  mc.validate();
  mmp::Model<S> model(mc, rc.seed);
  mmp::Trainer<S> trainer(model, rc.train, partition.get());
  trainer.fit(dataset, &std::cout);
  mmp::CheckpointMeta meta;
  meta.model_config_json = mc.to_json_text();
  meta.seed = rc.seed;
  meta.partition_ref = rc.partition;
  meta.strategy = mmp::strategy_name(rc.train.strategy);
  mmp::save_checkpoint(rc.checkpoint, model.params(), meta);
  std::cout << "saved checkpoint to " << rc.checkpoint << "\n";
  return 0;
}

int cmd_train(const Flags& f) {
  mmp::RunConfig rc = resolve(f);
  rc.validate();
  require_setting(rc.dataset, "dataset (--dataset)");
  require_setting(rc.checkpoint, "checkpoint (--checkpoint)");
  if (rc.train.strategy == mmp::Strategy::kRts && rc.partition.empty()) {
    throw mmp::ConfigError(
        "strategy=rts requires a region partition (--partition)");
  }
  require_input_file(rc.dataset, "dataset");
  if (!rc.partition.empty()) require_input_file(rc.partition, "partition");
  if (rc.precision == "f32") return run_train<float>(rc);
  return run_train<double>(rc);
}

int cmd_eval(const Flags& f) {
  mmp::RunConfig rc = resolve(f);
  rc.validate();
  require_setting(rc.dataset, "dataset (--dataset)");
  require_setting(rc.checkpoint, "checkpoint (--checkpoint)");
  require_setting(rc.out, "out (--out)");
  require_input_file(rc.dataset, "dataset");
  require_input_file(rc.checkpoint, "checkpoint");
  if (!rc.partition.empty()) require_input_file(rc.partition, "partition");
  return with_checkpoint_precision(rc.checkpoint, [&](auto tag) {
    using S = decltype(tag);
    LoadedModel<S> lm = load_model<S>(rc.checkpoint);
    const mmp::Dataset dataset = mmp::read_dataset(rc.dataset);
    std::unique_ptr<mmp::RegionPartition> partition;
    std::unique_ptr<mmp::ProposalRegionMap> pmap;
    if (!rc.partition.empty()) {
      partition = std::make_unique<mmp::RegionPartition>(
          mmp::read_partition(rc.partition));
      pmap = std::make_unique<mmp::ProposalRegionMap>(
          mmp::map_proposals_to_regions(lm.model->config().K, partition->M));
    }
    const mmp::SplitEvaluation ev = mmp::evaluate_split(
        *lm.model, dataset, rc.eval, partition.get(), pmap.get());

    std::filesystem::create_directories(rc.out);
    json report;
    report["seed"] = lm.meta.seed;
    report["strategy"] = lm.meta.strategy;
    report["model_config"] = json::parse(lm.meta.model_config_json);
    report["eval"] = {{"k_out", rc.eval.k_out},
                     {"nms_threshold_m", rc.eval.nms_threshold_m},
                     {"miss_threshold_m", rc.eval.miss_threshold_m},
                     {"dataset", rc.dataset}};
    report["metrics"] = json::parse(ev.report.to_json_text());
    json hit_rates = json::object();
    for (const auto& [label, rate] : ev.mode_hit_rate) {
      hit_rates[std::to_string(label)] = rate;
    }
    report["mode_hit_rate"] = hit_rates;
    report["mode_coverage"] = ev.mode_coverage;
    const std::string report_path =
        (std::filesystem::path(rc.out) / "metrics.json").string();
    write_text_atomic(report_path, report.dump(2) + "\n");
    std::cout << "wrote " << report_path << "\n";
    if (ev.has_mr_matrix) {
      std::string csv = "# seed=" + std::to_string(lm.meta.seed) +
                        " strategy=" + lm.meta.strategy +
                        " k_out=" + std::to_string(rc.eval.k_out) + "\n" +
                        ev.mr_matrix.to_csv();
      const std::string csv_path =
          (std::filesystem::path(rc.out) / "mr_matrix.csv").string();
      write_text_atomic(csv_path, csv);
      std::cout << "wrote " << csv_path << "\n";
    }
    std::cout << "minADE=" << ev.report.min_ade
              << " minFDE=" << ev.report.min_fde
              << " MR=" << ev.report.miss_rate
              << " coverage=" << ev.mode_coverage << "\n";
    return 0;
  });
}

int cmd_predict(const Flags& f) {
  mmp::RunConfig rc = resolve(f);
  rc.validate();
  require_setting(rc.dataset, "dataset (--dataset)");
  require_setting(rc.checkpoint, "checkpoint (--checkpoint)");
  require_setting(rc.out, "out (--out)");
  require_input_file(rc.dataset, "dataset");
  require_input_file(rc.checkpoint, "checkpoint");
  return with_checkpoint_precision(rc.checkpoint, [&](auto tag) {
    using S = decltype(tag);
    LoadedModel<S> lm = load_model<S>(rc.checkpoint);
    const mmp::Dataset dataset = mmp::read_dataset(rc.dataset);
    std::ostringstream out;
    json meta;
    meta["meta"] = {{"seed", lm.meta.seed},
                    {"strategy", lm.meta.strategy},
                    {"model_config", json::parse(lm.meta.model_config_json)},
                    {"k_out", rc.eval.k_out},
                    {"nms_threshold_m", rc.eval.nms_threshold_m}};
    out << meta.dump() << "\n";
    for (const mmp::Scenario& raw : dataset.scenarios) {
      const mmp::Scenario s = mmp::normalize_scenario(raw);
      const mmp::Forecast fc = mmp::predict(*lm.model, s);
      const mmp::NmsResult nms =
          mmp::nms_select(fc, rc.eval.nms_threshold_m, rc.eval.k_out);
      const Eigen::VectorXd conf = fc.confidences();
      json rec;
      rec["id"] = s.id;
      json trajs = json::array();
      json confs = json::array();
      for (int k : nms.selected) {
        mmp::Points local(fc.steps(), 2);
        for (int t = 0; t < fc.steps(); ++t) {
          local.row(t) = fc.point(k, t).transpose();
        }
        const mmp::Points world = mmp::denormalize_trajectory(local, s.frame);
        json pts = json::array();
        for (int t = 0; t < world.rows(); ++t) {
          pts.push_back({world(t, 0), world(t, 1)});
        }
        trajs.push_back(pts);
        confs.push_back(conf(k));
      }
      rec["trajectories"] = trajs;
      rec["confidences"] = confs;
      out << rec.dump() << "\n";
    }
    write_text_atomic(rc.out, out.str());
    std::cout << "wrote predictions for " << dataset.scenarios.size()
              << " scenarios to " << rc.out << "\n";
    return 0;
  });
}

int cmd_plot(const Flags& f) {
  mmp::RunConfig rc = resolve(f);
  rc.validate();
  require_setting(rc.dataset, "dataset (--dataset)");
  require_setting(rc.checkpoint, "checkpoint (--checkpoint)");
  require_setting(rc.partition, "partition (--partition)");
  require_setting(rc.out, "out (--out)");
  require_input_file(rc.dataset, "dataset");
  require_input_file(rc.checkpoint, "checkpoint");
  require_input_file(rc.partition, "partition");
  return with_checkpoint_precision(rc.checkpoint, [&](auto tag) {
    using S = decltype(tag);
    LoadedModel<S> lm = load_model<S>(rc.checkpoint);
    const mmp::Dataset dataset = mmp::read_dataset(rc.dataset);
    const mmp::RegionPartition partition = mmp::read_partition(rc.partition);
    const mmp::ProposalRegionMap pmap =
        mmp::map_proposals_to_regions(lm.model->config().K, partition.M);
    std::vector<mmp::Forecast> cases;
    for (const mmp::Scenario& raw : dataset.scenarios) {
      cases.push_back(mmp::predict(*lm.model, mmp::normalize_scenario(raw)));
    }
    mmp::EndpointPlotConfig cfg;
    cfg.annotation = "seed=" + std::to_string(lm.meta.seed) +
                     " strategy=" + lm.meta.strategy +
                     " model_config=" + lm.meta.model_config_json;
    mmp::write_endpoint_plot(rc.out, cases, partition, pmap, cfg);
    std::cout << "wrote endpoint plot for " << cases.size() << " scenarios to "
              << rc.out << "\n";
    return 0;
  });
}

void add_common_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--seed", f.seed, "Root random seed");
  cmd->add_option("--config", f.config, "JSON run config file");
  cmd->add_option("--dataset", f.dataset, "Dataset JSONL path");
  cmd->add_option("--partition", f.partition, "Region partition JSON path");
  cmd->add_option("--checkpoint", f.checkpoint, "Model checkpoint path");
  cmd->add_option("--out", f.out, "Output path");
  cmd->add_option("--strategy", f.strategy, "Training strategy: vanilla or rts");
  cmd->add_option("--k", f.k, "Number of trajectory proposals");
  cmd->add_option("--m", f.m, "Number of regions");
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--miss-threshold", f.miss_threshold,
                  "Miss-rate endpoint threshold in meters");
  cmd->add_option("--nms-threshold", f.nms_threshold,
                  "Trajectory NMS endpoint threshold in meters");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal motion prediction pipeline"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  add_common_flags(gen, f);
  gen->add_option("--count", f.count, "Number of scenarios");
  gen->add_option("--split", f.split, "Split name recorded in the dataset");

  CLI::App* fitp =
      app.add_subcommand("fit-partition", "Fit or construct a region partition");
  add_common_flags(fitp, f);
  fitp->add_option("--method", f.method, "Partition method: kmeans or fan");

  CLI::App* train = app.add_subcommand("train", "Train a model");
  add_common_flags(train, f);
  train->add_option("--precision", f.precision, "Model precision: f32 or f64");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common_flags(eval, f);

  CLI::App* predict =
      app.add_subcommand("predict", "Write multimodal trajectory predictions");
  add_common_flags(predict, f);

  CLI::App* plot = app.add_subcommand("plot", "Render an endpoint scatter SVG");
  add_common_flags(plot, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  std::string stage = "run";
  try {
    if (gen->parsed()) {
      stage = "gen-data";
      return cmd_gen_data(f);
    }
    if (fitp->parsed()) {
      stage = "fit-partition";
      return cmd_fit_partition(f);
    }
    if (train->parsed()) {
      stage = "train";
      return cmd_train(f);
    }
    if (eval->parsed()) {
      stage = "eval";
      return cmd_eval(f);
    }
    if (predict->parsed()) {
      stage = "predict";
      return cmd_predict(f);
    }
    if (plot->parsed()) {
      stage = "plot";
      return cmd_plot(f);
    }
    std::cerr << "mmpred: no command given\n";
    return 1;
  } catch (const mmp::ConfigError& e) {
    std::cerr << "mmpred " << stage << ": config error: " << e.what() << "\n";
    return 2;
  } catch (const mmp::Error& e) {
    std::cerr << "mmpred " << stage << ": error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "mmpred " << stage << ": error: " << e.what() << "\n";
    return 3;
  }
}
