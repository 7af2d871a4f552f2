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

#include "mmp/run_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mmp {

namespace {

using nlohmann::json;

json train_to_json(const TrainConfig& t) {
  return json{{"strategy", strategy_name(t.strategy)},
              {"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"seed", t.seed},
              {"augment", t.augment},
              {"augment_flip_prob", t.augment_cfg.p_flip},
              {"augment_mask_prob", t.augment_cfg.p_mask},
              {"lr", t.optimizer.lr},
              {"beta1", t.optimizer.beta1},
              {"beta2", t.optimizer.beta2},
              {"adam_eps", t.optimizer.eps},
              {"weight_decay", t.optimizer.weight_decay},
              {"clip_norm", t.optimizer.clip_norm}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.strategy = strategy_from_name(j.value("strategy", "rts"));
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.seed = j.value("seed", t.seed);
  t.augment = j.value("augment", t.augment);
  t.augment_cfg.p_flip = j.value("augment_flip_prob", t.augment_cfg.p_flip);
  t.augment_cfg.p_mask = j.value("augment_mask_prob", t.augment_cfg.p_mask);
  t.optimizer.lr = j.value("lr", t.optimizer.lr);
  t.optimizer.beta1 = j.value("beta1", t.optimizer.beta1);
  t.optimizer.beta2 = j.value("beta2", t.optimizer.beta2);
  t.optimizer.eps = j.value("adam_eps", t.optimizer.eps);
  t.optimizer.weight_decay = j.value("weight_decay", t.optimizer.weight_decay);
  t.optimizer.clip_norm = j.value("clip_norm", t.optimizer.clip_norm);
  return t;
}

}  // namespace

void RunConfig::validate() const {
  if (precision != "f32" && precision != "f64") {
    throw ConfigError("precision must be f32 or f64, got '" + precision + "'");
  }
  if (partition_method != "kmeans" && partition_method != "fan") {
    throw ConfigError("partition method must be kmeans or fan, got '" +
                      partition_method + "'");
  }
  model.validate();
  train.validate();
  if (eval.k_out < 1) throw ConfigError("k_out must be >= 1");
  if (eval.nms_threshold_m < 0.0) {
    throw ConfigError("nms threshold must be >= 0");
  }
  if (eval.miss_threshold_m < 0.0) {
    throw ConfigError("miss threshold must be >= 0");
  }
}

std::string RunConfig::to_json_text() const {
  json j;
  j["dataset"] = dataset;
  j["partition"] = partition;
  j["checkpoint"] = checkpoint;
  j["out"] = out;
  j["seed"] = seed;
  j["precision"] = precision;
  j["split"] = split;
  j["partition_method"] = partition_method;
  j["model"] = json::parse(model.to_json_text());
  j["train"] = train_to_json(train);
  j["eval"] = json{{"k_out", eval.k_out},
                   {"nms_threshold_m", eval.nms_threshold_m},
                   {"miss_threshold_m", eval.miss_threshold_m}};
  j["synthetic"] = json::parse(synthetic.to_json_text());
  return j.dump(2);
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("run config: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("run config: top level must be an object");
  RunConfig c;
  c.dataset = j.value("dataset", c.dataset);
  c.partition = j.value("partition", c.partition);
  c.checkpoint = j.value("checkpoint", c.checkpoint);
  c.out = j.value("out", c.out);
  c.seed = j.value("seed", c.seed);
  c.precision = j.value("precision", c.precision);
  c.split = j.value("split", c.split);
  c.partition_method = j.value("partition_method", c.partition_method);
  if (j.contains("model")) c.model = ModelConfig::from_json_text(j["model"].dump());
  if (j.contains("train")) c.train = train_from_json(j["train"]);
  if (j.contains("eval")) {
    const json& e = j["eval"];
    c.eval.k_out = e.value("k_out", c.eval.k_out);
    c.eval.nms_threshold_m = e.value("nms_threshold_m", c.eval.nms_threshold_m);
    c.eval.miss_threshold_m =
        e.value("miss_threshold_m", c.eval.miss_threshold_m);
  }
  if (j.contains("synthetic")) {
    c.synthetic = SyntheticConfig::from_json_text(j["synthetic"].dump());
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return RunConfig::from_json_text(buf.str());
}

}  // namespace mmp
