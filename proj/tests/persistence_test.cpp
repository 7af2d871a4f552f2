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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "mmp/checkpoint.hpp"
#include "mmp/evaluation.hpp"
#include "mmp/synthetic.hpp"
#include "mmp/trainer.hpp"

namespace {

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

mmp::ModelConfig tiny_config() {
  mmp::ModelConfig mc;
  mc.hidden = 8;
  mc.encoder_layers = 1;
  mc.decoder_layers = 1;
  mc.social_decoder_layers = 2;
  mc.heads = 2;
  mc.K = 4;
  mc.M = 2;
  mc.t_obs = 6;
  mc.t_future = 5;
  return mc;
}

mmp::Scenario sample_scenario(std::uint64_t seed) {
  mmp::SyntheticConfig sc;
  sc.count = 1;
  sc.t_obs = 6;
  sc.t_future = 5;
  mmp::Dataset ds = mmp::generate_synthetic_dataset(sc, seed);
  return mmp::normalize_scenario(ds.scenarios[0]);
}

// Nudges every parameter off its init so a reload has something nontrivial
// to reproduce.
template <class S>
void scramble(mmp::ParamStore<S>& store, std::uint64_t seed) {
  mmp::Rng rng(seed);
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& v = store.at(static_cast<int>(i)).value;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        v(r, c) += static_cast<S>(rng.uniform(-0.05, 0.05));
      }
    }
  }
}

}  // namespace

TEST_CASE("a reloaded double checkpoint reproduces the forward pass bitwise") {
  const std::string path = temp_file("mmp_ckpt_f64.bin");
  mmp::ModelConfig mc = tiny_config();
  mmp::Scenario s = sample_scenario(7);

  mmp::Model<double> model(mc, 5);
  scramble(model.params(), 31);
  mmp::Forecast before = mmp::predict(model, s);

  mmp::CheckpointMeta meta;
  meta.model_config_json = mc.to_json_text();
  meta.seed = 5;
  meta.strategy = "vanilla";
  meta.partition_ref = "partitions/p.json";
  mmp::save_checkpoint(path, model.params(), meta);

  mmp::Model<double> fresh(mc, 99);  // different init, then overwritten
  mmp::CheckpointMeta back = mmp::load_checkpoint(path, fresh.params());
  mmp::Forecast after = mmp::predict(fresh, s);

  CHECK((before.trajectories - after.trajectories).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((before.scores - after.scores).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.seed == meta.seed);
  CHECK(back.strategy == meta.strategy);
  CHECK(back.partition_ref == meta.partition_ref);
  mmp::ModelConfig rc = mmp::ModelConfig::from_json_text(back.model_config_json);
  CHECK(rc.K == mc.K);
  CHECK(rc.hidden == mc.hidden);
  std::remove(path.c_str());
}

TEST_CASE("a reloaded float checkpoint reproduces the forward pass bitwise") {
  const std::string path = temp_file("mmp_ckpt_f32.bin");
  mmp::ModelConfig mc = tiny_config();
  mmp::Scenario s = sample_scenario(8);

  mmp::Model<float> model(mc, 6);
  scramble(model.params(), 32);
  mmp::Forecast before = mmp::predict(model, s);
  mmp::save_checkpoint(path, model.params(), mmp::CheckpointMeta{});

  CHECK(mmp::checkpoint_scalar_bytes(path) == 4);

  mmp::Model<float> fresh(mc, 77);
  mmp::load_checkpoint(path, fresh.params());
  mmp::Forecast after = mmp::predict(fresh, s);
  CHECK((before.trajectories - after.trajectories).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((before.scores - after.scores).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("scalar width mismatches are refused") {
  const std::string path = temp_file("mmp_ckpt_width.bin");
  mmp::ModelConfig mc = tiny_config();
  mmp::Model<float> model(mc, 9);
  mmp::save_checkpoint(path, model.params(), mmp::CheckpointMeta{});

  mmp::Model<double> wide(mc, 9);
  CHECK_THROWS_AS(mmp::load_checkpoint(path, wide.params()),
                  mmp::ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("only checkpoint files are accepted") {
  const std::string path = temp_file("mmp_ckpt_magic.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "definitely not a checkpoint, but long enough to read";
  }
  mmp::ModelConfig mc = tiny_config();
  mmp::Model<double> model(mc, 10);
  CHECK_THROWS_AS(mmp::load_checkpoint(path, model.params()),
                  mmp::ParseError);
  std::remove(path.c_str());

  CHECK_THROWS_AS(mmp::load_checkpoint(temp_file("mmp_ckpt_missing.bin"),
                                       model.params()),
                  mmp::IoError);
}

TEST_CASE("structural mismatches name the problem") {
  const std::string path = temp_file("mmp_ckpt_struct.bin");
  mmp::ModelConfig mc = tiny_config();
  mmp::Model<double> model(mc, 11);
  mmp::save_checkpoint(path, model.params(), mmp::CheckpointMeta{});

  // Different parameter count.
  mmp::ModelConfig deeper = mc;
  deeper.social_decoder_layers = 3;
  mmp::Model<double> other(deeper, 11);
  CHECK_THROWS_AS(mmp::load_checkpoint(path, other.params()),
                  mmp::ConfigError);

  // Same parameter count pattern but different shapes.
  mmp::ModelConfig wider = mc;
  wider.hidden = 16;
  mmp::Model<double> wide(wider, 11);
  CHECK_THROWS_AS(mmp::load_checkpoint(path, wide.params()),
                  mmp::ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("truncated checkpoints are detected") {
  const std::string path = temp_file("mmp_ckpt_trunc.bin");
  mmp::ModelConfig mc = tiny_config();
  mmp::Model<double> model(mc, 12);
  mmp::save_checkpoint(path, model.params(), mmp::CheckpointMeta{});
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full / 2);
  mmp::Model<double> fresh(mc, 12);
  CHECK_THROWS_AS(mmp::load_checkpoint(path, fresh.params()),
                  mmp::ParseError);
  std::remove(path.c_str());
}

TEST_CASE("checkpoints carry the loss balance parameters from training") {
  const std::string path = temp_file("mmp_ckpt_train.bin");
  mmp::ModelConfig mc = tiny_config();
  mc.t_obs = 12;
  mmp::Model<double> model(mc, 13);
  mmp::TrainConfig tc;
  tc.epochs = 1;
  tc.seed = 3;
  tc.augment = false;
  mmp::RegionPartition fan = mmp::manual_fan_partition(mc.M);
  mmp::Trainer<double> trainer(model, tc, &fan);
  mmp::SyntheticConfig sc;
  sc.count = 3;
  sc.t_obs = 12;
  sc.t_future = 5;
  mmp::Dataset ds = mmp::generate_synthetic_dataset(sc, 14);
  trainer.fit(ds, nullptr);
  mmp::save_checkpoint(path, model.params(), mmp::CheckpointMeta{});

  // A bare model misses the three attached loss scalars.
  mmp::Model<double> bare(mc, 13);
  CHECK_THROWS_AS(mmp::load_checkpoint(path, bare.params()),
                  mmp::ConfigError);

  // Attaching the loss weights first makes the load well-formed.
  mmp::Model<double> ready(mc, 13);
  mmp::LossWeights<double>::attach(ready.params());
  CHECK_NOTHROW(mmp::load_checkpoint(path, ready.params()));
  const int idx = ready.params().find("loss.u_reg");
  REQUIRE(idx >= 0);
  CHECK(ready.params().at(idx).value(0, 0) ==
        model.params().at(model.params().find("loss.u_reg")).value(0, 0));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint meta text survives a round trip") {
  const std::string path = temp_file("mmp_ckpt_meta.bin");
  mmp::ModelConfig mc = tiny_config();
  mmp::Model<float> model(mc, 15);
  mmp::CheckpointMeta meta;
  meta.seed = 123456789;
  meta.strategy = "rts";
  meta.partition_ref = "some/dir/partition.json";
  meta.model_config_json = mc.to_json_text();
  mmp::save_checkpoint(path, model.params(), meta);

  mmp::CheckpointMeta peeked = mmp::peek_checkpoint_meta(path);
  CHECK(peeked.seed == meta.seed);
  CHECK(peeked.strategy == meta.strategy);
  CHECK(peeked.partition_ref == meta.partition_ref);
  CHECK(peeked.model_config_json == meta.model_config_json);
  std::remove(path.c_str());
}
