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

#include "mmp/model.hpp"

#include <json.hpp>

namespace mmp {

using json = nlohmann::json;

std::string ModelConfig::to_json_text() const {
  json j;
  j["hidden"] = hidden;
  j["encoder_layers"] = encoder_layers;
  j["decoder_layers"] = decoder_layers;
  j["social_decoder_layers"] = social_decoder_layers;
  j["heads"] = heads;
  j["K"] = K;
  j["M"] = M;
  j["t_obs"] = t_obs;
  j["t_future"] = t_future;
  j["ffn_mult"] = ffn_mult;
  j["map_window"] = map_window;
  j["skip_first_self_attention"] = skip_first_self_attention;
  return j.dump();
}

ModelConfig ModelConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("model config: malformed JSON (" + std::string(e.what()) +
                     ")");
  }
  ModelConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
  c.social_decoder_layers =
      j.value("social_decoder_layers", c.social_decoder_layers);
  c.heads = j.value("heads", c.heads);
  c.K = j.value("K", c.K);
  c.M = j.value("M", c.M);
  c.t_obs = j.value("t_obs", c.t_obs);
  c.t_future = j.value("t_future", c.t_future);
  c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
  c.map_window = j.value("map_window", c.map_window);
  c.skip_first_self_attention =
      j.value("skip_first_self_attention", c.skip_first_self_attention);
  c.validate();
  return c;
}

}  // namespace mmp
