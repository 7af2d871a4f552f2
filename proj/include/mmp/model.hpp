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

// The stacked-transformer predictor. K learnable proposal embeddings are
// refined in sequence against three context channels: each vehicle's motion
// history (motion extractor), the vectorized map (map aggregator), and the
// pooled per-vehicle features (social constructor). Prediction heads after
// each social decoder layer, plus a separate final head, decode proposal
// features into K trajectories and K raw confidence scores.

#pragma once

#include <string>
#include <vector>

#include "mmp/nn.hpp"
#include "mmp/scenario.hpp"

namespace mmp {

struct ModelConfig {
  int hidden = 128;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int social_decoder_layers = 4;
  int heads = 2;
  int K = 36;
  int M = 6;
  int t_obs = 20;
  int t_future = 30;
  int ffn_mult = 2;
  double map_window = 65.0;
  bool skip_first_self_attention = true;

  void validate() const {
    if (hidden < 1 || heads < 1 || hidden % heads != 0) {
      throw ConfigError("hidden_dim must be a positive multiple of heads");
    }
    if (K < 1 || M < 1 || K % M != 0) {
      throw ConfigError("K must be a positive multiple of M");
    }
    if (encoder_layers < 1 || decoder_layers < 1 ||
        social_decoder_layers < 1) {
      throw ConfigError("layer counts must be >= 1");
    }
    if (t_obs < 1 || t_future < 1) throw ConfigError("t_obs and t_future must be >= 1");
    if (ffn_mult < 1) throw ConfigError("ffn_mult must be >= 1");
  }

  std::string to_json_text() const;
  static ModelConfig from_json_text(const std::string& text);
};

template <class S>
struct HeadOutput {
  Var<S> trajectories;  // K x 2T, row k = (x1, y1, ..., xT, yT)
  Var<S> scores;        // K x 1 raw selector outputs
};

template <class S>
struct ModelOutput {
  // Intermediate heads in decoder-layer order, then the final head last.
  std::vector<HeadOutput<S>> heads;

  const HeadOutput<S>& final_head() const { return heads.back(); }
};

// Per-step history featurization: (x, y, valid) with coordinates zeroed at
// invalid steps.
inline constexpr int kHistoryFeatures = 3;
// Per-vector map featurization: (sx, sy, ex, ey, dx, dy, tag).
inline constexpr int kMapVectorFeatures = 7;

template <class S>
struct PredictionHead {
  MlpBlock<S> generator;
  MlpBlock<S> selector;

  PredictionHead() = default;
  PredictionHead(ParamStore<S>& store, const std::string& prefix,
                 Eigen::Index hidden, Eigen::Index t_future, Rng& rng)
      : generator(store, prefix + ".gen",
                  {hidden, hidden, hidden, 2 * t_future}, rng),
        selector(store, prefix + ".sel", {hidden, hidden, hidden, 1}, rng) {}

  HeadOutput<S> decode(Binding<S>& p, const Var<S>& features) const {
    return {generator.apply(p, features), selector.apply(p, features)};
  }
};

template <class S>
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed)
      : cfg_(config), seed_(seed) {
    cfg_.validate();
    Rng rng(seed);
    const Eigen::Index h = cfg_.hidden;
    const Eigen::Index ffn = h * cfg_.ffn_mult;

    input_proj_ = LinearLayer<S>(params_, "hist.proj", kHistoryFeatures, h, rng);
    temporal_pos_ = params_.add_xavier("hist.pos", cfg_.t_obs, h, rng);
    proposal_embed_ = params_.add_xavier("proposal.embed", cfg_.K, h, rng);

    for (int i = 0; i < cfg_.encoder_layers; ++i) {
      motion_enc_.emplace_back(params_, "motion.enc" + std::to_string(i), h,
                               ffn, cfg_.heads, rng);
    }
    for (int i = 0; i < cfg_.decoder_layers; ++i) {
      const bool skip = i == 0 && cfg_.skip_first_self_attention;
      motion_dec_.emplace_back(params_, "motion.dec" + std::to_string(i), h,
                               ffn, cfg_.heads, rng, skip);
    }

    map_vec_mlp_ = MlpBlock<S>(params_, "map.vec",
                               {kMapVectorFeatures, h, h}, rng);
    for (int i = 0; i < cfg_.encoder_layers; ++i) {
      map_enc_.emplace_back(params_, "map.enc" + std::to_string(i), h, ffn,
                            cfg_.heads, rng);
    }
    for (int i = 0; i < cfg_.decoder_layers; ++i) {
      map_dec_.emplace_back(params_, "map.dec" + std::to_string(i), h, ffn,
                            cfg_.heads, rng);
    }

    vehicle_mlp_ = MlpBlock<S>(params_, "social.pool", {h, h, h}, rng);
    target_flag_ = params_.add_zeros("social.target_flag", 1, h);
    for (int i = 0; i < cfg_.encoder_layers; ++i) {
      social_enc_.emplace_back(params_, "social.enc" + std::to_string(i), h,
                               ffn, cfg_.heads, rng);
    }
    for (int i = 0; i < cfg_.social_decoder_layers; ++i) {
      social_dec_.emplace_back(params_, "social.dec" + std::to_string(i), h,
                               ffn, cfg_.heads, rng);
      heads_.emplace_back(params_, "head.layer" + std::to_string(i), h,
                          cfg_.t_future, rng);
    }
    heads_.emplace_back(params_, "head.final", h, cfg_.t_future, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }

  // Runs the full pipeline on a normalized scenario. Every social decoder
  // layer contributes one intermediate head output; the final head (its own
  // weights) reads the last layer's features.
  ModelOutput<S> forward(Tape<S>& tape, const Scenario& scenario) {
    if (!scenario.normalized) {
      throw ContractError("forward requires a normalized scenario");
    }
    Binding<S> p(tape, params_);
    const Var<S> qpos = p[proposal_embed_];
    const Var<S> tpos = p[temporal_pos_];
    const Var<S> none;  // absent positional encoding / bias

    // Motion extractor: per-vehicle proposal features. Target first.
    std::vector<Var<S>> vehicle_props;
    encode_vehicle(p, scenario.target_history, qpos, tpos, true,
                   vehicle_props);
    for (const VehicleTrack& nb : scenario.neighbor_histories) {
      encode_vehicle(p, nb, qpos, tpos, false, vehicle_props);
    }

    // Map aggregator: shared polyline memory, cross-attended per vehicle.
    // An empty crop leaves every vehicle's proposals untouched.
    PolylineSet ps = crop_and_vectorize_map(scenario, cfg_.map_window);
    if (!ps.vectors.empty()) {
      Var<S> map_mem = encode_polylines(p, ps);
      for (Var<S>& props : vehicle_props) {
        for (const DecoderLayerBlock<S>& layer : map_dec_) {
          props = layer.apply(p, props, qpos, map_mem, none);
        }
      }
    }

    // Social constructor: pool each vehicle's proposals, mark the target,
    // self-attend over the vehicle set, then refine the target's proposals.
    std::vector<Var<S>> features;
    for (std::size_t v = 0; v < vehicle_props.size(); ++v) {
      Var<S> f = vehicle_mlp_.apply(p, mean_rows(vehicle_props[v]));
      if (v == 0) f = add(f, p[target_flag_]);
      features.push_back(f);
    }
    Var<S> vehicles = features.size() == 1 ? features[0]
                                           : concat_rows(features);
    for (const EncoderLayerBlock<S>& layer : social_enc_) {
      vehicles = layer.apply(p, vehicles, none);
    }

    ModelOutput<S> out;
    Var<S> y = vehicle_props[0];
    for (std::size_t i = 0; i < social_dec_.size(); ++i) {
      y = social_dec_[i].apply(p, y, qpos, vehicles, none);
      out.heads.push_back(heads_[i].decode(p, y));
    }
    out.heads.push_back(heads_.back().decode(p, y));
    return out;
  }

 private:
  // History encoder + proposal decoder for one vehicle. Vehicles with no
  // valid step are skipped (the target must have one).
  void encode_vehicle(Binding<S>& p, const VehicleTrack& track,
                      const Var<S>& qpos, const Var<S>& tpos, bool is_target,
                      std::vector<Var<S>>& out) {
    if (track.steps() != cfg_.t_obs) {
      throw ShapeError("vehicle history length " +
                       std::to_string(track.steps()) +
                       " does not match configured t_obs " +
                       std::to_string(cfg_.t_obs));
    }
    if (track.valid_count() == 0) {
      if (is_target) throw ContractError("target history has no valid step");
      return;
    }
    Tape<S>& tape = p.tape();
    Mat<S> feats = Mat<S>::Zero(cfg_.t_obs, kHistoryFeatures);
    AttnMask mask(static_cast<std::size_t>(cfg_.t_obs), 0);
    for (int i = 0; i < cfg_.t_obs; ++i) {
      if (!track.valid[i]) continue;
      feats(i, 0) = static_cast<S>(track.points(i, 0));
      feats(i, 1) = static_cast<S>(track.points(i, 1));
      feats(i, 2) = S(1);
      mask[i] = 1;
    }
    Var<S> h = input_proj_.apply(p, tape.input(std::move(feats)));
    for (const EncoderLayerBlock<S>& layer : motion_enc_) {
      h = layer.apply(p, h, tpos, mask);
    }
    Var<S> props = qpos;
    for (const DecoderLayerBlock<S>& layer : motion_dec_) {
      props = layer.apply(p, props, qpos, h, tpos, mask);
    }
    out.push_back(props);
  }

  // Shared per-vector MLP, max-pooled per polyline, then self-attention over
  // the polyline set.
  Var<S> encode_polylines(Binding<S>& p, const PolylineSet& ps) {
    Tape<S>& tape = p.tape();
    const Eigen::Index n = static_cast<Eigen::Index>(ps.vectors.size());
    Mat<S> feats(n, kMapVectorFeatures);
    for (Eigen::Index i = 0; i < n; ++i) {
      const PolyVector& v = ps.vectors[i];
      feats(i, 0) = static_cast<S>(v.start.x());
      feats(i, 1) = static_cast<S>(v.start.y());
      feats(i, 2) = static_cast<S>(v.end.x());
      feats(i, 3) = static_cast<S>(v.end.y());
      feats(i, 4) = static_cast<S>(v.end.x() - v.start.x());
      feats(i, 5) = static_cast<S>(v.end.y() - v.start.y());
      feats(i, 6) = static_cast<S>(v.tag_code);
    }
    Var<S> encoded = map_vec_mlp_.apply(p, tape.input(std::move(feats)));
    std::vector<Var<S>> pooled;
    for (int poly = 0; poly < ps.polyline_count; ++poly) {
      std::vector<Eigen::Index> rows;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (ps.vectors[i].polyline == poly) rows.push_back(i);
      }
      pooled.push_back(colwise_max(gather_rows(encoded, std::move(rows))));
    }
    Var<S> mem = pooled.size() == 1 ? pooled[0] : concat_rows(pooled);
    const Var<S> none;
    for (const EncoderLayerBlock<S>& layer : map_enc_) {
      mem = layer.apply(p, mem, none);
    }
    return mem;
  }

  ModelConfig cfg_;
  std::uint64_t seed_ = 0;
  ParamStore<S> params_;

  LinearLayer<S> input_proj_;
  int temporal_pos_ = -1;
  int proposal_embed_ = -1;
  std::vector<EncoderLayerBlock<S>> motion_enc_;
  std::vector<DecoderLayerBlock<S>> motion_dec_;
  MlpBlock<S> map_vec_mlp_;
  std::vector<EncoderLayerBlock<S>> map_enc_;
  std::vector<DecoderLayerBlock<S>> map_dec_;
  MlpBlock<S> vehicle_mlp_;
  int target_flag_ = -1;
  std::vector<EncoderLayerBlock<S>> social_enc_;
  std::vector<DecoderLayerBlock<S>> social_dec_;
  std::vector<PredictionHead<S>> heads_;
};

}  // namespace mmp
