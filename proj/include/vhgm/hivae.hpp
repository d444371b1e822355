/* Copyright 2026 The VHGM Authors. All Rights Reserved.

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
#ifndef VHGM_HIVAE_HPP_
#define VHGM_HIVAE_HPP_

#include <memory>
#include <utility>
#include <vector>

#include "vhgm/model.hpp"

namespace vhgm {

struct HivaeConfig {
  int d_s = 83;
  int d_z = 57;
  int d_y_shared = 370;
  int d_y_specific = 5;
  std::vector<int> hidden = {850, 850};
  double gumbel_temperature = 1.0;
  // Deterministic path feeds pi_s ("probabilities") or argmax ("one_hot").
  std::string deterministic_s_mode = "probabilities";

  Json ToJson() const;
  static HivaeConfig FromJson(const Json& doc);
};

enum class EncodeMode { kStochastic, kDeterministic };

// Per-row latent quantities, one row per input row.
struct EncoderState {
  Matrix pi_s;
  Matrix s;
  Matrix mu_z;
  Matrix sigma2_z;
  Matrix z;
};

class HivaeModel : public GenerativeModel {
 public:
  HivaeModel(DatasetSchema schema, TrainStats stats, HivaeConfig config, uint64_t seed);

  std::string kind() const override { return "hivae"; }
  const HivaeConfig& config() const { return config_; }
  // Width of the encoder input: encoded values plus p flags.
  int input_dim() const { return input_dim_; }

  // Recorded forward pass over model inputs ([values, flags] rows).
  struct Graph {
    ad::Var pi_s;
    ad::Var log_pi_s;
    ad::Var s;
    ad::Var mu_z;
    ad::Var sigma2_z;
    ad::Var z;
    ad::Var prior_mu_z;
    ad::Var outputs;
  };
  Graph Forward(ad::Tape& tape, const Matrix& input, EncodeMode mode, ad::Rng* rng) const;
  // Batch sums of KL(q(s|x) || uniform) and KL(q(z|s,x) || N(dec_z(s), I)).
  ad::Var KlS(const Graph& g) const;
  ad::Var KlZ(const Graph& g) const;

  static Matrix InputMatrix(const PreprocessedBatch& batch);

  // Throws DimensionMismatch when `input` has the wrong width.
  EncoderState Encode(const Matrix& input, EncodeMode mode, ad::Rng* rng) const;
  // Packed head outputs for given latents.
  Matrix DecodeOutputs(const EncoderState& state) const;
  // Model-space distributions.
  std::vector<ParamsRow> Decode(const EncoderState& state) const;
  // Attribute heads driven directly by (s, y) with y = [y_shared, y_1..y_p].
  Matrix HeadOutputs(const Matrix& s, const Matrix& y) const;
  // Per-row (kl_s, kl_z).
  std::vector<std::pair<double, double>> KlTerms(const EncoderState& state) const;

  std::vector<ParamsRow> Impute(const Matrix& raw) const override;
  // Latent-variable sampling: `n` stochastic encoder passes for one row.
  std::vector<ParamsRow> ImputeSamples(const RowVector& raw, int n, ad::Rng& rng) const;

  Checkpoint ToCheckpoint() const override;
  static std::unique_ptr<HivaeModel> FromCheckpoint(const Checkpoint& ckpt);

 private:
  ad::Var Heads(ad::Tape& tape, const ad::Var& s, const ad::Var& y) const;

  HivaeConfig config_;
  OutputLayout out_layout_;
  int input_dim_ = 0;
  ad::Mlp enc_s_;
  ad::Mlp enc_z_;
  ad::Linear dec_z_;
  ad::Mlp dec_y_;
  ad::Parameter* head_shared_ = nullptr;
  ad::Parameter* head_specific_ = nullptr;
  ad::Parameter* head_bias_ = nullptr;
};

}  // namespace vhgm

#endif  // VHGM_HIVAE_HPP_
