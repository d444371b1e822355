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
#ifndef VHGM_MAE_HPP_
#define VHGM_MAE_HPP_

#include <memory>
#include <vector>

#include "vhgm/model.hpp"

namespace vhgm {

struct MaeConfig {
  int d_model = 96;
  int heads = 4;
  int ffn_hidden = 384;
  int encoder_blocks = 2;
  int decoder_blocks = 2;
  int d_y = 384;

  int head_dim() const { return d_model / heads; }
  Json ToJson() const;
  static MaeConfig FromJson(const Json& doc);
};

// Transformer imputer. Observed cells become tokens that run through the
// encoder; missing columns are decoded by mask-token queries that
// cross-attend only to encoded observed tokens plus a learned null-context
// token, never to each other.
class MaeModel : public GenerativeModel {
 public:
  MaeModel(DatasetSchema schema, TrainStats stats, MaeConfig config, uint64_t seed);

  std::string kind() const override { return "mae"; }
  const MaeConfig& config() const { return config_; }

  struct Graph {
    // n x OutputLayout.total; blocks of unqueried observed cells are zero.
    ad::Var outputs;
    // Multiply-adds spent on attention scores and weighted sums.
    double attention_flops = 0.0;
  };
  // Batched training pass. Missing columns inside `scope` (all columns when
  // empty) are decoded as queries.
  Graph Forward(ad::Tape& tape, const PreprocessedBatch& batch,
                const std::vector<int>& scope) const;

  // Token embeddings for one row: observed tokens first (column order), then
  // mask tokens for the missing columns. Rows follow `columns`.
  Matrix Tokenize(const RowVector& raw, std::vector<int>* columns) const;
  // Encoder output for the observed tokens of one row (column order).
  Matrix EncodeRow(const RowVector& raw) const;
  // Model-space head outputs for one row (1 x OutputLayout.total): observed
  // columns from their encoded tokens, each listed missing column from its
  // own query. Other blocks are NaN.
  Matrix DecodeRow(const RowVector& raw, const std::vector<int>& query_columns) const;

  std::vector<ParamsRow> Impute(const Matrix& raw) const override;

  Checkpoint ToCheckpoint() const override;
  static std::unique_ptr<MaeModel> FromCheckpoint(const Checkpoint& ckpt);

 private:
  struct AttentionBlock {
    ad::LayerNorm ln_q;
    ad::LayerNorm ln_kv;
    ad::Linear wq, wk, wv, wo;
    ad::LayerNorm ln_ffn;
    ad::Mlp ffn;
  };
  struct Tokens {
    std::vector<int> rows;
    std::vector<int> cols;
  };

  ad::Var EmbedObserved(ad::Tape& t, const Matrix& values, const Tokens& tok) const;
  ad::Var MaskQueries(ad::Tape& t, const Tokens& tok) const;
  ad::Var RunEncoder(ad::Tape& t, ad::Var h, const std::vector<ad::AttentionGroup>& groups,
                     double* flops) const;
  ad::Var RunDecoder(ad::Tape& t, ad::Var h, const ad::Var& memory,
                     const std::vector<ad::AttentionGroup>& groups, double* flops) const;
  ad::Var CommonDecoder(ad::Tape& t, const ad::Var& h) const;
  ad::Var ScatterHeads(ad::Tape& t, const ad::Var& y, const Tokens& tok, int n_rows) const;
  double GroupFlops(const std::vector<ad::AttentionGroup>& groups) const;

  MaeConfig config_;
  EncodingLayout enc_layout_;
  OutputLayout out_layout_;
  ad::Parameter* tok_weight_ = nullptr;
  ad::Parameter* tok_bias_ = nullptr;
  ad::Parameter* tok_pos_ = nullptr;
  ad::Parameter* mask_token_ = nullptr;
  ad::Parameter* null_token_ = nullptr;
  std::vector<AttentionBlock> encoder_;
  std::vector<AttentionBlock> decoder_;
  ad::LayerNorm final_ln_;
  ad::Linear dec_y_;
  ad::Parameter* head_weight_ = nullptr;
  ad::Parameter* head_bias_ = nullptr;
};

}  // namespace vhgm

#endif  // VHGM_MAE_HPP_
