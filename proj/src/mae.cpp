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
#include "vhgm/mae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vhgm {

Json MaeConfig::ToJson() const {
  return {{"d_model", d_model},         {"heads", heads},
          {"ffn_hidden", ffn_hidden},   {"encoder_blocks", encoder_blocks},
          {"decoder_blocks", decoder_blocks}, {"d_y", d_y}};
}

MaeConfig MaeConfig::FromJson(const Json& doc) {
  MaeConfig c;
  c.d_model = doc.value("d_model", c.d_model);
  c.heads = doc.value("heads", c.heads);
  c.ffn_hidden = doc.value("ffn_hidden", c.ffn_hidden);
  c.encoder_blocks = doc.value("encoder_blocks", c.encoder_blocks);
  c.decoder_blocks = doc.value("decoder_blocks", c.decoder_blocks);
  c.d_y = doc.value("d_y", c.d_y);
  if (c.heads < 1 || c.d_model < 1 || c.d_model % c.heads != 0) {
    throw Error(ErrorCode::kInvalidArgument, "mae config: d_model must be a multiple of heads");
  }
  if (c.ffn_hidden < 1 || c.d_y < 1 || c.encoder_blocks < 0 || c.decoder_blocks < 1) {
    throw Error(ErrorCode::kInvalidArgument, "mae config: invalid layer sizes");
  }
  return c;
}

MaeModel::MaeModel(DatasetSchema schema, TrainStats stats, MaeConfig config, uint64_t seed)
    : GenerativeModel(std::move(schema), std::move(stats)), config_(std::move(config)) {
  enc_layout_ = MakeEncodingLayout(schema_);
  out_layout_ = MakeOutputLayout(schema_);
  const int p = schema_.size();
  const int d = config_.d_model;
  ad::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  auto init = [&](int r, int c, double scale) {
    Matrix m(r, c);
    std::normal_distribution<double> n(0.0, scale);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
    return m;
  };
  tok_weight_ = &params_.add("tok.weight", init(enc_layout_.total, d, 1.0));
  tok_bias_ = &params_.add("tok.bias", init(p, d, 0.02));
  tok_pos_ = &params_.add("tok.pos", init(p, d, 1.0));
  mask_token_ = &params_.add("tok.mask", init(1, d, 0.02));
  null_token_ = &params_.add("tok.null", init(1, d, 1.0));
  auto make_block = [&](const std::string& name, bool cross) {
    AttentionBlock b;
    b.ln_q = ad::make_layer_norm(params_, name + ".ln_q", d);
    if (cross) b.ln_kv = ad::make_layer_norm(params_, name + ".ln_kv", d);
    b.wq = ad::make_linear(params_, name + ".wq", d, d, rng);
    b.wk = ad::make_linear(params_, name + ".wk", d, d, rng);
    b.wv = ad::make_linear(params_, name + ".wv", d, d, rng);
    b.wo = ad::make_linear(params_, name + ".wo", d, d, rng);
    b.ln_ffn = ad::make_layer_norm(params_, name + ".ln_ffn", d);
    b.ffn = ad::make_mlp(params_, name + ".ffn", d, {config_.ffn_hidden}, d, rng);
    return b;
  };
  for (int b = 0; b < config_.encoder_blocks; ++b) {
    encoder_.push_back(make_block("enc." + std::to_string(b), false));
  }
  for (int b = 0; b < config_.decoder_blocks; ++b) {
    decoder_.push_back(make_block("dec." + std::to_string(b), true));
  }
  final_ln_ = ad::make_layer_norm(params_, "dec_y.ln", d);
  dec_y_ = ad::make_linear(params_, "dec_y.fc", d, config_.d_y, rng);
  ad::Linear heads = ad::make_linear(params_, "heads", config_.d_y, out_layout_.total, rng);
  head_weight_ = heads.w;
  head_bias_ = heads.b;
}

// value-times-column-vector embedding: token t of column j is the encoded
// cell block of j times rows [offset_j, offset_j + width_j) of the weight.
ad::Var MaeModel::EmbedObserved(ad::Tape& t, const Matrix& values, const Tokens& tok) const {
  const int n = static_cast<int>(tok.rows.size());
  const int d = config_.d_model;
  ad::Var w = t.param(*tok_weight_);
  const Matrix& W = w.value();
  Matrix out(n, d);
  for (int k = 0; k < n; ++k) {
    const int j = tok.cols[k];
    const int off = enc_layout_.offsets[j], width = enc_layout_.widths[j];
    out.row(k) = values.row(tok.rows[k]).segment(off, width) * W.middleRows(off, width);
  }
  const int iw = w.id();
  ad::Var lin = t.push(std::move(out), {iw}, [iw, values, tok, this](ad::Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    Matrix& gw = tp.grad_buffer(iw);
    for (size_t k = 0; k < tok.rows.size(); ++k) {
      const int j = tok.cols[k];
      const int off = enc_layout_.offsets[j], width = enc_layout_.widths[j];
      gw.middleRows(off, width).noalias() +=
          values.row(tok.rows[k]).segment(off, width).transpose() * g.row(k);
    }
  });
  ad::Var bias = ad::gather_rows(t.param(*tok_bias_), tok.cols);
  ad::Var pos = ad::gather_rows(t.param(*tok_pos_), tok.cols);
  return ad::add(ad::add(lin, bias), pos);
}

ad::Var MaeModel::MaskQueries(ad::Tape& t, const Tokens& tok) const {
  return ad::add_row(ad::gather_rows(t.param(*tok_pos_), tok.cols), t.param(*mask_token_));
}

double MaeModel::GroupFlops(const std::vector<ad::AttentionGroup>& groups) const {
  double f = 0.0;
  for (const auto& g : groups) {
    // Scores and the weighted value sum, summed over heads.
    f += 2.0 * static_cast<double>(g.q_rows.size()) * static_cast<double>(g.k_rows.size()) *
         config_.d_model;
  }
  return f;
}

ad::Var MaeModel::RunEncoder(ad::Tape& t, ad::Var h, const std::vector<ad::AttentionGroup>& groups,
                             double* flops) const {
  for (const auto& b : encoder_) {
    ad::Var a = b.ln_q(t, h);
    ad::Var att = ad::grouped_attention(b.wq(t, a), b.wk(t, a), b.wv(t, a), groups, config_.heads);
    h = ad::add(h, b.wo(t, att));
    h = ad::add(h, b.ffn(t, b.ln_ffn(t, h)));
    if (flops) *flops += GroupFlops(groups);
  }
  return h;
}

ad::Var MaeModel::RunDecoder(ad::Tape& t, ad::Var h, const ad::Var& memory,
                             const std::vector<ad::AttentionGroup>& groups, double* flops) const {
  for (const auto& b : decoder_) {
    ad::Var kv = b.ln_kv(t, memory);
    ad::Var att = ad::grouped_attention(b.wq(t, b.ln_q(t, h)), b.wk(t, kv), b.wv(t, kv), groups,
                                        config_.heads);
    h = ad::add(h, b.wo(t, att));
    h = ad::add(h, b.ffn(t, b.ln_ffn(t, h)));
    if (flops) *flops += GroupFlops(groups);
  }
  return h;
}

ad::Var MaeModel::CommonDecoder(ad::Tape& t, const ad::Var& h) const {
  return ad::relu(dec_y_(t, final_ln_(t, h)));
}

ad::Var MaeModel::ScatterHeads(ad::Tape& t, const ad::Var& y, const Tokens& tok,
                               int n_rows) const {
  ad::Var w = t.param(*head_weight_);
  ad::Var b = t.param(*head_bias_);
  const Matrix& Y = y.value();
  const Matrix& W = w.value();
  const Matrix& B = b.value();
  Matrix out = Matrix::Zero(n_rows, out_layout_.total);
  for (size_t k = 0; k < tok.rows.size(); ++k) {
    const int j = tok.cols[k];
    const int off = out_layout_.offsets[j], width = out_layout_.widths[j];
    out.row(tok.rows[k]).segment(off, width) =
        Y.row(k) * W.middleCols(off, width) + B.middleCols(off, width);
  }
  const int iy = y.id(), iw = w.id(), ib = b.id();
  return t.push(std::move(out), {iy, iw, ib}, [iy, iw, ib, tok, this](ad::Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    const Matrix& Yv = tp.value(iy);
    const Matrix& Wv = tp.value(iw);
    Matrix& gw = tp.grad_buffer(iw);
    Matrix& gb = tp.grad_buffer(ib);
    const bool need_y = tp.requires_grad(iy);
    Matrix* gy = need_y ? &tp.grad_buffer(iy) : nullptr;
    for (size_t k = 0; k < tok.rows.size(); ++k) {
      const int j = tok.cols[k];
      const int off = out_layout_.offsets[j], width = out_layout_.widths[j];
      const auto gk = g.row(tok.rows[k]).segment(off, width);
      gw.middleCols(off, width).noalias() += Yv.row(k).transpose() * gk;
      gb.middleCols(off, width) += gk;
      if (need_y) gy->row(k).noalias() += gk * Wv.middleCols(off, width).transpose();
    }
  });
}

MaeModel::Graph MaeModel::Forward(ad::Tape& t, const PreprocessedBatch& batch,
                                  const std::vector<int>& scope) const {
  const int n = static_cast<int>(batch.flags.rows());
  const int p = schema_.size();
  if (batch.flags.cols() != p || batch.values.cols() != enc_layout_.total) {
    throw Error(ErrorCode::kDimensionMismatch, "mae batch does not match the schema");
  }
  std::vector<char> in_scope(p, scope.empty() ? 1 : 0);
  for (int j : scope) in_scope.at(j) = 1;

  Tokens obs, qry;
  std::vector<ad::AttentionGroup> enc_groups, dec_groups;
  std::vector<std::vector<int>> row_obs(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      if (batch.flags(i, j) != 0.0) {
        row_obs[i].push_back(static_cast<int>(obs.rows.size()));
        obs.rows.push_back(i);
        obs.cols.push_back(j);
      }
    }
    if (!row_obs[i].empty()) enc_groups.push_back({row_obs[i], row_obs[i], {}});
  }
  const int null_row = static_cast<int>(obs.rows.size());
  for (int i = 0; i < n; ++i) {
    ad::AttentionGroup g;
    for (int j = 0; j < p; ++j) {
      if (batch.flags(i, j) == 0.0 && in_scope[j]) {
        g.q_rows.push_back(static_cast<int>(qry.rows.size()));
        qry.rows.push_back(i);
        qry.cols.push_back(j);
      }
    }
    if (g.q_rows.empty()) continue;
    g.k_rows = row_obs[i];
    g.k_rows.push_back(null_row);
    dec_groups.push_back(std::move(g));
  }

  Graph out;
  ad::Var null = t.param(*null_token_);
  ad::Var memory = null;
  if (!obs.rows.empty()) {
    ad::Var enc = RunEncoder(t, EmbedObserved(t, batch.values, obs), enc_groups,
                             &out.attention_flops);
    memory = ad::concat_rows({enc, null});
  }
  if (qry.rows.empty()) {
    out.outputs = t.constant(Matrix::Zero(n, out_layout_.total));
    return out;
  }
  ad::Var h = RunDecoder(t, MaskQueries(t, qry), memory, dec_groups, &out.attention_flops);
  out.outputs = ScatterHeads(t, CommonDecoder(t, h), qry, n);
  return out;
}

Matrix MaeModel::Tokenize(const RowVector& raw, std::vector<int>* columns) const {
  const PreprocessedBatch b = Preprocess(raw);
  Tokens obs, miss;
  for (int j = 0; j < schema_.size(); ++j) {
    Tokens& dst = b.flags(0, j) != 0.0 ? obs : miss;
    dst.rows.push_back(0);
    dst.cols.push_back(j);
  }
  ad::Tape t(false);
  std::vector<ad::Var> parts;
  if (!obs.rows.empty()) parts.push_back(EmbedObserved(t, b.values, obs));
  if (!miss.rows.empty()) parts.push_back(MaskQueries(t, miss));
  if (columns) {
    *columns = obs.cols;
    columns->insert(columns->end(), miss.cols.begin(), miss.cols.end());
  }
  return ad::concat_rows(parts).value();
}

namespace {

struct RowTokens {
  std::vector<int> observed;
  std::vector<int> missing;
};

RowTokens SplitRow(const PreprocessedBatch& b) {
  RowTokens r;
  for (Eigen::Index j = 0; j < b.flags.cols(); ++j) {
    (b.flags(0, j) != 0.0 ? r.observed : r.missing).push_back(static_cast<int>(j));
  }
  return r;
}

std::vector<int> Iota(int n) {
  std::vector<int> v(n);
  for (int k = 0; k < n; ++k) v[k] = k;
  return v;
}

}  // namespace

Matrix MaeModel::EncodeRow(const RowVector& raw) const {
  const PreprocessedBatch b = Preprocess(raw);
  const RowTokens rt = SplitRow(b);
  if (rt.observed.empty()) return Matrix(0, config_.d_model);
  ad::Tape t(false);
  Tokens obs{std::vector<int>(rt.observed.size(), 0), rt.observed};
  const std::vector<int> idx = Iota(static_cast<int>(rt.observed.size()));
  return RunEncoder(t, EmbedObserved(t, b.values, obs), {{idx, idx, {}}}, nullptr).value();
}

Matrix MaeModel::DecodeRow(const RowVector& raw, const std::vector<int>& query_columns) const {
  const PreprocessedBatch b = Preprocess(raw);
  const RowTokens rt = SplitRow(b);
  const int n_obs = static_cast<int>(rt.observed.size());
  Matrix out = Matrix::Constant(1, out_layout_.total, std::numeric_limits<double>::quiet_NaN());
  ad::Tape t(false);
  ad::Var null = t.param(*null_token_);
  ad::Var memory = null;
  if (n_obs > 0) {
    Tokens obs{std::vector<int>(n_obs, 0), rt.observed};
    const std::vector<int> idx = Iota(n_obs);
    ad::Var enc = RunEncoder(t, EmbedObserved(t, b.values, obs), {{idx, idx, {}}}, nullptr);
    memory = ad::concat_rows({enc, null});
    const Matrix rec = ScatterHeads(t, CommonDecoder(t, enc), obs, 1).value();
    for (int j : rt.observed) {
      const int off = out_layout_.offsets[j], w = out_layout_.widths[j];
      out.middleCols(off, w) = rec.middleCols(off, w);
    }
  }
  const std::vector<int> keys = Iota(n_obs + 1);
  for (int j : query_columns) {
    if (j < 0 || j >= schema_.size() || b.flags(0, j) != 0.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "query column " + std::to_string(j) + " is not a missing column");
    }
    // Each query is decoded on its own so its result cannot depend on the
    // other queries.
    Tokens q{{0}, {j}};
    ad::Var h = RunDecoder(t, MaskQueries(t, q), memory, {{{0}, keys, {}}}, nullptr);
    const Matrix o = ScatterHeads(t, CommonDecoder(t, h), q, 1).value();
    const int off = out_layout_.offsets[j], w = out_layout_.widths[j];
    out.middleCols(off, w) = o.middleCols(off, w);
  }
  return out;
}

std::vector<ParamsRow> MaeModel::Impute(const Matrix& raw) const {
  RequireTrained();
  if (raw.cols() != schema_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "mae input has the wrong number of columns");
  }
  constexpr Eigen::Index kChunk = 256;
  std::vector<ParamsRow> rows;
  rows.reserve(raw.rows());
  for (Eigen::Index start = 0; start < raw.rows(); start += kChunk) {
    const Eigen::Index m = std::min(kChunk, raw.rows() - start);
    const PreprocessedBatch b = PreprocessRows(raw.middleRows(start, m), stats_, schema_);
    ad::Tape t(false);
    Matrix out = Forward(t, b, {}).outputs.value();
    // Observed columns are read back from their encoded tokens.
    Tokens obs;
    std::vector<ad::AttentionGroup> groups;
    for (int i = 0; i < m; ++i) {
      std::vector<int> idx;
      for (int j = 0; j < schema_.size(); ++j) {
        if (b.flags(i, j) != 0.0) {
          idx.push_back(static_cast<int>(obs.rows.size()));
          obs.rows.push_back(i);
          obs.cols.push_back(j);
        }
      }
      if (!idx.empty()) groups.push_back({idx, idx, {}});
    }
    if (!obs.rows.empty()) {
      ad::Var enc = RunEncoder(t, EmbedObserved(t, b.values, obs), groups, nullptr);
      out += ScatterHeads(t, CommonDecoder(t, enc), obs, static_cast<int>(m)).value();
    }
    for (ParamsRow& r : ParamsFromOutputs(out, schema_, stats_, true)) rows.push_back(std::move(r));
  }
  return rows;
}

Checkpoint MaeModel::ToCheckpoint() const {
  Checkpoint c;
  c.model_kind = kind();
  c.schema = schema_;
  c.config = config_.ToJson();
  c.stats = stats_;
  c.parameters = SnapshotParameters(params_);
  return c;
}

std::unique_ptr<MaeModel> MaeModel::FromCheckpoint(const Checkpoint& ckpt) {
  if (ckpt.model_kind != "mae") {
    throw Error(ErrorCode::kCheckpointMismatch, "checkpoint holds a '" + ckpt.model_kind +
                                                    "' model, expected 'mae'");
  }
  auto m = std::make_unique<MaeModel>(ckpt.schema, ckpt.stats, MaeConfig::FromJson(ckpt.config), 0);
  LoadParameters(ckpt, m->params_);
  m->set_trained(true);
  return m;
}

}  // namespace vhgm
