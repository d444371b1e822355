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
#include "vhgm/hivae.hpp"

#include <cmath>

namespace vhgm {

Json HivaeConfig::ToJson() const {
  return {{"d_s", d_s},
          {"d_z", d_z},
          {"d_y_shared", d_y_shared},
          {"d_y_specific", d_y_specific},
          {"hidden", hidden},
          {"gumbel_temperature", gumbel_temperature},
          {"deterministic_s_mode", deterministic_s_mode}};
}

HivaeConfig HivaeConfig::FromJson(const Json& doc) {
  HivaeConfig c;
  c.d_s = doc.value("d_s", c.d_s);
  c.d_z = doc.value("d_z", c.d_z);
  c.d_y_shared = doc.value("d_y_shared", c.d_y_shared);
  c.d_y_specific = doc.value("d_y_specific", c.d_y_specific);
  c.hidden = doc.value("hidden", c.hidden);
  c.gumbel_temperature = doc.value("gumbel_temperature", c.gumbel_temperature);
  c.deterministic_s_mode = doc.value("deterministic_s_mode", c.deterministic_s_mode);
  if (c.d_s < 1 || c.d_z < 1 || c.d_y_shared < 1 || c.d_y_specific < 1 ||
      !(c.gumbel_temperature > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "hivae config: dimensions must be >= 1");
  }
  if (c.deterministic_s_mode != "probabilities" && c.deterministic_s_mode != "one_hot") {
    throw Error(ErrorCode::kInvalidArgument,
                "hivae config: unknown deterministic_s_mode '" + c.deterministic_s_mode + "'");
  }
  return c;
}

HivaeModel::HivaeModel(DatasetSchema schema, TrainStats stats, HivaeConfig config, uint64_t seed)
    : GenerativeModel(std::move(schema), std::move(stats)), config_(std::move(config)) {
  out_layout_ = MakeOutputLayout(schema_);
  const int p = schema_.size();
  input_dim_ = MakeEncodingLayout(schema_).total + p;
  const auto& c = config_;
  ad::Rng rng(seed);
  enc_s_ = ad::make_mlp(params_, "enc_s", input_dim_, c.hidden, c.d_s, rng);
  enc_z_ = ad::make_mlp(params_, "enc_z", input_dim_ + c.d_s, c.hidden, 2 * c.d_z, rng);
  dec_z_ = ad::make_linear(params_, "dec_z", c.d_s, c.d_z, rng);
  dec_y_ = ad::make_mlp(params_, "dec_y", c.d_s + c.d_z, c.hidden,
                        c.d_y_shared + p * c.d_y_specific, rng);
  ad::Linear shared = ad::make_linear(params_, "head_shared", c.d_s + c.d_y_shared,
                                      out_layout_.total, rng);
  head_shared_ = shared.w;
  head_bias_ = shared.b;
  const double bound = std::sqrt(6.0 / (c.d_y_specific + out_layout_.total));
  std::uniform_real_distribution<double> unif(-bound, bound);
  Matrix w(c.d_y_specific, out_layout_.total);
  for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = unif(rng);
  head_specific_ = &params_.add("head_specific.weight", std::move(w));
}

Matrix HivaeModel::InputMatrix(const PreprocessedBatch& batch) {
  Matrix x(batch.values.rows(), batch.values.cols() + batch.flags.cols());
  x << batch.values, batch.flags;
  return x;
}

ad::Var HivaeModel::Heads(ad::Tape& t, const ad::Var& s, const ad::Var& y) const {
  const int p = schema_.size();
  ad::Var y_shared = ad::slice_cols(y, 0, config_.d_y_shared);
  ad::Var y_spec = ad::slice_cols(y, config_.d_y_shared, p * config_.d_y_specific);
  ad::Var shared = ad::matmul(ad::concat_cols({s, y_shared}), t.param(*head_shared_));
  ad::Var specific = ad::block_linear(y_spec, t.param(*head_specific_), config_.d_y_specific,
                                      out_layout_.offsets, out_layout_.widths);
  return ad::add_row(ad::add(shared, specific), t.param(*head_bias_));
}

HivaeModel::Graph HivaeModel::Forward(ad::Tape& t, const Matrix& input, EncodeMode mode,
                                      ad::Rng* rng) const {
  if (input.cols() != input_dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "hivae input has " + std::to_string(input.cols()) +
                                                   " columns, expected " +
                                                   std::to_string(input_dim_));
  }
  const bool stochastic = mode == EncodeMode::kStochastic;
  if (stochastic && rng == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "stochastic encoding needs an rng");
  }
  Graph g;
  ad::Var x = t.constant(input);
  ad::Var logits = enc_s_(t, x);
  g.pi_s = ad::softmax_rows(logits);
  g.log_pi_s = ad::log_softmax_rows(logits);
  if (stochastic) {
    g.s = ad::gumbel_softmax_sample(logits, config_.gumbel_temperature, *rng);
  } else if (config_.deterministic_s_mode == "one_hot") {
    Matrix hot = Matrix::Zero(input.rows(), config_.d_s);
    for (Eigen::Index i = 0; i < input.rows(); ++i) {
      Eigen::Index k;
      g.pi_s.value().row(i).maxCoeff(&k);
      hot(i, k) = 1.0;
    }
    g.s = t.constant(std::move(hot));
  } else {
    g.s = g.pi_s;
  }
  ad::Var hz = enc_z_(t, ad::concat_cols({x, g.s}));
  g.mu_z = ad::slice_cols(hz, 0, config_.d_z);
  g.sigma2_z = ad::add_scalar(ad::softplus(ad::slice_cols(hz, config_.d_z, config_.d_z)),
                              kVarianceFloor);
  g.z = stochastic ? ad::gaussian_reparam_sample(g.mu_z, g.sigma2_z, *rng) : g.mu_z;
  g.prior_mu_z = dec_z_(t, g.s);
  ad::Var y = dec_y_(t, ad::concat_cols({g.s, g.z}));
  g.outputs = Heads(t, g.s, y);
  return g;
}

ad::Var HivaeModel::KlS(const Graph& g) const {
  const double n = static_cast<double>(g.pi_s.rows());
  return ad::add_scalar(ad::sum(ad::mul(g.pi_s, g.log_pi_s)), n * std::log(config_.d_s));
}

ad::Var HivaeModel::KlZ(const Graph& g) const {
  const double n = static_cast<double>(g.mu_z.rows());
  ad::Var d = ad::sub(g.mu_z, g.prior_mu_z);
  ad::Var terms = ad::sub(ad::add(g.sigma2_z, ad::square(d)), ad::log(g.sigma2_z));
  return ad::add_scalar(ad::scale(ad::sum(terms), 0.5), -0.5 * n * config_.d_z);
}

EncoderState HivaeModel::Encode(const Matrix& input, EncodeMode mode, ad::Rng* rng) const {
  ad::Tape t(false);
  Graph g = Forward(t, input, mode, rng);
  return {g.pi_s.value(), g.s.value(), g.mu_z.value(), g.sigma2_z.value(), g.z.value()};
}

Matrix HivaeModel::DecodeOutputs(const EncoderState& state) const {
  if (state.s.cols() != config_.d_s || state.z.cols() != config_.d_z ||
      state.s.rows() != state.z.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "encoder state does not match the config");
  }
  ad::Tape t(false);
  ad::Var s = t.constant(state.s);
  ad::Var y = dec_y_(t, ad::concat_cols({s, t.constant(state.z)}));
  return Heads(t, s, y).value();
}

std::vector<ParamsRow> HivaeModel::Decode(const EncoderState& state) const {
  return ParamsFromOutputs(DecodeOutputs(state), schema_, stats_, false);
}

Matrix HivaeModel::HeadOutputs(const Matrix& s, const Matrix& y) const {
  ad::Tape t(false);
  return Heads(t, t.constant(s), t.constant(y)).value();
}

std::vector<std::pair<double, double>> HivaeModel::KlTerms(const EncoderState& state) const {
  ad::Tape t(false);
  Matrix prior = dec_z_(t, t.constant(state.s)).value();
  std::vector<std::pair<double, double>> out;
  for (Eigen::Index i = 0; i < state.pi_s.rows(); ++i) {
    double ks = std::log(static_cast<double>(config_.d_s));
    for (Eigen::Index k = 0; k < state.pi_s.cols(); ++k) {
      const double p = state.pi_s(i, k);
      if (p > 0) ks += p * std::log(p);
    }
    double kz = 0.0;
    for (Eigen::Index k = 0; k < state.mu_z.cols(); ++k) {
      const double s2 = state.sigma2_z(i, k);
      const double d = state.mu_z(i, k) - prior(i, k);
      kz += 0.5 * (s2 + d * d - 1.0 - std::log(s2));
    }
    out.emplace_back(ks, kz);
  }
  return out;
}

std::vector<ParamsRow> HivaeModel::Impute(const Matrix& raw) const {
  RequireTrained();
  const Matrix input = InputMatrix(Preprocess(raw));
  ad::Tape t(false);
  Graph g = Forward(t, input, EncodeMode::kDeterministic, nullptr);
  return ParamsFromOutputs(g.outputs.value(), schema_, stats_, true);
}

std::vector<ParamsRow> HivaeModel::ImputeSamples(const RowVector& raw, int n,
                                                 ad::Rng& rng) const {
  RequireTrained();
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "sampling size must be >= 1");
  const Matrix input = InputMatrix(Preprocess(raw)).replicate(n, 1);
  ad::Tape t(false);
  Graph g = Forward(t, input, EncodeMode::kStochastic, &rng);
  return ParamsFromOutputs(g.outputs.value(), schema_, stats_, true);
}

Checkpoint HivaeModel::ToCheckpoint() const {
  Checkpoint c;
  c.model_kind = kind();
  c.schema = schema_;
  c.config = config_.ToJson();
  c.stats = stats_;
  c.parameters = SnapshotParameters(params_);
  return c;
}

std::unique_ptr<HivaeModel> HivaeModel::FromCheckpoint(const Checkpoint& ckpt) {
  if (ckpt.model_kind != "hivae") {
    throw Error(ErrorCode::kCheckpointMismatch, "checkpoint holds a '" + ckpt.model_kind +
                                                    "' model, expected 'hivae'");
  }
  auto m = std::make_unique<HivaeModel>(ckpt.schema, ckpt.stats,
                                        HivaeConfig::FromJson(ckpt.config), 0);
  LoadParameters(ckpt, m->params_);
  m->set_trained(true);
  return m;
}

}  // namespace vhgm
