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
#include "vhgm/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vhgm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kMaxLogRate = 50.0;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool IsClassCode(double x, int c) { return x == std::floor(x) && x >= 1.0 && x <= c; }

[[noreturn]] void Unsupported(const char* what, double x) {
  throw Error(ErrorCode::kTypeMismatch, std::string(what) + ": value " + std::to_string(x) +
                                            " outside the distribution's support");
}

double GaussianLogPdf(double x, double mu, double sigma2) {
  const double d = x - mu;
  return -0.5 * (kLog2Pi + std::log(sigma2) + d * d / sigma2);
}

int ArgMax(const Vector& v) {
  Eigen::Index k = 0;
  v.maxCoeff(&k);
  return static_cast<int>(k);
}

}  // namespace

VariableKind KindOf(const DistributionParams& params) {
  return std::visit(Overloaded{
                        [](const RealParams&) { return VariableKind::kReal; },
                        [](const PositiveParams&) { return VariableKind::kPositive; },
                        [](const CountParams&) { return VariableKind::kCount; },
                        [](const CategoricalParams&) { return VariableKind::kCategorical; },
                        [](const OrdinalParams&) { return VariableKind::kOrdinal; },
                    },
                    params);
}

Vector OrdinalProbs(const Vector& thresholds) {
  const Eigen::Index c = thresholds.size() + 1;
  Vector p(c);
  for (Eigen::Index k = 1; k <= c; ++k) p(k - 1) = std::exp(OrdinalLogProb(thresholds, static_cast<int>(k)));
  return p;
}

double OrdinalLogProb(const Vector& t, int k) {
  const int c = static_cast<int>(t.size()) + 1;
  if (k < 1 || k > c) Unsupported("ordinal", k);
  if (k == 1) return ad::log_sigmoid(t(0));
  if (k == c) return ad::log_sigmoid(-t(c - 2));
  const double b = t(k - 1), a = t(k - 2);
  return ad::log_sigmoid(b) + ad::log_sigmoid(-a) + std::log(-std::expm1(a - b));
}

double LogProb(const DistributionParams& params, double x) {
  return std::visit(
      Overloaded{
          [x](const RealParams& p) {
            if (!std::isfinite(x)) Unsupported("real", x);
            return GaussianLogPdf(x, p.mu, p.sigma2);
          },
          [x](const PositiveParams& p) {
            if (!(x > 0.0) || !std::isfinite(x)) Unsupported("positive", x);
            const double y = std::log(x);
            return GaussianLogPdf(y, p.mu, p.sigma2) - y;
          },
          [x](const CountParams& p) {
            if (!(x >= 0.0) || x != std::floor(x)) Unsupported("count", x);
            return -p.lambda + x * std::log(p.lambda) - std::lgamma(x + 1.0);
          },
          [x](const CategoricalParams& p) {
            if (!IsClassCode(x, static_cast<int>(p.pi.size()))) Unsupported("categorical", x);
            return std::log(p.pi(static_cast<int>(x) - 1));
          },
          [x](const OrdinalParams& p) {
            if (!IsClassCode(x, static_cast<int>(p.thresholds.size()) + 1)) {
              Unsupported("ordinal", x);
            }
            return OrdinalLogProb(p.thresholds, static_cast<int>(x));
          },
      },
      params);
}

double Mode(const DistributionParams& params) {
  return std::visit(Overloaded{
                        [](const RealParams& p) { return p.mu; },
                        [](const PositiveParams& p) { return std::exp(p.mu - p.sigma2); },
                        [](const CountParams& p) { return std::floor(p.lambda); },
                        [](const CategoricalParams& p) { return ArgMax(p.pi) + 1.0; },
                        [](const OrdinalParams& p) {
                          return ArgMax(OrdinalProbs(p.thresholds)) + 1.0;
                        },
                    },
                    params);
}

double Mean(const DistributionParams& params) {
  auto expected_class = [](const Vector& probs) {
    double m = 0.0;
    for (Eigen::Index k = 0; k < probs.size(); ++k) m += (k + 1.0) * probs(k);
    return m;
  };
  return std::visit(Overloaded{
                        [](const RealParams& p) { return p.mu; },
                        [](const PositiveParams& p) { return std::exp(p.mu + 0.5 * p.sigma2); },
                        [](const CountParams& p) { return p.lambda; },
                        [&](const CategoricalParams& p) { return expected_class(p.pi); },
                        [&](const OrdinalParams& p) {
                          return expected_class(OrdinalProbs(p.thresholds));
                        },
                    },
                    params);
}

double Sample(const DistributionParams& params, ad::Rng& rng) {
  return std::visit(
      Overloaded{
          [&rng](const RealParams& p) {
            return std::normal_distribution<double>(p.mu, std::sqrt(p.sigma2))(rng);
          },
          [&rng](const PositiveParams& p) {
            return std::exp(std::normal_distribution<double>(p.mu, std::sqrt(p.sigma2))(rng));
          },
          [&rng](const CountParams& p) {
            return static_cast<double>(std::poisson_distribution<int64_t>(p.lambda)(rng));
          },
          [&rng](const CategoricalParams& p) {
            std::discrete_distribution<int> d(p.pi.data(), p.pi.data() + p.pi.size());
            return d(rng) + 1.0;
          },
          [&rng](const OrdinalParams& p) {
            const Vector probs = OrdinalProbs(p.thresholds);
            std::discrete_distribution<int> d(probs.data(), probs.data() + probs.size());
            return d(rng) + 1.0;
          },
      },
      params);
}

int NumRawOutputs(const VariableType& type) {
  switch (type.kind) {
    case VariableKind::kReal:
    case VariableKind::kPositive:
      return 2;
    case VariableKind::kCount:
      return 1;
    case VariableKind::kCategorical:
    case VariableKind::kOrdinal:
      return type.num_categories;
  }
  return 0;
}

int EncodingDim(const VariableType& type) {
  switch (type.kind) {
    case VariableKind::kCategorical:
      return type.num_categories;
    case VariableKind::kOrdinal:
      return type.num_categories - 1;
    default:
      return 1;
  }
}

DistributionParams ParamsFromRaw(const VariableType& type, std::span<const double> raw) {
  if (static_cast<int>(raw.size()) != NumRawOutputs(type)) {
    throw Error(ErrorCode::kDimensionMismatch, "raw output width does not match attribute type");
  }
  switch (type.kind) {
    case VariableKind::kReal:
      return RealParams{raw[0], ad::softplus(raw[1]) + kVarianceFloor};
    case VariableKind::kPositive:
      return PositiveParams{raw[0], ad::softplus(raw[1]) + kVarianceFloor};
    case VariableKind::kCount:
      return CountParams{std::exp(std::clamp(raw[0], -kMaxLogRate, kMaxLogRate))};
    case VariableKind::kCategorical: {
      Vector logits = Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
      Vector pi = (logits.array() - logits.maxCoeff()).exp();
      return CategoricalParams{pi / pi.sum()};
    }
    case VariableKind::kOrdinal: {
      const Eigen::Index c1 = static_cast<Eigen::Index>(raw.size()) - 1;
      const Vector r = Eigen::Map<const Vector>(raw.data(), c1);
      return OrdinalParams{OrdinalThresholds(r, raw[c1])};
    }
  }
  throw Error(ErrorCode::kTypeMismatch, "unknown attribute kind");
}

DistributionParams Denormalize(const DistributionParams& model, const AttributeStats& s) {
  return std::visit(
      Overloaded{
          [&s](const RealParams& p) -> DistributionParams {
            return RealParams{p.mu * s.std + s.mean,
                              std::max(p.sigma2 * s.std * s.std, kVarianceFloor)};
          },
          [&s](const PositiveParams& p) -> DistributionParams {
            return PositiveParams{p.mu * s.std + s.mean,
                                  std::max(p.sigma2 * s.std * s.std, kVarianceFloor)};
          },
          [&s](const CountParams& p) -> DistributionParams {
            const double log_rate = std::clamp(s.mean + s.std * std::log(p.lambda),
                                               -kMaxLogRate, kMaxLogRate);
            return CountParams{std::exp(log_rate)};
          },
          [](const auto& p) -> DistributionParams { return p; },
      },
      model);
}

DistributionParams Normalize(const DistributionParams& raw, const AttributeStats& s) {
  return std::visit(
      Overloaded{
          [&s](const RealParams& p) -> DistributionParams {
            return RealParams{(p.mu - s.mean) / s.std, p.sigma2 / (s.std * s.std)};
          },
          [&s](const PositiveParams& p) -> DistributionParams {
            return PositiveParams{(p.mu - s.mean) / s.std, p.sigma2 / (s.std * s.std)};
          },
          [&s](const CountParams& p) -> DistributionParams {
            return CountParams{std::exp((std::log(p.lambda) - s.mean) / s.std)};
          },
          [](const auto& p) -> DistributionParams { return p; },
      },
      raw);
}

double RawOutputNll(const VariableType& type, const AttributeStats& s,
                    std::span<const double> raw, double x, std::span<double> grad) {
  switch (type.kind) {
    case VariableKind::kReal:
    case VariableKind::kPositive: {
      double y = x;
      double jacobian = std::log(s.std);
      if (type.kind == VariableKind::kPositive) {
        if (!(x > 0.0)) Unsupported("positive", x);
        y = std::log(x);
        jacobian += y;
      }
      const double z = (y - s.mean) / s.std;
      const double mu = raw[0];
      const double sigma2 = ad::softplus(raw[1]) + kVarianceFloor;
      const double d = z - mu;
      grad[0] = -d / sigma2;
      grad[1] = (0.5 / sigma2 - 0.5 * d * d / (sigma2 * sigma2)) * ad::sigmoid(raw[1]);
      return 0.5 * (kLog2Pi + std::log(sigma2) + d * d / sigma2) + jacobian;
    }
    case VariableKind::kCount: {
      const double eta = raw[0];
      double log_rate = s.mean + s.std * eta;
      const bool clipped = log_rate > kMaxLogRate || log_rate < -kMaxLogRate;
      log_rate = std::clamp(log_rate, -kMaxLogRate, kMaxLogRate);
      const double lambda = std::exp(log_rate);
      grad[0] = clipped ? 0.0 : (lambda - x) * s.std;
      return lambda - x * log_rate + std::lgamma(x + 1.0);
    }
    case VariableKind::kCategorical: {
      const int c = type.num_categories;
      if (!IsClassCode(x, c)) Unsupported("categorical", x);
      double m = raw[0];
      for (int k = 1; k < c; ++k) m = std::max(m, raw[k]);
      double z = 0.0;
      for (int k = 0; k < c; ++k) z += std::exp(raw[k] - m);
      const double lse = m + std::log(z);
      const int target = static_cast<int>(x) - 1;
      for (int k = 0; k < c; ++k) grad[k] = std::exp(raw[k] - lse) - (k == target ? 1.0 : 0.0);
      return lse - raw[target];
    }
    case VariableKind::kOrdinal: {
      const int c = type.num_categories;
      if (!IsClassCode(x, c)) Unsupported("ordinal", x);
      const int k = static_cast<int>(x);
      const Vector r = Eigen::Map<const Vector>(raw.data(), c - 1);
      const Vector t = OrdinalThresholds(r, raw[c - 1]);
      // d(log P)/d t_j for the (at most two) thresholds bracketing class k.
      Vector dt = Vector::Zero(c - 1);
      if (k == 1) {
        dt(0) = ad::sigmoid(-t(0));
      } else if (k == c) {
        dt(c - 2) = -ad::sigmoid(t(c - 2));
      } else {
        const double b = t(k - 1), a = t(k - 2);
        const double gap = -std::expm1(a - b);
        dt(k - 1) = ad::sigmoid(-b) / (ad::sigmoid(-a) * gap);
        dt(k - 2) = -ad::sigmoid(a) / (ad::sigmoid(b) * gap);
      }
      double suffix = 0.0;
      for (int i = c - 2; i >= 0; --i) {
        suffix += dt(i);
        grad[i] = -ad::sigmoid(r(i)) * suffix;
      }
      grad[c - 1] = dt.sum();
      return -OrdinalLogProb(t, k);
    }
  }
  return 0.0;
}

ad::Var HeteroNll(const ad::Var& outputs, std::vector<NllTerm> terms, const DatasetSchema& schema,
                  const TrainStats& stats) {
  const Matrix& out = outputs.value();
  Matrix total(1, 1);
  total(0, 0) = 0.0;
  std::vector<double> buf_raw(64), buf_grad(64);
  const bool need_grad = outputs.tape()->recording() && outputs.tape()->requires_grad(outputs.id());
  Matrix grad = need_grad ? Matrix::Zero(out.rows(), out.cols()) : Matrix();
  for (const auto& term : terms) {
    const auto& type = schema.attribute(term.attribute).var_type;
    const int w = NumRawOutputs(type);
    if (term.offset + w > out.cols() || term.row >= out.rows()) {
      throw Error(ErrorCode::kDimensionMismatch, "HeteroNll: term outside output matrix");
    }
    buf_raw.resize(w);
    buf_grad.resize(w);
    for (int k = 0; k < w; ++k) buf_raw[k] = out(term.row, term.offset + k);
    total(0, 0) += RawOutputNll(type, stats.attributes[term.attribute], buf_raw, term.target,
                                buf_grad);
    if (need_grad) {
      for (int k = 0; k < w; ++k) grad(term.row, term.offset + k) += buf_grad[k];
    }
  }
  const int io = outputs.id();
  return outputs.tape()->push(std::move(total), {io},
                              [io, grad = std::move(grad)](ad::Tape& t, int self) {
                                t.accumulate(io, grad * t.grad(self)(0, 0));
                              });
}

EncodingLayout MakeEncodingLayout(const DatasetSchema& schema) {
  EncodingLayout l;
  for (const auto& a : schema.attributes()) {
    l.offsets.push_back(l.total);
    l.widths.push_back(EncodingDim(a.var_type));
    l.total += l.widths.back();
  }
  return l;
}

OutputLayout MakeOutputLayout(const DatasetSchema& schema) {
  OutputLayout l;
  for (const auto& a : schema.attributes()) {
    l.offsets.push_back(l.total);
    l.widths.push_back(NumRawOutputs(a.var_type));
    l.total += l.widths.back();
  }
  return l;
}

void EncodeCell(const VariableType& type, const AttributeStats& s, double x,
                std::span<double> out) {
  const bool missing = std::isnan(x);
  switch (type.kind) {
    case VariableKind::kReal:
      out[0] = missing ? 0.0 : (x - s.mean) / s.std;
      return;
    case VariableKind::kPositive:
      out[0] = missing ? 0.0 : (std::log(x) - s.mean) / s.std;
      return;
    case VariableKind::kCount:
      out[0] = missing ? 0.0 : (std::log1p(x) - s.mean) / s.std;
      return;
    case VariableKind::kCategorical: {
      const int c = type.num_categories;
      for (int k = 0; k < c; ++k) {
        out[k] = missing ? s.class_probs(k) : (static_cast<int>(x) - 1 == k ? 1.0 : 0.0);
      }
      return;
    }
    case VariableKind::kOrdinal: {
      const int c = type.num_categories;
      // Coordinate k (1-based) is 1 iff x > k; missing cells get P(x > k).
      double tail = 1.0;
      for (int k = 1; k < c; ++k) {
        if (missing) {
          tail -= s.class_probs(k - 1);
          out[k - 1] = std::max(tail, 0.0);
        } else {
          out[k - 1] = x > k ? 1.0 : 0.0;
        }
      }
      return;
    }
  }
}

PreprocessedBatch PreprocessRows(const Matrix& raw, const TrainStats& stats,
                                 const DatasetSchema& schema) {
  if (stats.size() != schema.size() || raw.cols() != schema.size() ||
      stats.schema_version != schema.version()) {
    throw Error(ErrorCode::kStatsSchemaMismatch, "train stats do not match the schema");
  }
  for (int j = 0; j < schema.size(); ++j) {
    if (stats.attributes[j].kind != schema.attribute(j).var_type.kind) {
      throw Error(ErrorCode::kStatsSchemaMismatch, "stats kind differs from schema",
                  schema.attribute(j).id);
    }
  }
  const EncodingLayout layout = MakeEncodingLayout(schema);
  PreprocessedBatch batch;
  batch.values.resize(raw.rows(), layout.total);
  batch.flags.resize(raw.rows(), raw.cols());
  std::vector<double> buf(64);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    for (int j = 0; j < schema.size(); ++j) {
      const double x = raw(i, j);
      buf.resize(layout.widths[j]);
      EncodeCell(schema.attribute(j).var_type, stats.attributes[j], x, buf);
      for (int k = 0; k < layout.widths[j]; ++k) batch.values(i, layout.offsets[j] + k) = buf[k];
      batch.flags(i, j) = std::isnan(x) ? 0.0 : 1.0;
    }
  }
  return batch;
}

Json ParamsToJson(const DistributionParams& params) {
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return std::visit(
      Overloaded{
          [](const RealParams& p) -> Json {
            return {{"kind", "real"}, {"mu", p.mu}, {"sigma2", p.sigma2}};
          },
          [](const PositiveParams& p) -> Json {
            return {{"kind", "positive"}, {"mu", p.mu}, {"sigma2", p.sigma2}};
          },
          [](const CountParams& p) -> Json { return {{"kind", "count"}, {"lambda", p.lambda}}; },
          [&vec](const CategoricalParams& p) -> Json {
            return {{"kind", "categorical"}, {"pi", vec(p.pi)}};
          },
          [&vec](const OrdinalParams& p) -> Json {
            return {{"kind", "ordinal"}, {"thresholds", vec(p.thresholds)}};
          },
      },
      params);
}

DistributionParams ParamsFromJson(const Json& doc) {
  const std::string kind = doc.at("kind").get<std::string>();
  auto vec = [](const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  if (kind == "real") return RealParams{doc.at("mu").get<double>(), doc.at("sigma2").get<double>()};
  if (kind == "positive") {
    return PositiveParams{doc.at("mu").get<double>(), doc.at("sigma2").get<double>()};
  }
  if (kind == "count") return CountParams{doc.at("lambda").get<double>()};
  if (kind == "categorical") return CategoricalParams{vec(doc.at("pi"))};
  if (kind == "ordinal") return OrdinalParams{vec(doc.at("thresholds"))};
  throw Error(ErrorCode::kParseError, "unknown distribution kind '" + kind + "'");
}

}  // namespace vhgm
