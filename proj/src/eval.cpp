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
#include "vhgm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vhgm/hivae.hpp"
#include "vhgm/random.hpp"

namespace vhgm {

namespace {

void RequireSameNonEmpty(const std::vector<double>& preds, const std::vector<double>& truths) {
  if (preds.size() != truths.size()) {
    throw Error(ErrorCode::kShapeMismatch, "predictions and truths differ in length");
  }
  if (truths.empty()) throw Error(ErrorCode::kEmptyTestSet, "no test cells to score");
}

double MeanOf(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace

double CategoricalError(const std::vector<double>& preds, const std::vector<double>& truths) {
  RequireSameNonEmpty(preds, truths);
  size_t wrong = 0;
  for (size_t i = 0; i < preds.size(); ++i) wrong += preds[i] != truths[i];
  return static_cast<double>(wrong) / static_cast<double>(preds.size());
}

double OrdinalError(const std::vector<double>& preds, const std::vector<double>& truths, int c) {
  RequireSameNonEmpty(preds, truths);
  if (c < 1) throw Error(ErrorCode::kInvalidArgument, "ordinal error needs c >= 1");
  double s = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) s += std::abs(preds[i] - truths[i]) / c;
  return s / static_cast<double>(preds.size());
}

double ContinuousError(const std::vector<double>& preds, const std::vector<double>& truths) {
  RequireSameNonEmpty(preds, truths);
  const auto [lo, hi] = std::minmax_element(truths.begin(), truths.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) {
    throw Error(ErrorCode::kDegenerateRange, "ground truth has zero range");
  }
  double s = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - truths[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(preds.size())) / range;
}

double AttributeError(const VariableType& type, const std::vector<double>& preds,
                      const std::vector<double>& truths) {
  switch (type.kind) {
    case VariableKind::kCategorical:
      return CategoricalError(preds, truths);
    case VariableKind::kOrdinal:
      return OrdinalError(preds, truths, type.num_categories);
    default:
      return ContinuousError(preds, truths);
  }
}

ConstantImputer::ConstantImputer(std::string kind, DatasetSchema schema, RowVector values)
    : kind_(std::move(kind)), schema_(std::move(schema)), values_(std::move(values)) {
  if (values_.size() != schema_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one constant per schema column required");
  }
}

Matrix ConstantImputer::PredictPoints(const Matrix& raw) const {
  if (raw.cols() != schema_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "input does not match the schema");
  }
  return values_.replicate(raw.rows(), 1);
}

double RoundHalfAway(double x) { return std::round(x); }

ConstantImputer ModeImputer(const DatasetSchema& schema, const TrainStats& stats) {
  RowVector v(schema.size());
  for (int j = 0; j < schema.size(); ++j) v(j) = stats.attributes.at(j).mode;
  return ConstantImputer("mode", schema, std::move(v));
}

ConstantImputer ModeMeanImputer(const DatasetSchema& schema, const TrainStats& stats) {
  RowVector v(schema.size());
  for (int j = 0; j < schema.size(); ++j) {
    const AttributeStats& s = stats.attributes.at(j);
    switch (schema.attribute(j).var_type.kind) {
      case VariableKind::kReal:
        v(j) = s.mean;
        break;
      case VariableKind::kPositive:
        v(j) = s.raw_mean;
        break;
      case VariableKind::kCount:
      case VariableKind::kOrdinal:
        v(j) = RoundHalfAway(s.raw_mean);
        break;
      case VariableKind::kCategorical:
        v(j) = s.mode;
        break;
    }
  }
  return ConstantImputer("mode_mean", schema, std::move(v));
}

MissMask DrawTestMask(const Matrix& raw, double rate, uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "test missing rate must lie in [0, 1]");
  }
  MissMask hide = MissMask::Constant(raw.rows(), raw.cols(), false);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
      if (!std::isnan(raw(i, j))) hide(i, j) = HashUniform(seed, i, j) < rate;
    }
  }
  return hide;
}

ErrorReport Evaluate(const Imputer& model, const Matrix& test_raw, const EvalOptions& options) {
  const DatasetSchema& schema = model.schema();
  if (test_raw.cols() != schema.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "test table does not match the model schema");
  }
  const int p = schema.size();
  std::vector<char> eligible(p, options.columns.empty() ? 1 : 0);
  for (int j : options.columns) eligible.at(j) = 1;

  const MissMask hide = DrawTestMask(test_raw, options.test_missing_rate, options.seed);
  Matrix inputs = test_raw;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    for (int j = 0; j < p; ++j) {
      if (hide(i, j)) inputs(i, j) = kMissing;
    }
  }
  const Matrix preds = model.PredictPoints(inputs);

  ErrorReport r;
  r.model_id = options.model_id.empty() ? model.kind() : options.model_id;
  r.test_missing_rate = options.test_missing_rate;
  r.seed = options.seed;
  std::map<std::string, std::vector<double>> by_type;
  std::vector<double> scored;
  for (int j = 0; j < p; ++j) {
    const AttributeSpec& a = schema.attribute(j);
    r.attribute_ids.push_back(a.id);
    r.kinds.push_back(a.var_type.kind);
    std::vector<double> pv, tv;
    if (eligible[j]) {
      for (Eigen::Index i = 0; i < test_raw.rows(); ++i) {
        if (!hide(i, j)) continue;
        if (!std::isnan(inputs(i, j))) {
          throw Error(ErrorCode::kInvalidArgument, "scored cell was visible to the model", a.id);
        }
        pv.push_back(preds(i, j));
        tv.push_back(test_raw(i, j));
      }
    }
    r.scored_cells.push_back(static_cast<int>(tv.size()));
    double e = kMissing;
    if (!tv.empty()) {
      try {
        e = AttributeError(a.var_type, pv, tv);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::kDegenerateRange) throw;
        r.warnings.push_back("attribute '" + a.id + "' has a constant ground truth; excluded");
      }
    }
    r.attribute_error.push_back(e);
    if (!std::isnan(e)) {
      by_type[KindName(a.var_type.kind)].push_back(e);
      scored.push_back(e);
    }
  }
  if (scored.empty()) throw Error(ErrorCode::kEmptyTestSet, "no masked test cell could be scored");
  std::vector<double> type_means;
  for (const auto& [kind, errs] : by_type) {
    r.type_error[kind] = MeanOf(errs);
    type_means.push_back(r.type_error[kind]);
  }
  r.total = MeanOf(type_means);
  r.column_mean = MeanOf(scored);
  return r;
}

Json ReportToJson(const ErrorReport& r) {
  Json attrs = Json::array();
  for (size_t j = 0; j < r.attribute_ids.size(); ++j) {
    Json a = {{"id", r.attribute_ids[j]},
              {"kind", KindName(r.kinds[j])},
              {"scored_cells", r.scored_cells[j]}};
    a["error"] = std::isnan(r.attribute_error[j]) ? Json(nullptr) : Json(r.attribute_error[j]);
    attrs.push_back(std::move(a));
  }
  return {{"format_version", kFormatVersion},
          {"model_id", r.model_id},
          {"test_missing_rate", r.test_missing_rate},
          {"seed", r.seed},
          {"type_error", r.type_error},
          {"total", r.total},
          {"column_mean", r.column_mean},
          {"attributes", attrs},
          {"warnings", r.warnings}};
}

std::string ReportToCsv(const ErrorReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "attribute,kind,scored_cells,error\n";
  for (size_t j = 0; j < r.attribute_ids.size(); ++j) {
    out << r.attribute_ids[j] << ',' << KindName(r.kinds[j]) << ',' << r.scored_cells[j] << ',';
    if (!std::isnan(r.attribute_error[j])) out << r.attribute_error[j];
    out << '\n';
  }
  for (const auto& [kind, e] : r.type_error) out << "type:" << kind << ",,," << e << '\n';
  out << "total,,," << r.total << '\n';
  out << "column_mean,,," << r.column_mean << '\n';
  return out.str();
}

void WriteReport(const ErrorReport& report, const std::string& stem) {
  WriteFileText(stem + ".json", ReportToJson(report).dump(2) + "\n");
  WriteFileText(stem + ".csv", ReportToCsv(report));
}

std::vector<ProbePoint> CorrelationProbe(const GenerativeModel& model, int x, int y,
                                         const std::vector<double>& grid, int n_sampling,
                                         uint64_t seed) {
  const int p = model.schema().size();
  if (x < 0 || x >= p || y < 0 || y >= p || x == y) {
    throw Error(ErrorCode::kInvalidArgument, "probe needs two distinct schema columns");
  }
  if (!model.schema().attribute(x).var_type.is_continuous()) {
    throw Error(ErrorCode::kTypeMismatch, "probe input must be real or positive",
                model.schema().attribute(x).id);
  }
  const auto* hivae = dynamic_cast<const HivaeModel*>(&model);
  std::vector<ProbePoint> curve;
  for (size_t g = 0; g < grid.size(); ++g) {
    RowVector row = RowVector::Constant(p, kMissing);
    row(x) = grid[g];
    ProbePoint pt;
    pt.x = grid[g];
    if (hivae != nullptr && n_sampling > 0) {
      ad::Rng rng(DeriveSeed(seed, g));
      const std::vector<ParamsRow> draws = hivae->ImputeSamples(row, n_sampling, rng);
      double s = 0.0, s2 = 0.0;
      for (const ParamsRow& d : draws) {
        const double m = Mean(d[y]);
        s += m;
        s2 += m * m;
      }
      pt.mean = s / n_sampling;
      pt.spread = std::sqrt(std::max(0.0, s2 / n_sampling - pt.mean * pt.mean));
    } else {
      const ParamsRow gamma = model.Impute(row).front();
      pt.mean = Mean(gamma[y]);
      ad::Rng rng(DeriveSeed(seed, g));
      // Predictive spread by sampling the predictive distribution.
      const int n = std::max(n_sampling, 100);
      double s = 0.0, s2 = 0.0;
      for (int k = 0; k < n; ++k) {
        const double v = Sample(gamma[y], rng);
        s += v;
        s2 += v * v;
      }
      const double m = s / n;
      pt.spread = std::sqrt(std::max(0.0, s2 / n - m * m));
    }
    curve.push_back(pt);
  }
  return curve;
}

std::string ProbeToCsv(const std::vector<ProbePoint>& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "grid,mean,spread\n";
  for (const auto& pt : curve) out << pt.x << ',' << pt.mean << ',' << pt.spread << '\n';
  return out.str();
}

CurveFit FitCurve(const std::vector<ProbePoint>& curve) {
  CurveFit fit;
  const double n = static_cast<double>(curve.size());
  if (curve.size() < 2) return fit;
  double mx = 0, my = 0;
  for (const auto& pt : curve) {
    mx += pt.x;
    my += pt.mean;
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& pt : curve) {
    sxx += (pt.x - mx) * (pt.x - mx);
    syy += (pt.mean - my) * (pt.mean - my);
    sxy += (pt.x - mx) * (pt.mean - my);
  }
  fit.slope = sxx > 0 ? sxy / sxx : 0.0;
  fit.pearson = (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 0.0;
  return fit;
}

}  // namespace vhgm
