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
#ifndef VHGM_EVAL_HPP_
#define VHGM_EVAL_HPP_

#include <map>
#include <string>
#include <vector>

#include "vhgm/io.hpp"
#include "vhgm/model.hpp"

namespace vhgm {

// ---- metrics ---------------------------------------------------------------

// Fraction of mismatches. Throws EmptyTestSet.
double CategoricalError(const std::vector<double>& preds, const std::vector<double>& truths);
// Mean |pred - truth| / c. Throws EmptyTestSet.
double OrdinalError(const std::vector<double>& preds, const std::vector<double>& truths, int c);
// RMSE / (max(truths) - min(truths)). Throws EmptyTestSet, DegenerateRange.
double ContinuousError(const std::vector<double>& preds, const std::vector<double>& truths);

// Type-appropriate metric for one attribute.
double AttributeError(const VariableType& type, const std::vector<double>& preds,
                      const std::vector<double>& truths);

// ---- baselines -------------------------------------------------------------

// Predicts one fixed value per column regardless of the inputs.
class ConstantImputer : public Imputer {
 public:
  ConstantImputer(std::string kind, DatasetSchema schema, RowVector values);

  const DatasetSchema& schema() const override { return schema_; }
  std::string kind() const override { return kind_; }
  Matrix PredictPoints(const Matrix& raw) const override;
  const RowVector& values() const { return values_; }

 private:
  std::string kind_;
  DatasetSchema schema_;
  RowVector values_;
};

// Empirical mode of every column.
ConstantImputer ModeImputer(const DatasetSchema& schema, const TrainStats& stats);
// Mean for real/positive, rounded mean for count/ordinal, mode for categorical.
ConstantImputer ModeMeanImputer(const DatasetSchema& schema, const TrainStats& stats);

// Round half away from zero.
double RoundHalfAway(double x);

// ---- evaluation ------------------------------------------------------------

inline constexpr double kDefaultTestMissingRate = 0.99;

// Observed cells hidden from the model at `rate`; seeded per cell.
MissMask DrawTestMask(const Matrix& raw, double rate, uint64_t seed);

struct ErrorReport {
  std::string model_id;
  double test_missing_rate = kDefaultTestMissingRate;
  uint64_t seed = 0;
  std::vector<std::string> attribute_ids;
  std::vector<VariableKind> kinds;
  // NaN where the attribute had no scored cell or a degenerate range.
  std::vector<double> attribute_error;
  std::vector<int> scored_cells;
  // Keyed by KindName; only kinds with at least one scored attribute.
  std::map<std::string, double> type_error;
  // Unweighted mean of the per-type means.
  double total = 0.0;
  // Unweighted mean over scored attributes.
  double column_mean = 0.0;
  std::vector<std::string> warnings;
};

struct EvalOptions {
  double test_missing_rate = kDefaultTestMissingRate;
  uint64_t seed = 0;
  std::string model_id;
  // Attributes eligible for scoring; empty = all.
  std::vector<int> columns;
};

// Masks observed cells of `test_raw` (canonical n x p), imputes the masked
// inputs and scores every masked cell. Throws EmptyTestSet when nothing can
// be scored.
ErrorReport Evaluate(const Imputer& model, const Matrix& test_raw, const EvalOptions& options);

Json ReportToJson(const ErrorReport& report);
std::string ReportToCsv(const ErrorReport& report);
void WriteReport(const ErrorReport& report, const std::string& stem);

// ---- correlation probe -----------------------------------------------------

struct ProbePoint {
  double x = 0.0;
  double mean = 0.0;
  double spread = 0.0;
};

// Sweeps attribute `x` over `grid` with every other input missing and
// records the predicted mean of attribute `y`. With n_sampling > 0 on a
// HIVAE model the encoder is sampled n times and mean/spread are the mean
// and standard deviation of the sampled means. Otherwise the deterministic
// prediction is used and spread is its predictive standard deviation.
std::vector<ProbePoint> CorrelationProbe(const GenerativeModel& model, int x, int y,
                                         const std::vector<double>& grid, int n_sampling,
                                         uint64_t seed);
std::string ProbeToCsv(const std::vector<ProbePoint>& curve);

// Least-squares slope and Pearson correlation of (x, mean) over a curve.
struct CurveFit {
  double slope = 0.0;
  double pearson = 0.0;
};
CurveFit FitCurve(const std::vector<ProbePoint>& curve);

}  // namespace vhgm

#endif  // VHGM_EVAL_HPP_
