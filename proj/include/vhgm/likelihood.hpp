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
#ifndef VHGM_LIKELIHOOD_HPP_
#define VHGM_LIKELIHOOD_HPP_

#include <span>
#include <variant>

#include "vhgm/autodiff.hpp"
#include "vhgm/io.hpp"
#include "vhgm/schema.hpp"

namespace vhgm {

inline constexpr double kVarianceFloor = 1e-6;

// Gaussian over the value (model space: standardized value).
struct RealParams {
  double mu = 0.0;
  double sigma2 = 1.0;
};
// Log-normal; mu/sigma2 describe log(x) (model space: standardized log).
struct PositiveParams {
  double mu = 0.0;
  double sigma2 = 1.0;
};
// Poisson rate. In model space `lambda` is exp of the standardized log-rate.
struct CountParams {
  double lambda = 1.0;
};
struct CategoricalParams {
  Vector pi;
};
// Cumulative-logit ordinal with strictly increasing thresholds r'.
struct OrdinalParams {
  Vector thresholds;
};

using DistributionParams =
    std::variant<RealParams, PositiveParams, CountParams, CategoricalParams, OrdinalParams>;

VariableKind KindOf(const DistributionParams& params);

// r'_k = sum_{i<=k} softplus(r_i) - h.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> OrdinalThresholds(
    const Eigen::MatrixBase<Derived>& r, typename Derived::Scalar h) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(r.size());
  Scalar acc = Scalar(0);
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    acc += ad::softplus(r(k));
    out(k) = acc - h;
  }
  return out;
}

// Class probabilities (length c) implied by c-1 thresholds.
Vector OrdinalProbs(const Vector& thresholds);
// log P(x = k), k in 1..c, computed without cancellation.
double OrdinalLogProb(const Vector& thresholds, int k);

// Log density/mass of a raw value. Throws TypeMismatch when `x` is outside
// the distribution's support.
double LogProb(const DistributionParams& params, double x);
double Mode(const DistributionParams& params);
// Expectation; for class kinds the expected 1-based class index.
double Mean(const DistributionParams& params);
double Sample(const DistributionParams& params, ad::Rng& rng);

// ---- network output layout -------------------------------------------------

// Unconstrained outputs a head emits for one attribute:
//   real/positive: (mu, pre-softplus variance)
//   count:         standardized log-rate
//   categorical:   c logits
//   ordinal:       (r_1..r_{c-1}, h)
int NumRawOutputs(const VariableType& type);
// Width of the model-input encoding of one cell.
int EncodingDim(const VariableType& type);

DistributionParams ParamsFromRaw(const VariableType& type, std::span<const double> raw);

// Model space <-> raw units.
DistributionParams Denormalize(const DistributionParams& model, const AttributeStats& stats);
DistributionParams Normalize(const DistributionParams& raw, const AttributeStats& stats);

// -log p(x) in raw units for raw network outputs, with its gradient w.r.t.
// the outputs written to `grad` (same length as `raw`). Equals
// -LogProb(Denormalize(ParamsFromRaw(raw)), x) whenever no variance floor is
// active.
double RawOutputNll(const VariableType& type, const AttributeStats& stats,
                    std::span<const double> raw, double x, std::span<double> grad);

// One scored cell in a packed output matrix: outputs live at
// (row, offset .. offset + NumRawOutputs).
struct NllTerm {
  int row = 0;
  int offset = 0;
  int attribute = 0;
  double target = 0.0;
};

// Sum of RawOutputNll over `terms`, as a differentiable scalar.
ad::Var HeteroNll(const ad::Var& outputs, std::vector<NllTerm> terms, const DatasetSchema& schema,
                  const TrainStats& stats);

// ---- preprocessing ---------------------------------------------------------

// Column layout of the encoded value block.
struct EncodingLayout {
  std::vector<int> offsets;
  std::vector<int> widths;
  int total = 0;
};
EncodingLayout MakeEncodingLayout(const DatasetSchema& schema);

// Layout of concatenated head outputs (one block per attribute).
struct OutputLayout {
  std::vector<int> offsets;
  std::vector<int> widths;
  int total = 0;
};
OutputLayout MakeOutputLayout(const DatasetSchema& schema);

// Encodes one cell (NaN = missing) into `out` (EncodingDim entries).
void EncodeCell(const VariableType& type, const AttributeStats& stats, double x,
                std::span<double> out);

struct PreprocessedBatch {
  Matrix values;  // n x layout.total
  Matrix flags;   // n x p, 1 = observed
};

// `raw` is n x p in schema order. Throws StatsSchemaMismatch.
PreprocessedBatch PreprocessRows(const Matrix& raw, const TrainStats& stats,
                                 const DatasetSchema& schema);

// ---- serialization ---------------------------------------------------------

Json ParamsToJson(const DistributionParams& params);
DistributionParams ParamsFromJson(const Json& doc);

}  // namespace vhgm

#endif  // VHGM_LIKELIHOOD_HPP_
