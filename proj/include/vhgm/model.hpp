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
#ifndef VHGM_MODEL_HPP_
#define VHGM_MODEL_HPP_

#include <memory>
#include <string>
#include <vector>

#include "vhgm/autodiff.hpp"
#include "vhgm/checkpoint.hpp"
#include "vhgm/likelihood.hpp"

namespace vhgm {

// Predictive distributions for one row, one entry per schema attribute.
using ParamsRow = std::vector<DistributionParams>;

// Anything that fills in cells of a canonical table.
class Imputer {
 public:
  virtual ~Imputer() = default;
  virtual const DatasetSchema& schema() const = 0;
  virtual std::string kind() const = 0;
  // Point estimate for every cell of `raw` (n x p, NaN = missing). Observed
  // cells are predicted too; callers decide what to score.
  virtual Matrix PredictPoints(const Matrix& raw) const = 0;
};

// Trainable imputers with per-attribute predictive distributions.
class GenerativeModel : public Imputer {
 public:
  const DatasetSchema& schema() const override { return schema_; }
  const TrainStats& stats() const { return stats_; }
  ad::ParameterSet& parameters() { return params_; }
  const ad::ParameterSet& parameters() const { return params_; }

  bool trained() const { return trained_; }
  void set_trained(bool trained) { trained_ = trained; }

  // Deterministic predictive distributions in raw units. Throws
  // UntrainedModel before training or checkpoint load.
  virtual std::vector<ParamsRow> Impute(const Matrix& raw) const = 0;
  virtual Checkpoint ToCheckpoint() const = 0;

  // Mode of every imputed distribution.
  Matrix PredictPoints(const Matrix& raw) const override;

 protected:
  GenerativeModel(DatasetSchema schema, TrainStats stats);
  void RequireTrained() const;
  // Raw-unit preprocessing shared by both architectures.
  PreprocessedBatch Preprocess(const Matrix& raw) const;

  DatasetSchema schema_;
  TrainStats stats_;
  ad::ParameterSet params_;
  bool trained_ = false;
};

// Converts packed head outputs (n x OutputLayout.total) to distributions,
// denormalized to raw units when `raw_units` is set.
std::vector<ParamsRow> ParamsFromOutputs(const Matrix& outputs, const DatasetSchema& schema,
                                         const TrainStats& stats, bool raw_units);

RowVector PointEstimates(const ParamsRow& row);

// Restores either architecture from a checkpoint (model_kind "hivae"/"mae").
std::unique_ptr<GenerativeModel> ModelFromCheckpoint(const Checkpoint& ckpt);

}  // namespace vhgm

#endif  // VHGM_MODEL_HPP_
