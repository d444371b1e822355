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
#include "vhgm/model.hpp"

#include "vhgm/hivae.hpp"
#include "vhgm/mae.hpp"

namespace vhgm {

GenerativeModel::GenerativeModel(DatasetSchema schema, TrainStats stats)
    : schema_(std::move(schema)), stats_(std::move(stats)) {
  if (stats_.size() != schema_.size() || stats_.schema_version != schema_.version()) {
    throw Error(ErrorCode::kStatsSchemaMismatch, "train stats do not match the model schema");
  }
}

void GenerativeModel::RequireTrained() const {
  if (!trained_) throw Error(ErrorCode::kUntrainedModel, kind() + " model has not been trained");
}

PreprocessedBatch GenerativeModel::Preprocess(const Matrix& raw) const {
  if (raw.cols() != schema_.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(schema_.size()) + " columns, got " +
                    std::to_string(raw.cols()));
  }
  return PreprocessRows(raw, stats_, schema_);
}

Matrix GenerativeModel::PredictPoints(const Matrix& raw) const {
  const std::vector<ParamsRow> rows = Impute(raw);
  Matrix out(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) out.row(i) = PointEstimates(rows[i]);
  return out;
}

std::vector<ParamsRow> ParamsFromOutputs(const Matrix& outputs, const DatasetSchema& schema,
                                         const TrainStats& stats, bool raw_units) {
  const OutputLayout layout = MakeOutputLayout(schema);
  if (outputs.cols() != layout.total) {
    throw Error(ErrorCode::kDimensionMismatch, "head output width does not match the schema");
  }
  std::vector<ParamsRow> rows(outputs.rows());
  std::vector<double> raw;
  for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
    rows[i].reserve(schema.size());
    for (int j = 0; j < schema.size(); ++j) {
      raw.resize(layout.widths[j]);
      for (int k = 0; k < layout.widths[j]; ++k) raw[k] = outputs(i, layout.offsets[j] + k);
      DistributionParams p = ParamsFromRaw(schema.attribute(j).var_type, raw);
      rows[i].push_back(raw_units ? Denormalize(p, stats.attributes[j]) : std::move(p));
    }
  }
  return rows;
}

RowVector PointEstimates(const ParamsRow& row) {
  RowVector out(static_cast<Eigen::Index>(row.size()));
  for (size_t j = 0; j < row.size(); ++j) out(j) = Mode(row[j]);
  return out;
}

std::unique_ptr<GenerativeModel> ModelFromCheckpoint(const Checkpoint& ckpt) {
  if (ckpt.model_kind == "hivae") return HivaeModel::FromCheckpoint(ckpt);
  if (ckpt.model_kind == "mae") return MaeModel::FromCheckpoint(ckpt);
  throw Error(ErrorCode::kCheckpointMismatch, "unknown model_kind '" + ckpt.model_kind + "'");
}

}  // namespace vhgm
