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
#ifndef VHGM_SCHEMA_HPP_
#define VHGM_SCHEMA_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vhgm/error.hpp"

namespace vhgm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class VariableKind { kReal, kPositive, kCount, kCategorical, kOrdinal };

const char* KindName(VariableKind kind);
VariableKind ParseKind(const std::string& name);

struct VariableType {
  VariableKind kind = VariableKind::kReal;
  // Number of classes; 0 unless kind is categorical or ordinal.
  int num_categories = 0;

  bool is_discrete_class() const {
    return kind == VariableKind::kCategorical || kind == VariableKind::kOrdinal;
  }
  bool is_continuous() const {
    return kind == VariableKind::kReal || kind == VariableKind::kPositive;
  }
  // True when `value` satisfies the type's domain.
  bool accepts(double value) const;
};

struct AttributeSpec {
  std::string id;
  std::string name;
  VariableType var_type;
  std::vector<std::string> category_labels;
};

class DatasetSchema {
 public:
  DatasetSchema() = default;
  DatasetSchema(int64_t version, std::vector<AttributeSpec> attributes);

  int64_t version() const { return version_; }
  int size() const { return static_cast<int>(attributes_.size()); }
  const std::vector<AttributeSpec>& attributes() const { return attributes_; }
  const AttributeSpec& attribute(int j) const { return attributes_.at(j); }
  std::optional<int> index_of(const std::string& id) const;
  int require_index(const std::string& id) const;

  // Editing operations bump the version.
  void add_attribute(AttributeSpec spec);
  void remove_attribute(const std::string& id);
  void replace_attribute(AttributeSpec spec);

 private:
  void validate() const;
  void reindex();

  int64_t version_ = 1;
  std::vector<AttributeSpec> attributes_;
  std::map<std::string, int> index_;
};

// Rows x columns grid with NaN marking a missing cell. Column order is given
// by `columns` (attribute ids); canonical tables carry every schema column in
// schema order.
struct HeteroTable {
  int64_t schema_version = 0;
  std::vector<std::string> columns;
  Matrix values;
  std::vector<std::string> row_tags;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
  std::optional<double> cell(int i, int j) const;
  bool observed(int i, int j) const { return !std::isnan(values(i, j)); }
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// 1 = observed, 0 = missing.
using MissMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
MissMask ObservedMask(const Matrix& values);

struct CellViolation {
  int row;
  int col;
  std::string attribute_id;
  double value;
};

struct ValidationReport {
  std::vector<CellViolation> violations;
  bool valid() const { return violations.empty(); }
};

// Registry of schema versions known to a deployment.
class SchemaStore {
 public:
  void put(DatasetSchema schema);
  const DatasetSchema* find(int64_t version) const;
  const DatasetSchema& get(int64_t version) const;
  std::vector<int64_t> versions() const;

 private:
  std::map<int64_t, DatasetSchema> schemas_;
};

ValidationReport ValidateTable(const HeteroTable& table, const DatasetSchema& schema);
ValidationReport ValidateTable(const HeteroTable& table, const SchemaStore& store);

// Per-attribute training statistics. Which fields are meaningful depends on
// the attribute kind:
//   real       mean/std of values
//   positive   mean/std of log values
//   count      raw_mean of values, mean/std of log(1 + x)
//   cat/ord    class_probs
struct AttributeStats {
  VariableKind kind = VariableKind::kReal;
  double mean = 0.0;
  double std = 1.0;
  double raw_mean = 0.0;
  Vector class_probs;
  // Empirical mode of observed values: most frequent value for discrete
  // kinds, modal histogram-bin centre for real/positive.
  double mode = 0.0;
};

struct TrainStats {
  int64_t schema_version = 0;
  std::vector<AttributeStats> attributes;
  int size() const { return static_cast<int>(attributes.size()); }
};

inline constexpr double kStdFloor = 1e-6;

// `table` must be canonical (schema columns in schema order).
TrainStats ComputeTrainStats(const HeteroTable& table, const DatasetSchema& schema);

// Union of source tables in schema column order; cells of columns absent from
// a source are missing for all of its rows.
HeteroTable MergeTables(const std::vector<HeteroTable>& tables, const DatasetSchema& schema);

// Reorders/extends a single table into canonical schema layout.
HeteroTable ToCanonical(const HeteroTable& table, const DatasetSchema& schema);

// Row subset helper.
HeteroTable SelectRows(const HeteroTable& table, const std::vector<int>& rows);

}  // namespace vhgm

#endif  // VHGM_SCHEMA_HPP_
