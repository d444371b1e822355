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
#include "vhgm/schema.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

namespace vhgm {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSchemaVersion: return "UnknownSchemaVersion";
    case ErrorCode::kColumnCountMismatch: return "ColumnCountMismatch";
    case ErrorCode::kAllMissingColumn: return "AllMissingColumn";
    case ErrorCode::kAttributeNotInSchema: return "AttributeNotInSchema";
    case ErrorCode::kInvalidSchema: return "InvalidSchema";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kNonpositiveVariance: return "NonpositiveVariance";
    case ErrorCode::kEmptyKeyRow: return "EmptyKeyRow";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kTypeMismatch: return "TypeMismatch";
    case ErrorCode::kStatsSchemaMismatch: return "StatsSchemaMismatch";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kUntrainedModel: return "UntrainedModel";
    case ErrorCode::kEmptyTestSet: return "EmptyTestSet";
    case ErrorCode::kDegenerateRange: return "DegenerateRange";
    case ErrorCode::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::kRowBudgetExceeded: return "RowBudgetExceeded";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kCheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

const char* KindName(VariableKind kind) {
  switch (kind) {
    case VariableKind::kReal: return "real";
    case VariableKind::kPositive: return "positive";
    case VariableKind::kCount: return "count";
    case VariableKind::kCategorical: return "categorical";
    case VariableKind::kOrdinal: return "ordinal";
  }
  return "real";
}

VariableKind ParseKind(const std::string& name) {
  if (name == "real") return VariableKind::kReal;
  if (name == "positive") return VariableKind::kPositive;
  if (name == "count") return VariableKind::kCount;
  if (name == "categorical") return VariableKind::kCategorical;
  if (name == "ordinal") return VariableKind::kOrdinal;
  throw Error(ErrorCode::kInvalidSchema, "unknown variable kind '" + name + "'");
}

bool VariableType::accepts(double value) const {
  if (!std::isfinite(value)) return false;
  switch (kind) {
    case VariableKind::kReal:
      return true;
    case VariableKind::kPositive:
      return value > 0.0;
    case VariableKind::kCount:
      return value >= 0.0 && value == std::floor(value);
    case VariableKind::kCategorical:
    case VariableKind::kOrdinal:
      return value == std::floor(value) && value >= 1.0 && value <= num_categories;
  }
  return false;
}

// ---------------------------------------------------------------------------
// DatasetSchema

DatasetSchema::DatasetSchema(int64_t version, std::vector<AttributeSpec> attributes)
    : version_(version), attributes_(std::move(attributes)) {
  validate();
  reindex();
}

void DatasetSchema::validate() const {
  std::set<std::string> seen;
  for (const auto& a : attributes_) {
    if (a.id.empty()) throw Error(ErrorCode::kInvalidSchema, "empty attribute id");
    if (!seen.insert(a.id).second) {
      throw Error(ErrorCode::kInvalidSchema, "duplicate attribute id '" + a.id + "'", a.id);
    }
    if (a.var_type.is_discrete_class()) {
      if (a.var_type.num_categories < 2) {
        throw Error(ErrorCode::kInvalidSchema, "attribute '" + a.id + "' needs >= 2 categories",
                    a.id);
      }
      if (!a.category_labels.empty() &&
          static_cast<int>(a.category_labels.size()) != a.var_type.num_categories) {
        throw Error(ErrorCode::kInvalidSchema,
                    "attribute '" + a.id + "' label count differs from num_categories", a.id);
      }
    } else if (a.var_type.num_categories != 0 || !a.category_labels.empty()) {
      throw Error(ErrorCode::kInvalidSchema,
                  "attribute '" + a.id + "' carries categories but is not categorical/ordinal",
                  a.id);
    }
  }
}

void DatasetSchema::reindex() {
  index_.clear();
  for (int j = 0; j < size(); ++j) index_[attributes_[j].id] = j;
}

std::optional<int> DatasetSchema::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int DatasetSchema::require_index(const std::string& id) const {
  auto j = index_of(id);
  if (!j) throw Error(ErrorCode::kAttributeNotInSchema, "attribute '" + id + "' not in schema", id);
  return *j;
}

void DatasetSchema::add_attribute(AttributeSpec spec) {
  auto next = attributes_;
  next.push_back(std::move(spec));
  *this = DatasetSchema(version_ + 1, std::move(next));
}

void DatasetSchema::remove_attribute(const std::string& id) {
  const int j = require_index(id);
  auto next = attributes_;
  next.erase(next.begin() + j);
  *this = DatasetSchema(version_ + 1, std::move(next));
}

void DatasetSchema::replace_attribute(AttributeSpec spec) {
  const int j = require_index(spec.id);
  auto next = attributes_;
  next[j] = std::move(spec);
  *this = DatasetSchema(version_ + 1, std::move(next));
}

// ---------------------------------------------------------------------------

std::optional<double> HeteroTable::cell(int i, int j) const {
  const double v = values(i, j);
  if (std::isnan(v)) return std::nullopt;
  return v;
}

MissMask ObservedMask(const Matrix& values) {
  return values.array().isNaN().select(MissMask::Constant(values.rows(), values.cols(), false),
                                       MissMask::Constant(values.rows(), values.cols(), true));
}

void SchemaStore::put(DatasetSchema schema) {
  const int64_t v = schema.version();
  schemas_.insert_or_assign(v, std::move(schema));
}

const DatasetSchema* SchemaStore::find(int64_t version) const {
  auto it = schemas_.find(version);
  return it == schemas_.end() ? nullptr : &it->second;
}

const DatasetSchema& SchemaStore::get(int64_t version) const {
  const auto* s = find(version);
  if (!s) {
    throw Error(ErrorCode::kUnknownSchemaVersion,
                "schema version " + std::to_string(version) + " is not registered");
  }
  return *s;
}

std::vector<int64_t> SchemaStore::versions() const {
  std::vector<int64_t> out;
  for (const auto& [v, _] : schemas_) out.push_back(v);
  return out;
}

ValidationReport ValidateTable(const HeteroTable& table, const DatasetSchema& schema) {
  if (table.schema_version != schema.version()) {
    throw Error(ErrorCode::kUnknownSchemaVersion,
                "table schema version " + std::to_string(table.schema_version) +
                    " does not match schema version " + std::to_string(schema.version()));
  }
  if (static_cast<Eigen::Index>(table.columns.size()) != table.values.cols()) {
    throw Error(ErrorCode::kColumnCountMismatch, "column header and value grid disagree");
  }
  if (table.cols() > schema.size()) {
    throw Error(ErrorCode::kColumnCountMismatch, "table has more columns than the schema");
  }
  ValidationReport report;
  for (int c = 0; c < table.cols(); ++c) {
    const int j = schema.require_index(table.columns[c]);
    const auto& type = schema.attribute(j).var_type;
    for (int i = 0; i < table.rows(); ++i) {
      const double v = table.values(i, c);
      if (std::isnan(v)) continue;
      if (!type.accepts(v)) report.violations.push_back({i, c, table.columns[c], v});
    }
  }
  return report;
}

ValidationReport ValidateTable(const HeteroTable& table, const SchemaStore& store) {
  return ValidateTable(table, store.get(table.schema_version));
}

namespace {

double SampleStd(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return kStdFloor;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::max(std::sqrt(ss / static_cast<double>(xs.size() - 1)), kStdFloor);
}

double Mean(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double DiscreteMode(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  double best = xs.front();
  size_t best_count = 0;
  for (size_t i = 0; i < xs.size();) {
    size_t k = i;
    while (k < xs.size() && xs[k] == xs[i]) ++k;
    if (k - i > best_count) {
      best_count = k - i;
      best = xs[i];
    }
    i = k;
  }
  return best;
}

// Modal bin centre with Freedman-Diaconis bin width.
double HistogramMode(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double lo = xs.front();
  const double hi = xs.back();
  if (hi <= lo) return lo;
  const auto q = [&](double f) { return xs[static_cast<size_t>(f * (xs.size() - 1))]; };
  double width = 2.0 * (q(0.75) - q(0.25)) / std::cbrt(static_cast<double>(xs.size()));
  if (width <= 0.0) width = (hi - lo) / 10.0;
  const int bins = std::clamp(static_cast<int>(std::ceil((hi - lo) / width)), 1, 10000);
  width = (hi - lo) / bins;
  std::vector<int> counts(bins, 0);
  for (double x : xs) counts[std::min(bins - 1, static_cast<int>((x - lo) / width))]++;
  const int b = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  return lo + (b + 0.5) * width;
}

}  // namespace

TrainStats ComputeTrainStats(const HeteroTable& table, const DatasetSchema& schema) {
  if (table.cols() != schema.size()) {
    throw Error(ErrorCode::kColumnCountMismatch, "stats need a canonical table");
  }
  TrainStats stats;
  stats.schema_version = schema.version();
  stats.attributes.resize(schema.size());
  for (int j = 0; j < schema.size(); ++j) {
    const auto& spec = schema.attribute(j);
    std::vector<double> xs;
    for (int i = 0; i < table.rows(); ++i) {
      if (!table.observed(i, j)) continue;
      if (!spec.var_type.accepts(table.values(i, j))) {
        throw Error(ErrorCode::kTypeMismatch,
                    "row " + std::to_string(i) + " of '" + spec.id + "' is outside its domain",
                    spec.id);
      }
      xs.push_back(table.values(i, j));
    }
    if (xs.empty()) {
      throw Error(ErrorCode::kAllMissingColumn,
                  "column " + std::to_string(j) + " ('" + spec.id + "') has no observed values",
                  spec.id);
    }
    AttributeStats& s = stats.attributes[j];
    s.kind = spec.var_type.kind;
    switch (s.kind) {
      case VariableKind::kReal:
        s.mean = Mean(xs);
        s.std = SampleStd(xs, s.mean);
        s.raw_mean = s.mean;
        s.mode = HistogramMode(xs);
        break;
      case VariableKind::kPositive: {
        std::vector<double> logs(xs.size());
        std::transform(xs.begin(), xs.end(), logs.begin(), [](double x) { return std::log(x); });
        s.mean = Mean(logs);
        s.std = SampleStd(logs, s.mean);
        s.raw_mean = Mean(xs);
        s.mode = std::exp(HistogramMode(logs));
        break;
      }
      case VariableKind::kCount: {
        std::vector<double> logs(xs.size());
        std::transform(xs.begin(), xs.end(), logs.begin(), [](double x) { return std::log1p(x); });
        s.mean = Mean(logs);
        s.std = SampleStd(logs, s.mean);
        s.raw_mean = Mean(xs);
        s.mode = DiscreteMode(xs);
        break;
      }
      case VariableKind::kCategorical:
      case VariableKind::kOrdinal: {
        const int c = spec.var_type.num_categories;
        s.class_probs = Vector::Zero(c);
        for (double x : xs) s.class_probs(static_cast<int>(x) - 1) += 1.0;
        s.class_probs /= static_cast<double>(xs.size());
        s.raw_mean = Mean(xs);
        s.mode = DiscreteMode(xs);
        break;
      }
    }
  }
  return stats;
}

HeteroTable MergeTables(const std::vector<HeteroTable>& tables, const DatasetSchema& schema) {
  HeteroTable out;
  out.schema_version = schema.version();
  for (const auto& a : schema.attributes()) out.columns.push_back(a.id);
  int total = 0;
  for (const auto& t : tables) total += t.rows();
  out.values = Matrix::Constant(total, schema.size(), kMissing);
  out.row_tags.reserve(total);
  int offset = 0;
  for (const auto& t : tables) {
    if (static_cast<Eigen::Index>(t.columns.size()) != t.values.cols()) {
      throw Error(ErrorCode::kColumnCountMismatch, "column header and value grid disagree");
    }
    for (int c = 0; c < t.cols(); ++c) {
      const int j = schema.require_index(t.columns[c]);
      out.values.block(offset, j, t.rows(), 1) = t.values.col(c);
    }
    for (int i = 0; i < t.rows(); ++i) {
      out.row_tags.push_back(t.row_tags.empty() ? std::string() : t.row_tags[i]);
    }
    offset += t.rows();
  }
  return out;
}

HeteroTable ToCanonical(const HeteroTable& table, const DatasetSchema& schema) {
  return MergeTables({table}, schema);
}

HeteroTable SelectRows(const HeteroTable& table, const std::vector<int>& rows) {
  HeteroTable out;
  out.schema_version = table.schema_version;
  out.columns = table.columns;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), table.values.cols());
  out.row_tags.reserve(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    out.values.row(static_cast<Eigen::Index>(r)) = table.values.row(rows[r]);
    out.row_tags.push_back(table.row_tags.empty() ? std::string() : table.row_tags[rows[r]]);
  }
  return out;
}

}  // namespace vhgm
