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
#include "vhgm/experiments.hpp"

#include <algorithm>
#include <sstream>

#include "vhgm/random.hpp"

namespace vhgm {

HeteroTable CanonicalTable(const DatasetSchema& schema, const Matrix& values) {
  HeteroTable t;
  t.schema_version = schema.version();
  for (const auto& a : schema.attributes()) t.columns.push_back(a.id);
  t.values = values;
  t.row_tags.assign(values.rows(), "");
  return t;
}

PreparedData Prepare(const Benchmark& bench) {
  PreparedData d;
  d.schema = bench.spec.schema;
  for (const BlockSplit& b : bench.blocks) {
    d.train.push_back(MakeSource(b.train, d.schema, b.name));
    d.val.push_back(MakeSource(b.val, d.schema, b.name));
    d.test.push_back(MakeSource(b.test, d.schema, b.name));
  }
  d.merged_train = MergeSources(d.train);
  d.merged_test = MergeSources(d.test);
  d.stats = ComputeTrainStats(CanonicalTable(d.schema, d.merged_train.values), d.schema);
  return d;
}

std::unique_ptr<GenerativeModel> MakeModel(const std::string& kind, const DatasetSchema& schema,
                                           const TrainStats& stats, const Json& model,
                                           uint64_t seed) {
  const Json doc = model.is_null() ? Json::object() : model;
  if (kind == "hivae") {
    return std::make_unique<HivaeModel>(schema, stats, HivaeConfig::FromJson(doc), seed);
  }
  if (kind == "mae") {
    return std::make_unique<MaeModel>(schema, stats, MaeConfig::FromJson(doc), seed);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown model kind '" + kind + "'");
}

TrainHistory TrainModel(GenerativeModel& model, const std::vector<SourceTable>& train,
                        const std::vector<SourceTable>& val, const TrainConfig& config,
                        const std::optional<RunDirectory>& run) {
  if (auto* h = dynamic_cast<HivaeModel*>(&model)) return TrainHivae(*h, train, val, config, run);
  if (auto* m = dynamic_cast<MaeModel*>(&model)) return TwoStageTrain(*m, train, val, config, run);
  throw Error(ErrorCode::kInvalidArgument, "unsupported model kind '" + model.kind() + "'");
}

TrainConfig DefaultTrainConfig(const std::string& kind) {
  if (kind == "hivae") return TrainConfig::HivaeDefaults();
  if (kind == "mae") return TrainConfig::MaeDefaults();
  throw Error(ErrorCode::kInvalidArgument, "unknown model kind '" + kind + "'");
}

namespace {

// Restricts a source to `keep` (schema indices), renumbered 0..k-1.
SourceTable RestrictColumns(const SourceTable& src, const std::vector<int>& keep) {
  SourceTable out;
  out.name = src.name;
  out.values.resize(src.values.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t c = 0; c < keep.size(); ++c) {
    out.values.col(static_cast<Eigen::Index>(c)) = src.values.col(keep[c]);
    out.columns.push_back(static_cast<int>(c));
  }
  return out;
}

}  // namespace

std::vector<OodRow> RunOod(const Benchmark& bench, const OodOptions& options) {
  const PreparedData d = Prepare(bench);
  const std::vector<int>& core = bench.design.core;
  if (d.train.size() < 3) throw Error(ErrorCode::kInvalidArgument, "ood needs at least 3 blocks");
  if (core.empty()) throw Error(ErrorCode::kInvalidArgument, "ood needs a common core");
  std::vector<AttributeSpec> attrs;
  for (int j : core) attrs.push_back(d.schema.attribute(j));
  const DatasetSchema schema(d.schema.version(), attrs);

  const int k = static_cast<int>(d.train.size());
  std::vector<SourceTable> train, val, test;
  std::vector<std::string> names;
  for (int b = 0; b < k; ++b) {
    train.push_back(RestrictColumns(d.train[b], core));
    val.push_back(RestrictColumns(d.val[b], core));
    test.push_back(RestrictColumns(d.test[b], core));
    names.push_back(d.train[b].name);
  }
  std::vector<int> targets;
  if (options.held_out.empty()) {
    for (int b = 0; b < k; ++b) targets.push_back(b);
  } else {
    for (const std::string& h : options.held_out) {
      const auto it = std::find(names.begin(), names.end(), h);
      if (it == names.end()) throw Error(ErrorCode::kInvalidArgument, "unknown block '" + h + "'");
      targets.push_back(static_cast<int>(it - names.begin()));
    }
  }

  TrainConfig cfg = options.train;
  cfg.mask_ratio = options.missing_rate;
  cfg.val_missing_rate = options.missing_rate;
  EvalOptions eval;
  eval.test_missing_rate = options.missing_rate;

  // Each model is trained on its own data with its own statistics.
  auto fit = [&](const std::vector<int>& blocks, uint64_t stream) {
    std::vector<SourceTable> tr, va;
    for (int b : blocks) {
      tr.push_back(train[b]);
      va.push_back(val[b]);
    }
    const TrainStats stats =
        ComputeTrainStats(CanonicalTable(schema, MergeSources(tr).values), schema);
    auto model = MakeModel(options.model_kind, schema, stats, options.model,
                           DeriveSeed(options.seed, stream));
    TrainConfig c = cfg;
    c.seed = DeriveSeed(options.seed, stream + 1000);
    TrainModel(*model, tr, va, c);
    return model;
  };
  std::vector<std::unique_ptr<GenerativeModel>> singles(k);
  auto single = [&](int b) -> const GenerativeModel& {
    if (!singles[b]) singles[b] = fit({b}, static_cast<uint64_t>(b));
    return *singles[b];
  };

  std::vector<OodRow> rows;
  for (int h : targets) {
    eval.seed = DeriveSeed(options.seed, 2000 + h);
    auto score = [&](const Imputer& m) { return Evaluate(m, test[h].values, eval).total; };
    std::vector<int> others;
    for (int b = 0; b < k; ++b) {
      if (b != h) others.push_back(b);
    }
    const auto combined = fit(others, 100 + static_cast<uint64_t>(h));
    std::string label;
    for (int b : others) label += (label.empty() ? "" : "+") + names[b];
    rows.push_back({names[h], label, "combined", score(*combined)});
    for (int b : others) rows.push_back({names[h], names[b], "single", score(single(b))});
    rows.push_back({names[h], names[h], "in-domain", score(single(h))});
  }
  return rows;
}

std::string OodToCsv(const std::vector<OodRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "held_out,train_set,role,total_error\n";
  for (const OodRow& r : rows) {
    os << r.held_out << "," << r.train_set << "," << r.role << "," << r.error << "\n";
  }
  return os.str();
}

}  // namespace vhgm
