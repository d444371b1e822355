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
#ifndef VHGM_EXPERIMENTS_HPP_
#define VHGM_EXPERIMENTS_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vhgm/synth.hpp"
#include "vhgm/trainer.hpp"

namespace vhgm {

// Benchmark blocks as canonical sources, with statistics over the union of
// the training splits.
struct PreparedData {
  DatasetSchema schema;
  std::vector<SourceTable> train;
  std::vector<SourceTable> val;
  std::vector<SourceTable> test;
  SourceTable merged_train;
  SourceTable merged_test;
  TrainStats stats;
};
PreparedData Prepare(const Benchmark& bench);

// Canonical table wrapper for statistics.
HeteroTable CanonicalTable(const DatasetSchema& schema, const Matrix& values);

// `model` is the architecture config document (defaults when null).
std::unique_ptr<GenerativeModel> MakeModel(const std::string& kind, const DatasetSchema& schema,
                                           const TrainStats& stats, const Json& model,
                                           uint64_t seed);

// HIVAE: early-stopped training on the merged sources. MAE: two-stage.
TrainHistory TrainModel(GenerativeModel& model, const std::vector<SourceTable>& train,
                        const std::vector<SourceTable>& val, const TrainConfig& config,
                        const std::optional<RunDirectory>& run = std::nullopt);

TrainConfig DefaultTrainConfig(const std::string& kind);

struct OodOptions {
  std::string model_kind = "hivae";
  Json model;
  TrainConfig train;
  // Train masking and test masking rate.
  double missing_rate = 0.5;
  uint64_t seed = 0;
  // Blocks to hold out in turn; empty = every block.
  std::vector<std::string> held_out;
};

// One row per (held-out block, training set). Roles: "combined" (all other
// blocks), "single" (one other block) and "in-domain" (the held-out block).
// Models see only the core attributes; errors are on the held-out test split.
struct OodRow {
  std::string held_out;
  std::string train_set;
  std::string role;
  double error = kMissing;
};
std::vector<OodRow> RunOod(const Benchmark& bench, const OodOptions& options);
std::string OodToCsv(const std::vector<OodRow>& rows);

}  // namespace vhgm

#endif  // VHGM_EXPERIMENTS_HPP_
