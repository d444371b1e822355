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
#ifndef VHGM_TRAINER_HPP_
#define VHGM_TRAINER_HPP_

#include <optional>
#include <string>
#include <vector>

#include "vhgm/eval.hpp"
#include "vhgm/hivae.hpp"
#include "vhgm/mae.hpp"

namespace vhgm {

struct TrainConfig {
  double mask_ratio = 0.99;
  int batch_size = 1024;
  // HIVAE epoch budget (early stopping may end sooner).
  int epochs = 1000;
  int patience = 50;
  // MAE two-stage budgets.
  int stage1_epochs = 300;
  int stage2_epochs = 10;
  double learning_rate = 4.6e-5;
  double weight_decay = 0.097;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double beta_s_max = 0.0002;
  double beta_z_max = 0.00007;
  int anneal_end_epoch = 100;
  // "capped": linear to anneal_end_epoch then constant.
  // "linear": beta_max * t / epochs.
  std::string beta_schedule = "capped";
  // "masked" scores artificially masked cells, "reconstruction" the cells
  // left visible to the encoder.
  std::string loss_mode = "masked";
  bool mask_augmentation = true;
  // Validate every k epochs; 0 disables validation.
  int validate_every = 1;
  // Missing rate applied to validation tables; negative = mask_ratio.
  double val_missing_rate = -1.0;
  uint64_t seed = 0;

  static TrainConfig HivaeDefaults();
  static TrainConfig MaeDefaults();
  Json ToJson() const;
  // Fields absent from `doc` keep the values of `base`.
  static TrainConfig FromJson(const Json& doc, const TrainConfig& base);
};

// Linear KL weight schedule.
double BetaAt(double beta_max, int epoch, const TrainConfig& config);

// One source table in canonical schema layout plus the schema indices of the
// attributes it carries.
struct SourceTable {
  std::string name;
  Matrix values;
  std::vector<int> columns;
};
SourceTable MakeSource(const HeteroTable& table, const DatasetSchema& schema,
                       const std::string& name);
// Concatenated rows of all sources; columns = union.
SourceTable MergeSources(const std::vector<SourceTable>& sources);

// Artificial mask over observed cells. `row_ids` are stable row identifiers
// so a row's pattern depends only on (seed, epoch, row id).
struct MaskDraw {
  Matrix inputs;     // raw cells with masked entries set to NaN
  MissMask masked;   // true where an observed cell was hidden
};
MaskDraw MaskAugment(const Matrix& raw, const std::vector<int>& row_ids, double alpha,
                     bool augmentation, int epoch, uint64_t seed);

// Cells scored by the loss for the configured loss_mode.
std::vector<NllTerm> LossTerms(const Matrix& raw, const MaskDraw& draw,
                               const OutputLayout& layout, const std::string& loss_mode,
                               const std::vector<int>& scope = {});

struct HivaeLossParts {
  ad::Var total;
  ad::Var nll;
  ad::Var kl_s;
  ad::Var kl_z;
  double beta_s = 0.0;
  double beta_z = 0.0;
};
HivaeLossParts HivaeLoss(ad::Tape& tape, const HivaeModel& model, const Matrix& raw,
                         const MaskDraw& draw, int epoch, const TrainConfig& config,
                         ad::Rng& rng);

struct MaeLossParts {
  ad::Var total;
  double attention_flops = 0.0;
};
// `scope` limits queries and scored cells to a source's columns.
MaeLossParts MaeLoss(ad::Tape& tape, const MaeModel& model, const Matrix& raw,
                     const MaskDraw& draw, const TrainConfig& config,
                     const std::vector<int>& scope = {});

// Mean over datasets of the mean over that dataset's columns of the
// type-appropriate error at `missing_rate`.
double ValidationObjective(const Imputer& model, const std::vector<SourceTable>& tables,
                           double missing_rate, uint64_t seed);
// Two-level mean of per-dataset column errors (NaN entries skipped).
double TwoLevelMean(const std::vector<std::vector<double>>& errors);

struct StopDecision {
  bool stop = false;
  int best_index = 0;
};
// Stops once `patience` consecutive validations fail to improve on the best.
StopDecision EarlyStop(const std::vector<double>& objectives, int patience);

struct EpochRecord {
  int epoch = 0;
  std::string stage;
  double train_loss = 0.0;
  double val_objective = kMissing;
  double beta_s = 0.0;
  double beta_z = 0.0;
  double attention_flops = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_objective = kMissing;
  bool stopped_early = false;
  double attention_flops = 0.0;
  double seconds = 0.0;
};

// Output directory: config.json, metrics.csv, best.ckpt.json, last.ckpt.json.
struct RunDirectory {
  std::string path;
};

// Trains on the union of `train` rows. With validation enabled the best
// parameters are restored at the end.
TrainHistory TrainHivae(HivaeModel& model, const std::vector<SourceTable>& train,
                        const std::vector<SourceTable>& val, const TrainConfig& config,
                        const std::optional<RunDirectory>& run = std::nullopt);

// Stage 1 cycles through the sources in order each epoch with attention
// restricted to that source's columns; stage 2 trains on the merged rows.
TrainHistory TwoStageTrain(MaeModel& model, const std::vector<SourceTable>& train,
                           const std::vector<SourceTable>& val, const TrainConfig& config,
                           const std::optional<RunDirectory>& run = std::nullopt);

std::string MetricsCsv(const TrainHistory& history);

}  // namespace vhgm

#endif  // VHGM_TRAINER_HPP_
