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
#include "vhgm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "vhgm/random.hpp"

namespace vhgm {

namespace {

enum Stream : uint64_t { kShuffle = 1, kLatent = 2, kMask = 3, kValidation = 4 };

double MeanSkippingNan(const std::vector<double>& xs) {
  double s = 0.0;
  int n = 0;
  for (double x : xs) {
    if (std::isnan(x)) continue;
    s += x;
    ++n;
  }
  return n == 0 ? kMissing : s / n;
}

Matrix GatherRows(const Matrix& m, const std::vector<int>& rows, size_t begin, size_t end) {
  Matrix out(static_cast<Eigen::Index>(end - begin), m.cols());
  for (size_t k = begin; k < end; ++k) out.row(static_cast<Eigen::Index>(k - begin)) = m.row(rows[k]);
  return out;
}

ad::AdamWConfig OptimizerConfig(const TrainConfig& c) {
  ad::AdamWConfig o;
  o.learning_rate = c.learning_rate;
  o.weight_decay = c.weight_decay;
  o.beta1 = c.beta1;
  o.beta2 = c.beta2;
  return o;
}

void ValidateConfig(const TrainConfig& c) {
  if (!(c.mask_ratio >= 0.0 && c.mask_ratio < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "mask_ratio must lie in [0, 1)");
  }
  if (c.batch_size < 1 || !(c.learning_rate > 0.0) || c.weight_decay < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "batch_size and learning_rate must be positive");
  }
  if (c.loss_mode != "masked" && c.loss_mode != "reconstruction") {
    throw Error(ErrorCode::kInvalidArgument, "unknown loss_mode '" + c.loss_mode + "'");
  }
  if (c.beta_schedule != "capped" && c.beta_schedule != "linear") {
    throw Error(ErrorCode::kInvalidArgument, "unknown beta_schedule '" + c.beta_schedule + "'");
  }
}

// Tracks validation results, the best parameter snapshot and the run files.
class Monitor {
 public:
  Monitor(GenerativeModel& model, const std::vector<SourceTable>& val, const TrainConfig& config,
          const std::optional<RunDirectory>& run, const Json& model_config)
      : model_(model), val_(val), config_(config), run_(run) {
    rate_ = config.val_missing_rate < 0 ? config.mask_ratio : config.val_missing_rate;
    if (run_) {
      std::filesystem::create_directories(run_->path);
      Json doc = {{"format_version", kFormatVersion},
                  {"model_kind", model.kind()},
                  {"model", model_config},
                  {"train", config.ToJson()}};
      WriteFileText(run_->path + "/config.json", doc.dump(2) + "\n");
    }
  }

  bool enabled(int epoch) const {
    return config_.validate_every > 0 && !val_.empty() && (epoch + 1) % config_.validate_every == 0;
  }

  // Returns true when early stopping triggers.
  bool Record(EpochRecord rec, TrainHistory& h, int patience) {
    bool stop = false;
    if (enabled(rec.epoch)) {
      rec.val_objective =
          ValidationObjective(model_, val_, rate_, DeriveSeed(config_.seed, kValidation));
      objectives_.push_back(rec.val_objective);
      const StopDecision d = EarlyStop(objectives_, patience > 0 ? patience : INT32_MAX);
      if (d.best_index == static_cast<int>(objectives_.size()) - 1) {
        h.best_epoch = rec.epoch;
        h.best_objective = rec.val_objective;
        best_ = SnapshotParameters(model_.parameters());
      }
      stop = patience > 0 && d.stop;
    }
    h.attention_flops += rec.attention_flops;
    h.epochs.push_back(std::move(rec));
    if (run_) WriteFileText(run_->path + "/metrics.csv", MetricsCsv(h));
    return stop;
  }

  void Finish(TrainHistory& h, bool restore_best) {
    Checkpoint last = model_.ToCheckpoint();
    if (run_) SaveCheckpoint(last, run_->path + "/last.ckpt.json");
    if (!best_.empty()) {
      Checkpoint best = last;
      best.parameters = best_;
      if (run_) SaveCheckpoint(best, run_->path + "/best.ckpt.json");
      if (restore_best) LoadParameters(best, model_.parameters());
    } else if (run_) {
      SaveCheckpoint(last, run_->path + "/best.ckpt.json");
    }
    (void)h;
  }

 private:
  GenerativeModel& model_;
  const std::vector<SourceTable>& val_;
  const TrainConfig& config_;
  std::optional<RunDirectory> run_;
  double rate_ = 0.0;
  std::vector<double> objectives_;
  std::vector<std::pair<std::string, Matrix>> best_;
};

}  // namespace

TrainConfig TrainConfig::HivaeDefaults() { return TrainConfig{}; }

TrainConfig TrainConfig::MaeDefaults() {
  TrainConfig c;
  c.batch_size = 32;
  c.epochs = 310;
  c.patience = 0;
  c.learning_rate = 5e-4;
  c.weight_decay = 2.5e-4;
  return c;
}

Json TrainConfig::ToJson() const {
  return {{"mask_ratio", mask_ratio},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"patience", patience},
          {"stage1_epochs", stage1_epochs},
          {"stage2_epochs", stage2_epochs},
          {"learning_rate", learning_rate},
          {"weight_decay", weight_decay},
          {"beta1", beta1},
          {"beta2", beta2},
          {"beta_s_max", beta_s_max},
          {"beta_z_max", beta_z_max},
          {"anneal_end_epoch", anneal_end_epoch},
          {"beta_schedule", beta_schedule},
          {"loss_mode", loss_mode},
          {"mask_augmentation", mask_augmentation},
          {"validate_every", validate_every},
          {"val_missing_rate", val_missing_rate},
          {"seed", seed}};
}

TrainConfig TrainConfig::FromJson(const Json& doc, const TrainConfig& base) {
  TrainConfig c = base;
  c.mask_ratio = doc.value("mask_ratio", c.mask_ratio);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.epochs = doc.value("epochs", c.epochs);
  c.patience = doc.value("patience", c.patience);
  c.stage1_epochs = doc.value("stage1_epochs", c.stage1_epochs);
  c.stage2_epochs = doc.value("stage2_epochs", c.stage2_epochs);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.weight_decay = doc.value("weight_decay", c.weight_decay);
  c.beta1 = doc.value("beta1", c.beta1);
  c.beta2 = doc.value("beta2", c.beta2);
  c.beta_s_max = doc.value("beta_s_max", c.beta_s_max);
  c.beta_z_max = doc.value("beta_z_max", c.beta_z_max);
  c.anneal_end_epoch = doc.value("anneal_end_epoch", c.anneal_end_epoch);
  c.beta_schedule = doc.value("beta_schedule", c.beta_schedule);
  c.loss_mode = doc.value("loss_mode", c.loss_mode);
  c.mask_augmentation = doc.value("mask_augmentation", c.mask_augmentation);
  c.validate_every = doc.value("validate_every", c.validate_every);
  c.val_missing_rate = doc.value("val_missing_rate", c.val_missing_rate);
  c.seed = doc.value("seed", c.seed);
  ValidateConfig(c);
  return c;
}

double BetaAt(double beta_max, int epoch, const TrainConfig& config) {
  if (config.beta_schedule == "linear") {
    return beta_max * std::min(1.0, static_cast<double>(epoch) / std::max(1, config.epochs));
  }
  const int end = std::max(1, config.anneal_end_epoch);
  return beta_max * static_cast<double>(std::min(epoch, end)) / end;
}

SourceTable MakeSource(const HeteroTable& table, const DatasetSchema& schema,
                       const std::string& name) {
  SourceTable s;
  s.name = name;
  s.values = ToCanonical(table, schema).values;
  for (const std::string& id : table.columns) s.columns.push_back(schema.require_index(id));
  std::sort(s.columns.begin(), s.columns.end());
  return s;
}

SourceTable MergeSources(const std::vector<SourceTable>& sources) {
  SourceTable m;
  m.name = "merged";
  Eigen::Index rows = 0, cols = 0;
  for (const auto& s : sources) {
    rows += s.values.rows();
    cols = s.values.cols();
  }
  m.values.resize(rows, cols);
  Eigen::Index at = 0;
  for (const auto& s : sources) {
    if (s.values.cols() != cols) {
      throw Error(ErrorCode::kColumnCountMismatch, "sources are not in one canonical layout");
    }
    m.values.middleRows(at, s.values.rows()) = s.values;
    at += s.values.rows();
    m.columns.insert(m.columns.end(), s.columns.begin(), s.columns.end());
  }
  std::sort(m.columns.begin(), m.columns.end());
  m.columns.erase(std::unique(m.columns.begin(), m.columns.end()), m.columns.end());
  return m;
}

MaskDraw MaskAugment(const Matrix& raw, const std::vector<int>& row_ids, double alpha,
                     bool augmentation, int epoch, uint64_t seed) {
  if (static_cast<Eigen::Index>(row_ids.size()) != raw.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "one row id per batch row required");
  }
  const uint64_t stream = DeriveSeed(seed, augmentation ? static_cast<uint64_t>(epoch) : 0);
  MaskDraw d{raw, MissMask::Constant(raw.rows(), raw.cols(), false)};
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
      if (std::isnan(raw(i, j))) continue;
      if (HashUniform(stream, static_cast<uint64_t>(row_ids[i]), j) < alpha) {
        d.masked(i, j) = true;
        d.inputs(i, j) = kMissing;
      }
    }
  }
  return d;
}

std::vector<NllTerm> LossTerms(const Matrix& raw, const MaskDraw& draw,
                               const OutputLayout& layout, const std::string& loss_mode,
                               const std::vector<int>& scope) {
  const bool masked = loss_mode == "masked";
  std::vector<char> in_scope(raw.cols(), scope.empty() ? 1 : 0);
  for (int j : scope) in_scope.at(j) = 1;
  std::vector<NllTerm> terms;
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
      if (!in_scope[j] || std::isnan(raw(i, j))) continue;
      if (masked ? draw.masked(i, j) : !draw.masked(i, j)) {
        terms.push_back({static_cast<int>(i), layout.offsets[j], static_cast<int>(j), raw(i, j)});
      }
    }
  }
  return terms;
}

HivaeLossParts HivaeLoss(ad::Tape& tape, const HivaeModel& model, const Matrix& raw,
                         const MaskDraw& draw, int epoch, const TrainConfig& config,
                         ad::Rng& rng) {
  const PreprocessedBatch batch = PreprocessRows(draw.inputs, model.stats(), model.schema());
  const HivaeModel::Graph g =
      model.Forward(tape, HivaeModel::InputMatrix(batch), EncodeMode::kStochastic, &rng);
  HivaeLossParts parts;
  parts.nll = HeteroNll(g.outputs,
                        LossTerms(raw, draw, MakeOutputLayout(model.schema()), config.loss_mode),
                        model.schema(), model.stats());
  parts.kl_s = model.KlS(g);
  parts.kl_z = model.KlZ(g);
  parts.beta_s = BetaAt(config.beta_s_max, epoch, config);
  parts.beta_z = BetaAt(config.beta_z_max, epoch, config);
  parts.total = ad::add(parts.nll, ad::add(ad::scale(parts.kl_s, parts.beta_s),
                                           ad::scale(parts.kl_z, parts.beta_z)));
  return parts;
}

MaeLossParts MaeLoss(ad::Tape& tape, const MaeModel& model, const Matrix& raw,
                     const MaskDraw& draw, const TrainConfig& config,
                     const std::vector<int>& scope) {
  if (config.loss_mode != "masked") {
    throw Error(ErrorCode::kInvalidArgument, "mae trains only with the masked loss");
  }
  const PreprocessedBatch batch = PreprocessRows(draw.inputs, model.stats(), model.schema());
  const MaeModel::Graph g = model.Forward(tape, batch, scope);
  MaeLossParts parts;
  parts.total = HeteroNll(g.outputs,
                          LossTerms(raw, draw, MakeOutputLayout(model.schema()), "masked", scope),
                          model.schema(), model.stats());
  parts.attention_flops = g.attention_flops;
  return parts;
}

double TwoLevelMean(const std::vector<std::vector<double>>& errors) {
  std::vector<double> per_dataset;
  for (const auto& e : errors) per_dataset.push_back(MeanSkippingNan(e));
  return MeanSkippingNan(per_dataset);
}

double ValidationObjective(const Imputer& model, const std::vector<SourceTable>& tables,
                           double missing_rate, uint64_t seed) {
  std::vector<std::vector<double>> errors;
  for (size_t k = 0; k < tables.size(); ++k) {
    EvalOptions opt;
    opt.test_missing_rate = missing_rate;
    opt.seed = DeriveSeed(seed, k);
    opt.columns = tables[k].columns;
    std::vector<double> cols;
    try {
      const ErrorReport r = Evaluate(model, tables[k].values, opt);
      for (int j : tables[k].columns) cols.push_back(r.attribute_error[j]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyTestSet) throw;
    }
    errors.push_back(std::move(cols));
  }
  return TwoLevelMean(errors);
}

StopDecision EarlyStop(const std::vector<double>& objectives, int patience) {
  StopDecision d;
  if (objectives.empty()) throw Error(ErrorCode::kInvalidArgument, "no validation points");
  for (size_t k = 1; k < objectives.size(); ++k) {
    if (objectives[k] < objectives[d.best_index]) d.best_index = static_cast<int>(k);
  }
  d.stop = static_cast<int>(objectives.size()) - 1 - d.best_index >= patience;
  return d;
}

TrainHistory TrainHivae(HivaeModel& model, const std::vector<SourceTable>& train,
                        const std::vector<SourceTable>& val, const TrainConfig& config,
                        const std::optional<RunDirectory>& run) {
  ValidateConfig(config);
  const auto t0 = std::chrono::steady_clock::now();
  const SourceTable merged = MergeSources(train);
  const int n = static_cast<int>(merged.values.rows());
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "no training rows");
  model.set_trained(true);
  Monitor monitor(model, val, config, run, model.config().ToJson());
  ad::AdamW opt(OptimizerConfig(config));
  ad::Rng shuffle(DeriveSeed(config.seed, kShuffle));
  ad::Rng latent(DeriveSeed(config.seed, kLatent));
  const uint64_t mask_seed = DeriveSeed(config.seed, kMask);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  TrainHistory h;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = "merged";
    double loss = 0.0;
    for (int b = 0; b < n; b += config.batch_size) {
      const size_t end = std::min<size_t>(n, b + config.batch_size);
      const std::vector<int> ids(order.begin() + b, order.begin() + end);
      const Matrix raw = GatherRows(merged.values, order, b, end);
      const MaskDraw draw =
          MaskAugment(raw, ids, config.mask_ratio, config.mask_augmentation, epoch, mask_seed);
      ad::Tape tape;
      const HivaeLossParts parts = HivaeLoss(tape, model, raw, draw, epoch, config, latent);
      model.parameters().zero_grad();
      tape.backward(parts.total);
      opt.step(model.parameters());
      loss += parts.total.value()(0, 0);
      rec.beta_s = parts.beta_s;
      rec.beta_z = parts.beta_z;
    }
    rec.train_loss = loss / n;
    if (monitor.Record(std::move(rec), h, config.patience)) {
      h.stopped_early = true;
      break;
    }
  }
  monitor.Finish(h, true);
  h.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return h;
}

TrainHistory TwoStageTrain(MaeModel& model, const std::vector<SourceTable>& train,
                           const std::vector<SourceTable>& val, const TrainConfig& config,
                           const std::optional<RunDirectory>& run) {
  ValidateConfig(config);
  const auto t0 = std::chrono::steady_clock::now();
  const SourceTable merged = MergeSources(train);
  if (merged.values.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "no training rows");
  model.set_trained(true);
  Monitor monitor(model, val, config, run, model.config().ToJson());
  ad::AdamW opt(OptimizerConfig(config));
  ad::Rng shuffle(DeriveSeed(config.seed, kShuffle));
  const uint64_t mask_seed = DeriveSeed(config.seed, kMask);

  // Row ids are positions in the merged table so masks agree across stages.
  std::vector<std::vector<int>> source_rows;
  int at = 0;
  for (const auto& s : train) {
    std::vector<int> rows(s.values.rows());
    std::iota(rows.begin(), rows.end(), at);
    at += static_cast<int>(s.values.rows());
    source_rows.push_back(std::move(rows));
  }
  std::vector<int> all_rows(merged.values.rows());
  std::iota(all_rows.begin(), all_rows.end(), 0);

  double loss = 0.0, flops = 0.0;
  auto run_rows = [&](std::vector<int>& rows, const std::vector<int>& scope, int epoch) {
    std::shuffle(rows.begin(), rows.end(), shuffle);
    for (size_t b = 0; b < rows.size(); b += config.batch_size) {
      const size_t end = std::min(rows.size(), b + config.batch_size);
      const std::vector<int> ids(rows.begin() + b, rows.begin() + end);
      const Matrix raw = GatherRows(merged.values, rows, b, end);
      const MaskDraw draw =
          MaskAugment(raw, ids, config.mask_ratio, config.mask_augmentation, epoch, mask_seed);
      ad::Tape tape;
      const MaeLossParts parts = MaeLoss(tape, model, raw, draw, config, scope);
      model.parameters().zero_grad();
      tape.backward(parts.total);
      opt.step(model.parameters());
      loss += parts.total.value()(0, 0);
      flops += parts.attention_flops;
    }
  };

  TrainHistory h;
  const int total = config.stage1_epochs + config.stage2_epochs;
  for (int epoch = 0; epoch < total; ++epoch) {
    const bool stage1 = epoch < config.stage1_epochs;
    loss = 0.0;
    flops = 0.0;
    if (stage1) {
      for (size_t k = 0; k < train.size(); ++k) run_rows(source_rows[k], train[k].columns, epoch);
    } else {
      run_rows(all_rows, {}, epoch);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = stage1 ? "stage1" : "stage2";
    rec.train_loss = loss / static_cast<double>(merged.values.rows());
    rec.attention_flops = flops;
    monitor.Record(std::move(rec), h, 0);
  }
  monitor.Finish(h, false);
  h.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return h;
}

std::string MetricsCsv(const TrainHistory& history) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_loss,val_objective,beta_s,beta_z,stage,attention_flops\n";
  for (const auto& r : history.epochs) {
    out << r.epoch << ',' << r.train_loss << ',';
    if (!std::isnan(r.val_objective)) out << r.val_objective;
    out << ',' << r.beta_s << ',' << r.beta_z << ',' << r.stage << ',' << r.attention_flops
        << '\n';
  }
  return out.str();
}

}  // namespace vhgm
