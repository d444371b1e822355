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
// Operator entry points. All relative paths are taken under --workdir.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "vhgm/experiments.hpp"
#include "vhgm/random.hpp"
#include "vhgm/service.hpp"

namespace fs = std::filesystem;
using namespace vhgm;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct Globals {
  std::string workdir = ".";
  uint64_t seed = 0;
  std::string Path(const std::string& p) const {
    return fs::path(p).is_absolute() ? p : (fs::path(workdir) / p).string();
  }
};

Json ReadJsonFile(const std::string& path) {
  try {
    return Json::parse(ReadFileText(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
}

std::vector<double> ParseGrid(const std::string& spec) {
  std::vector<double> grid;
  if (spec.find(':') != std::string::npos) {
    double lo = 0, hi = 0;
    int n = 0;
    char c1 = 0, c2 = 0;
    std::istringstream is(spec);
    if (!(is >> lo >> c1 >> hi >> c2 >> n) || n < 1) {
      throw Error(ErrorCode::kInvalidArgument, "grid must be lo:hi:n or a comma list");
    }
    for (int k = 0; k < n; ++k) grid.push_back(n == 1 ? lo : lo + (hi - lo) * k / (n - 1));
    return grid;
  }
  std::istringstream is(spec);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      grid.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "bad grid value '" + item + "'");
    }
  }
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "empty grid");
  return grid;
}

// ---- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string out = "bench";
  std::string copula;
  std::string design;
};

int Generate(const Globals& g, const GenerateArgs& a) {
  const CopulaSpec spec =
      a.copula.empty() ? DefaultCopula(g.seed) : CopulaFromJson(ReadJsonFile(g.Path(a.copula)));
  const BlockDesign design =
      a.design.empty() ? DefaultDesign() : DesignFromJson(ReadJsonFile(g.Path(a.design)));
  const Benchmark bench = MakeBenchmark(spec, design, g.seed);
  const std::string checksum = WriteBenchmark(bench, g.Path(a.out), g.seed);
  std::cout << Json{{"bundle", g.Path(a.out)}, {"checksum", checksum}}.dump() << "\n";
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string model = "hivae";
  std::string config;
  std::string data = "bench";
  std::string out;
  std::optional<int> epochs, stage1_epochs, stage2_epochs, batch_size, patience;
  std::optional<double> lr, mask_ratio;
  std::optional<std::string> loss_mode;
  bool no_augmentation = false;
};

int Train(const Globals& g, const TrainArgs& a) {
  // Precedence: flags, then the config file, then defaults.
  Json cfg_doc = a.config.empty() ? Json::object() : ReadJsonFile(g.Path(a.config));
  TrainConfig tc = TrainConfig::FromJson(cfg_doc.value("train", Json::object()),
                                         DefaultTrainConfig(a.model));
  if (!cfg_doc.value("train", Json::object()).contains("seed")) tc.seed = g.seed;
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.stage1_epochs) tc.stage1_epochs = *a.stage1_epochs;
  if (a.stage2_epochs) tc.stage2_epochs = *a.stage2_epochs;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.patience) tc.patience = *a.patience;
  if (a.lr) tc.learning_rate = *a.lr;
  if (a.mask_ratio) tc.mask_ratio = *a.mask_ratio;
  if (a.loss_mode) tc.loss_mode = *a.loss_mode;
  if (a.no_augmentation) tc.mask_augmentation = false;
  tc = TrainConfig::FromJson(tc.ToJson(), tc);  // re-validate after overrides

  const PreparedData d = Prepare(ReadBenchmark(g.Path(a.data)));
  auto model = MakeModel(a.model, d.schema, d.stats, cfg_doc.value("model", Json::object()),
                         DeriveSeed(tc.seed, 0));
  const std::string out = g.Path(a.out.empty() ? "runs/" + a.model : a.out);
  fs::create_directories(out);
  const TrainHistory h = TrainModel(*model, d.train, d.val, tc, RunDirectory{out});
  SaveCheckpoint(model->ToCheckpoint(), out + "/model.ckpt.json");
  std::cout << Json{{"run_dir", out},
                    {"checkpoint", out + "/model.ckpt.json"},
                    {"epochs", h.epochs.size()},
                    {"best_epoch", h.best_epoch},
                    {"stopped_early", h.stopped_early},
                    {"seconds", h.seconds}}
                   .dump()
            << "\n";
  return 0;
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string data = "bench";
  std::string test;
  double rate = kDefaultTestMissingRate;
  std::string out;
};

int EvaluateCmd(const Globals& g, const EvaluateArgs& a) {
  std::unique_ptr<Imputer> imputer;
  std::optional<PreparedData> d;
  auto data = [&]() -> const PreparedData& {
    if (!d) d = Prepare(ReadBenchmark(g.Path(a.data)));
    return *d;
  };
  if (a.checkpoint == "mode") {
    imputer = std::make_unique<ConstantImputer>(ModeImputer(data().schema, data().stats));
  } else if (a.checkpoint == "mode-mean") {
    imputer = std::make_unique<ConstantImputer>(ModeMeanImputer(data().schema, data().stats));
  } else {
    imputer = ModelFromCheckpoint(LoadCheckpoint(g.Path(a.checkpoint)));
  }
  Matrix test;
  if (a.test.empty()) {
    test = data().merged_test.values;
  } else {
    const DatasetSchema& s = imputer->schema();
    test = MakeSource(ReadTableFile(g.Path(a.test), s.version()), s, "test").values;
  }
  EvalOptions opt;
  opt.test_missing_rate = a.rate;
  opt.seed = g.seed;
  opt.model_id = a.checkpoint;
  const ErrorReport report = Evaluate(*imputer, test, opt);
  const std::string stem = g.Path(a.out.empty() ? "reports/" + imputer->kind() : a.out);
  fs::create_directories(fs::path(stem).parent_path());
  WriteReport(report, stem);
  std::cout << ReportToJson(report).dump() << "\n";
  return 0;
}

// ---- probe ------------------------------------------------------------------

struct ProbeArgs {
  std::string checkpoint;
  std::string x, y;
  std::string grid = "-2:2:21";
  int n_sampling = 100;
  std::string out;
};

int Probe(const Globals& g, const ProbeArgs& a) {
  const auto model = ModelFromCheckpoint(LoadCheckpoint(g.Path(a.checkpoint)));
  const DatasetSchema& s = model->schema();
  const auto curve = CorrelationProbe(*model, s.require_index(a.x), s.require_index(a.y),
                                      ParseGrid(a.grid), a.n_sampling, g.seed);
  const std::string csv = ProbeToCsv(curve);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    WriteFileText(g.Path(a.out), csv);
  }
  return 0;
}

// ---- ood ---------------------------------------------------------------------

struct OodArgs {
  std::string data = "bench";
  std::string model = "hivae";
  std::string config;
  std::string hold_out;
  double rate = 0.5;
  std::string out;
};

int Ood(const Globals& g, const OodArgs& a) {
  const Benchmark bench = ReadBenchmark(g.Path(a.data));
  Json cfg_doc = a.config.empty() ? Json::object() : ReadJsonFile(g.Path(a.config));
  OodOptions opt;
  opt.model_kind = a.model;
  opt.model = cfg_doc.value("model", Json::object());
  opt.train = TrainConfig::FromJson(cfg_doc.value("train", Json::object()),
                                    DefaultTrainConfig(a.model));
  opt.missing_rate = a.rate;
  opt.seed = g.seed;
  if (!a.hold_out.empty()) opt.held_out = {a.hold_out};
  const std::vector<OodRow> table = RunOod(bench, opt);
  const std::string csv = OodToCsv(table);
  if (!a.out.empty()) WriteFileText(g.Path(a.out), csv);
  std::cout << csv;
  return 0;
}

// ---- serve ------------------------------------------------------------------

struct ServeArgs {
  std::string registry = "registry";
  std::string host = "127.0.0.1";
  int port = 8080;
  int max_n = 1000;
};

int Serve(const Globals& g, const ServeArgs& a) {
  ServiceConfig cfg;
  cfg.host = a.host;
  cfg.port = a.port;
  cfg.registry_dir = g.Path(a.registry);
  cfg.max_sampling_n = a.max_n;
  PredictionService service(LoadRegistry(cfg.registry_dir), cfg);
  std::cerr << "listening on " << cfg.host << ":" << cfg.port << "\n";
  return RunServer(service) ? 0 : kExitRuntime;
}

void Report(const std::string& code, const std::string& message,
            const std::string& attribute = {}) {
  std::cerr << ErrorBody(code, message, attribute) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous generative imputation toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--workdir", g.workdir, "Base directory for relative paths");
  app.add_option("--seed", g.seed, "Random seed");

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Write a synthetic benchmark bundle");
  gen->add_option("--out", ga.out);
  gen->add_option("--copula", ga.copula, "Copula spec JSON (default copula when absent)");
  gen->add_option("--design", ga.design, "Block design JSON");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model on a bundle");
  train->add_option("--model", ta.model)->check(CLI::IsMember({"hivae", "mae"}));
  train->add_option("--config", ta.config, "JSON with optional 'model' and 'train' sections");
  train->add_option("--data", ta.data);
  train->add_option("--out", ta.out, "Run directory");
  train->add_option("--epochs", ta.epochs);
  train->add_option("--stage1-epochs", ta.stage1_epochs);
  train->add_option("--stage2-epochs", ta.stage2_epochs);
  train->add_option("--batch-size", ta.batch_size);
  train->add_option("--patience", ta.patience);
  train->add_option("--lr", ta.lr);
  train->add_option("--mask-ratio", ta.mask_ratio);
  train->add_option("--loss-mode", ta.loss_mode);
  train->add_flag("--no-augmentation", ta.no_augmentation);

  EvaluateArgs ea;
  auto* eval = app.add_subcommand("evaluate", "Score a checkpoint or baseline");
  eval->add_option("--checkpoint", ea.checkpoint, "Checkpoint path, 'mode' or 'mode-mean'")
      ->required();
  eval->add_option("--data", ea.data);
  eval->add_option("--test", ea.test, "Test table CSV (default: bundle test splits)");
  eval->add_option("--rate", ea.rate, "Test missing rate");
  eval->add_option("--out", ea.out, "Report path stem");

  ProbeArgs pa;
  auto* probe = app.add_subcommand("probe", "Sweep x and record the prediction of y");
  probe->add_option("--checkpoint", pa.checkpoint)->required();
  probe->add_option("--x", pa.x)->required();
  probe->add_option("--y", pa.y)->required();
  probe->add_option("--grid", pa.grid, "lo:hi:n or comma list");
  probe->add_option("--n-sampling", pa.n_sampling);
  probe->add_option("--out", pa.out);

  OodArgs oa;
  auto* ood = app.add_subcommand("ood", "Single-block versus combined training");
  ood->add_option("--data", oa.data);
  ood->add_option("--model", oa.model)->check(CLI::IsMember({"hivae", "mae"}));
  ood->add_option("--config", oa.config);
  ood->add_option("--hold-out", oa.hold_out, "Held-out block (default: each in turn)");
  ood->add_option("--rate", oa.rate, "Train and test missing rate");
  ood->add_option("--out", oa.out);

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run the prediction service");
  serve->add_option("--registry", sa.registry);
  serve->add_option("--host", sa.host);
  serve->add_option("--port", sa.port);
  serve->add_option("--max-n", sa.max_n);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*gen) return Generate(g, ga);
    if (*train) return Train(g, ta);
    if (*eval) return EvaluateCmd(g, ea);
    if (*probe) return Probe(g, pa);
    if (*ood) return Ood(g, oa);
    if (*serve) return Serve(g, sa);
  } catch (const Error& e) {
    Report(ErrorCodeName(e.code()), e.what(), e.attribute_id());
    return e.code() == ErrorCode::kIoError ? kExitRuntime : kExitValidation;
  } catch (const std::exception& e) {
    Report("Runtime", e.what());
    return kExitRuntime;
  }
  return kExitValidation;
}
