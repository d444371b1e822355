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
#ifndef VHGM_SYNTH_HPP_
#define VHGM_SYNTH_HPP_

#include <map>
#include <string>
#include <vector>

#include "vhgm/io.hpp"
#include "vhgm/model.hpp"
#include "vhgm/schema.hpp"

namespace vhgm {

// Maps a standard-normal latent coordinate u to an observed value:
//   real      loc + scale * u
//   positive  exp(loc + scale * u)
//   count     Poisson(rate) quantile at Phi(u)
//   cat/ord   index of the probability bin containing Phi(u), 1-based
struct MarginalSpec {
  VariableKind kind = VariableKind::kReal;
  double loc = 0.0;
  double scale = 1.0;
  double rate = 1.0;
  Vector probs;
};

struct CopulaSpec {
  DatasetSchema schema;
  // Latent correlation, unit diagonal.
  Matrix sigma;
  std::vector<MarginalSpec> marginals;
};

struct BlockSpec {
  std::string name;
  int rows = 0;
  std::vector<int> columns;
};

struct BlockDesign {
  std::vector<BlockSpec> blocks;
  std::vector<int> core;
};

double NormalCdf(double x);
double NormalQuantile(double p);
double MarginalValue(const MarginalSpec& m, double u);

// Fully observed table of `n` draws. Throws NotPositiveDefinite.
HeteroTable SamplePopulation(const CopulaSpec& spec, int n, uint64_t seed);

// Consecutive disjoint row ranges, one per block, each keeping only its
// columns. Throws RowBudgetExceeded.
std::vector<HeteroTable> CarveBlocks(const HeteroTable& population, const BlockDesign& design);

struct ConditionalSummary {
  // Target's latent coordinate given the observations.
  double latent_mean = 0.0;
  double latent_var = 1.0;
  // Target in raw units.
  double mean = 0.0;
  double std = 0.0;
  int samples = 0;
};

// Distribution of `target` given `observed` (schema index -> raw value).
// Real/positive observations are conditioned in closed form; discrete ones
// by rejection on their latent intervals. With `force_monte_carlo` the
// latent moments are also estimated from draws.
ConditionalSummary TrueConditional(const CopulaSpec& spec, const std::map<int, double>& observed,
                                   int target, uint64_t seed, int samples = 100000,
                                   bool force_monte_carlo = false);

// `n` joint draws (n x p raw values) from the population conditioned on
// `observed`; observed columns hold their given values.
Matrix ConditionalSamples(const CopulaSpec& spec, const std::map<int, double>& observed, int n,
                          uint64_t seed);

// Bayes-optimal point predictions under the evaluation metrics, from the
// true conditional law: conditional mean for count/positive/real (squared
// error), median class for ordinal (absolute error), modal class for
// categorical. A lower bound for any model on data from `spec`.
class CopulaOracle : public Imputer {
 public:
  CopulaOracle(CopulaSpec spec, int samples = 2000, uint64_t seed = 0);
  const DatasetSchema& schema() const override { return spec_.schema; }
  std::string kind() const override { return "copula-oracle"; }
  Matrix PredictPoints(const Matrix& raw) const override;

 private:
  RowVector Optimal(const Matrix& draws) const;

  CopulaSpec spec_;
  int samples_;
  uint64_t seed_;
  RowVector marginal_;
};

// Rank-6 factor correlation over 48 attributes with a 6-column core.
CopulaSpec DefaultCopula(uint64_t seed);
BlockDesign DefaultDesign();

struct BlockSplit {
  std::string name;
  std::vector<int> columns;
  HeteroTable train;
  HeteroTable val;
  HeteroTable test;
};

struct Benchmark {
  CopulaSpec spec;
  BlockDesign design;
  std::vector<BlockSplit> blocks;
};

// Population, carving and per-block 70/15/15 train/val/test split.
Benchmark MakeBenchmark(uint64_t seed);
Benchmark MakeBenchmark(const CopulaSpec& spec, const BlockDesign& design, uint64_t seed);

Json CopulaToJson(const CopulaSpec& spec);
CopulaSpec CopulaFromJson(const Json& doc);
Json DesignToJson(const BlockDesign& design);
BlockDesign DesignFromJson(const Json& doc);

// Writes schema.json, manifest.json and <block>_{train,val,test}.csv under
// `dir`. Returns the bundle checksum (over all files in a fixed order).
std::string WriteBenchmark(const Benchmark& bench, const std::string& dir, uint64_t seed);
// Reads a bundle written by WriteBenchmark.
Benchmark ReadBenchmark(const std::string& dir);

}  // namespace vhgm

#endif  // VHGM_SYNTH_HPP_
