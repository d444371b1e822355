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
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "vhgm/mae.hpp"

namespace vhgm {
namespace {

using testing::MicroSchema;
using testing::ToySchema;
using testing::ToyTable;

MaeConfig SmallConfig() {
  MaeConfig c;
  c.d_model = 12;
  c.heads = 2;
  c.ffn_hidden = 16;
  c.d_y = 10;
  return c;
}

struct Toy {
  DatasetSchema schema = ToySchema();
  HeteroTable table = ToyTable(schema, 40, 0.3, 8);
  TrainStats stats = ComputeTrainStats(table, schema);
};

int RowOf(const std::vector<int>& cols, int j) {
  return static_cast<int>(std::find(cols.begin(), cols.end(), j) - cols.begin());
}

TEST_CASE("mae tokenize examples") {
  Toy toy;
  MaeModel m(toy.schema, toy.stats, SmallConfig(), 1);
  const Matrix& pos = m.parameters().get("tok.pos").value;
  const Matrix& bias = m.parameters().get("tok.bias").value;
  RowVector row = RowVector::Constant(5, kMissing);
  row(0) = toy.stats.attributes[0].mean;
  row(3) = 1.0;
  std::vector<int> cols;
  const Matrix tok = m.Tokenize(row, &cols);
  REQUIRE(tok.rows() == 5);
  CHECK(cols == std::vector<int>{0, 3, 1, 2, 4});
  const RowVector a = tok.row(RowOf(cols, 1)) - pos.row(1);
  const RowVector b = tok.row(RowOf(cols, 4)) - pos.row(4);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-14);
  const RowVector zero = tok.row(RowOf(cols, 0)) - bias.row(0) - pos.row(0);
  CHECK(zero.cwiseAbs().maxCoeff() < 1e-14);

  // Distinct classes give distinct tokens.
  for (int j : {3, 4}) {
    std::vector<RowVector> seen;
    const int classes = toy.schema.attribute(j).var_type.num_categories;
    for (int k = 0; k < classes; ++k) {
      RowVector r = RowVector::Constant(5, kMissing);
      r(j) = k + 1;
      std::vector<int> c;
      seen.push_back(m.Tokenize(r, &c).row(0));
    }
    for (int x = 0; x < classes; ++x) {
      for (int y = x + 1; y < classes; ++y) CHECK((seen[x] - seen[y]).norm() > 1e-6);
    }
  }
}

TEST_CASE("mae decode is invariant to other queries") {
  Toy toy;
  MaeModel m(toy.schema, toy.stats, SmallConfig(), 2);
  const OutputLayout layout = MakeOutputLayout(toy.schema);
  ad::Rng rng(4);
  for (int i = 0; i < toy.table.rows(); ++i) {
    const RowVector row = toy.table.values.row(i);
    std::vector<int> missing;
    for (int j = 0; j < 5; ++j) {
      if (std::isnan(row(j))) missing.push_back(j);
    }
    if (missing.empty()) continue;
    const Matrix all = m.DecodeRow(row, missing);
    for (int j : missing) {
      std::vector<int> q{j};
      for (int k : missing) {
        if (k != j && std::bernoulli_distribution(0.5)(rng)) q.push_back(k);
      }
      std::shuffle(q.begin(), q.end(), rng);
      const Matrix sub = m.DecodeRow(row, q);
      CHECK(sub.middleCols(layout.offsets[j], layout.widths[j]) ==
            all.middleCols(layout.offsets[j], layout.widths[j]));
    }
  }
}

TEST_CASE("mae batched forward matches per-row decoding") {
  Toy toy;
  MaeModel m(toy.schema, toy.stats, SmallConfig(), 3);
  const PreprocessedBatch batch = PreprocessRows(toy.table.values, toy.stats, toy.schema);
  ad::Tape t(false);
  const auto g = m.Forward(t, batch, {});
  const OutputLayout layout = MakeOutputLayout(toy.schema);
  double worst = 0.0;
  for (int i = 0; i < toy.table.rows(); ++i) {
    std::vector<int> missing;
    for (int j = 0; j < 5; ++j) {
      if (!toy.table.observed(i, j)) missing.push_back(j);
    }
    const Matrix one = m.DecodeRow(toy.table.values.row(i), missing);
    for (int j : missing) {
      worst = std::max(worst, (one.middleCols(layout.offsets[j], layout.widths[j]) -
                               g.outputs.value().row(i).segment(layout.offsets[j],
                                                                layout.widths[j]))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
  }
  CHECK(worst < 1e-10);
  CHECK(g.attention_flops > 0.0);

  // Restricting the query scope leaves in-scope outputs unchanged.
  ad::Tape t2(false);
  const auto h = m.Forward(t2, batch, {0, 3});
  for (int i = 0; i < toy.table.rows(); ++i) {
    for (int j : {0, 3}) {
      if (toy.table.observed(i, j)) continue;
      const auto a = h.outputs.value().row(i).segment(layout.offsets[j], layout.widths[j]);
      const auto b = g.outputs.value().row(i).segment(layout.offsets[j], layout.widths[j]);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  CHECK(h.attention_flops < g.attention_flops);
}

TEST_CASE("mae permutation equivariance") {
  Toy toy;
  MaeModel a(toy.schema, toy.stats, SmallConfig(), 5);
  const std::vector<int> perm{3, 0, 4, 2, 1};
  std::vector<AttributeSpec> attrs;
  TrainStats stats_b = toy.stats;
  for (int k = 0; k < 5; ++k) {
    attrs.push_back(toy.schema.attribute(perm[k]));
    stats_b.attributes[k] = toy.stats.attributes[perm[k]];
  }
  const DatasetSchema schema_b(1, attrs);
  MaeModel b(schema_b, stats_b, SmallConfig(), 99);
  const EncodingLayout ea = MakeEncodingLayout(toy.schema), eb = MakeEncodingLayout(schema_b);
  const OutputLayout oa = MakeOutputLayout(toy.schema), ob = MakeOutputLayout(schema_b);
  for (ad::Parameter* p : b.parameters().all()) {
    const Matrix& src = a.parameters().get(p->name).value;
    if (p->name == "tok.weight") {
      for (int k = 0; k < 5; ++k) {
        p->value.middleRows(eb.offsets[k], eb.widths[k]) =
            src.middleRows(ea.offsets[perm[k]], ea.widths[perm[k]]);
      }
    } else if (p->name == "tok.bias" || p->name == "tok.pos") {
      for (int k = 0; k < 5; ++k) p->value.row(k) = src.row(perm[k]);
    } else if (p->name == "heads.weight" || p->name == "heads.bias") {
      for (int k = 0; k < 5; ++k) {
        p->value.middleCols(ob.offsets[k], ob.widths[k]) =
            src.middleCols(oa.offsets[perm[k]], oa.widths[perm[k]]);
      }
    } else {
      p->value = src;
    }
  }
  for (int i = 0; i < 10; ++i) {
    const RowVector row = toy.table.values.row(i);
    RowVector row_b(5);
    std::vector<int> miss_a, miss_b;
    for (int k = 0; k < 5; ++k) {
      row_b(k) = row(perm[k]);
      if (std::isnan(row_b(k))) miss_b.push_back(k);
      if (std::isnan(row(k))) miss_a.push_back(k);
    }
    const Matrix da = a.DecodeRow(row, miss_a), db = b.DecodeRow(row_b, miss_b);
    for (int k = 0; k < 5; ++k) {
      const auto x = db.middleCols(ob.offsets[k], ob.widths[k]);
      const auto y = da.middleCols(oa.offsets[perm[k]], oa.widths[perm[k]]);
      CHECK((x - y).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("mae impute contract") {
  Toy toy;
  MaeModel m(toy.schema, toy.stats, SmallConfig(), 6);
  CHECK_THROWS_AS(m.Impute(toy.table.values), Error);
  m.set_trained(true);
  Matrix raw = toy.table.values.topRows(6);
  raw.row(5).setConstant(kMissing);
  RowVector single = RowVector::Constant(5, kMissing);
  single(2) = 3.0;
  raw.row(4) = single;
  const auto a = m.Impute(raw);
  const auto b = m.Impute(raw);
  for (int i = 0; i < 6; ++i) {
    REQUIRE(a[i].size() == 5);
    for (int j = 0; j < 5; ++j) {
      CHECK(KindOf(a[i][j]) == toy.schema.attribute(j).var_type.kind);
      CHECK(ParamsToJson(a[i][j]) == ParamsToJson(b[i][j]));
      CHECK(std::isfinite(Mode(a[i][j])));
    }
  }
  CHECK(m.PredictPoints(raw).allFinite());
  CHECK_THROWS_AS(m.DecodeRow(toy.table.values.row(0), {7}), Error);
}

double MaxJsonDiff(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return std::abs(a.get<double>() - b.get<double>());
  if (a.is_structured() && b.is_structured() && a.size() == b.size()) {
    double worst = 0.0;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
      worst = std::max(worst, MaxJsonDiff(*ia, *ib));
    }
    return worst;
  }
  return a == b ? 0.0 : INFINITY;
}

TEST_CASE("mae batched impute matches per-row decoding") {
  const DatasetSchema s = ToySchema();
  const HeteroTable t = ToyTable(s, 300, 0.4, 9);
  MaeModel m(s, ComputeTrainStats(t, s), SmallConfig(), 7);
  m.set_trained(true);
  Matrix raw = t.values;
  raw.row(3).setConstant(kMissing);
  const auto batched = m.Impute(raw);
  double worst = 0.0;
  for (int i = 0; i < 300; ++i) {
    std::vector<int> missing;
    for (int j = 0; j < 5; ++j) {
      if (std::isnan(raw(i, j))) missing.push_back(j);
    }
    const ParamsRow row =
        ParamsFromOutputs(m.DecodeRow(raw.row(i), missing), s, m.stats(), true).front();
    for (int j = 0; j < 5; ++j) {
      worst = std::max(worst, MaxJsonDiff(ParamsToJson(batched[i][j]), ParamsToJson(row[j])));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("mae whole-model gradient check") {
  const DatasetSchema schema = MicroSchema();
  const HeteroTable full = ToyTable(schema, 5, 0.0, 13);
  const TrainStats stats = ComputeTrainStats(full, schema);
  MaeConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 1;
  cfg.ffn_hidden = 8;
  cfg.d_y = 6;
  MaeModel m(schema, stats, cfg, 17);
  Matrix masked = full.values;
  ad::Rng rng(3);
  const OutputLayout layout = MakeOutputLayout(schema);
  std::vector<NllTerm> terms;
  for (int i = 0; i < full.rows(); ++i) {
    for (int j = 0; j < schema.size(); ++j) {
      if (i == 0 || std::bernoulli_distribution(0.5)(rng)) {
        masked(i, j) = kMissing;
        terms.push_back({i, layout.offsets[j], j, full.values(i, j)});
      }
    }
  }
  const PreprocessedBatch batch = PreprocessRows(masked, stats, schema);
  auto loss = [&](ad::Tape& t) {
    return HeteroNll(m.Forward(t, batch, {}).outputs, terms, schema, stats);
  };
  const auto r = ad::grad_check_params(loss, m.parameters());
  CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("mae checkpoint round trip") {
  Toy toy;
  MaeModel m(toy.schema, toy.stats, SmallConfig(), 6);
  m.set_trained(true);
  const Checkpoint ck = CheckpointFromJson(Json::parse(CheckpointToJson(m.ToCheckpoint()).dump()));
  const auto back = ModelFromCheckpoint(ck);
  CHECK(back->kind() == "mae");
  CHECK(back->PredictPoints(toy.table.values) == m.PredictPoints(toy.table.values));
  MaeConfig bad;
  bad.d_model = 10;
  bad.heads = 4;
  CHECK_THROWS_AS(MaeConfig::FromJson(bad.ToJson()), Error);
}

}  // namespace
}  // namespace vhgm
