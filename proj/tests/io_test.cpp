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

#include <random>
#include <sstream>

#include "vhgm/io.hpp"

namespace vhgm {
namespace {

DatasetSchema MixedSchema() {
  return DatasetSchema(
      4, {{"age", "Age", {VariableKind::kReal, 0}, {}},
          {"bmi", "BMI, adult", {VariableKind::kPositive, 0}, {}},
          {"steps", "Steps", {VariableKind::kCount, 0}, {}},
          {"blood", "Blood type", {VariableKind::kCategorical, 4}, {"A", "B", "O", "AB"}},
          {"pain", "Pain \"level\"", {VariableKind::kOrdinal, 3}, {"low", "mid", "high"}}});
}

TEST_CASE("schema json round trip") {
  DatasetSchema s = MixedSchema();
  Json doc = SchemaToJson(s);
  CHECK(doc["version"] == 4);
  CHECK(doc["attributes"].size() == 5);
  CHECK(!doc["attributes"][0].contains("num_categories"));
  DatasetSchema back = SchemaFromJson(Json::parse(doc.dump()));
  CHECK(SchemaToJson(back) == doc);
  CHECK_THROWS_AS(SchemaFromJson(Json::parse(R"({"version":1,"attributes":[{"id":"x"}]})")),
                  Error);
}

TEST_CASE("property: table csv round trip is exact") {
  DatasetSchema s = MixedSchema();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::uniform_int_distribution<int> cls(1, 3);
  std::bernoulli_distribution miss(0.3);
  for (int trial = 0; trial < 10; ++trial) {
    HeteroTable t;
    t.schema_version = 4;
    for (const auto& a : s.attributes()) t.columns.push_back(a.id);
    t.values.resize(25, 5);
    for (int i = 0; i < 25; ++i) {
      t.values(i, 0) = n(rng) * 1e3;
      t.values(i, 1) = std::exp(n(rng));
      t.values(i, 2) = cls(rng) * 7;
      t.values(i, 3) = cls(rng);
      t.values(i, 4) = cls(rng);
      for (int j = 0; j < 5; ++j) if (miss(rng)) t.values(i, j) = kMissing;
      t.row_tags.push_back(i % 2 ? "block,a" : "b");
    }
    std::stringstream ss;
    WriteTableCsv(t, ss);
    HeteroTable back = ReadTableCsv(ss, 4);
    CHECK(back.columns == t.columns);
    CHECK(back.row_tags == t.row_tags);
    CHECK(ObservedMask(back.values) == ObservedMask(t.values));
    bool exact = true;
    for (int i = 0; i < 25; ++i)
      for (int j = 0; j < 5; ++j)
        if (t.observed(i, j) && back.values(i, j) != t.values(i, j)) exact = false;
    CHECK(exact);
    CHECK(ValidateTable(back, s).valid());
  }
}

TEST_CASE("csv parse errors are structured") {
  std::stringstream ss("a,b\n1,x\n");
  try {
    ReadTableCsv(ss, 1);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParseError);
  }
  std::stringstream ragged("a,b\n1\n");
  CHECK_THROWS_AS(ReadTableCsv(ragged, 1), Error);
}

TEST_CASE("stats and matrix json round trip") {
  TrainStats st;
  st.schema_version = 9;
  AttributeStats a;
  a.kind = VariableKind::kCategorical;
  a.class_probs = Vector::Constant(3, 1.0 / 3);
  a.mode = 2;
  st.attributes = {AttributeStats{VariableKind::kReal, 1.5, 0.25, 0, Vector(), 1.25}, a};
  TrainStats back = StatsFromJson(Json::parse(StatsToJson(st).dump()));
  CHECK(back.schema_version == 9);
  CHECK(back.attributes[0].mean == 1.5);
  CHECK(back.attributes[0].std == 0.25);
  CHECK(back.attributes[0].mode == 1.25);
  CHECK(back.attributes[1].class_probs == a.class_probs);

  Matrix m = Matrix::Random(3, 4);
  CHECK(MatrixFromJson(Json::parse(MatrixToJson(m).dump())) == m);
}

TEST_CASE("checksum is FNV-1a 64") {
  CHECK(Checksum("") == "cbf29ce484222325");
  CHECK(Checksum("a") == "af63dc4c8601ec8c");
}

}  // namespace
}  // namespace vhgm
