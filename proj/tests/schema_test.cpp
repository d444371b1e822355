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

#include <cmath>

#include "vhgm/schema.hpp"

namespace vhgm {
namespace {

AttributeSpec Attr(const std::string& id, VariableKind kind, int c = 0) {
  AttributeSpec a{id, id, {kind, c}, {}};
  for (int k = 1; k <= c; ++k) a.category_labels.push_back("c" + std::to_string(k));
  return a;
}

HeteroTable Table(int64_t version, std::vector<std::string> cols, Matrix values,
                  const std::string& tag) {
  HeteroTable t;
  t.schema_version = version;
  t.columns = std::move(cols);
  t.values = std::move(values);
  t.row_tags.assign(t.values.rows(), tag);
  return t;
}

TEST_CASE("validate: all-missing table is valid") {
  DatasetSchema s(1, {Attr("a", VariableKind::kReal), Attr("b", VariableKind::kOrdinal, 3)});
  Matrix v = Matrix::Constant(4, 2, kMissing);
  CHECK(ValidateTable(Table(1, {"a", "b"}, v, "t"), s).valid());
}

TEST_CASE("validate: type violations are reported per cell") {
  DatasetSchema s(1, {Attr("pos", VariableKind::kPositive), Attr("ord", VariableKind::kOrdinal, 3),
                      Attr("cnt", VariableKind::kCount)});
  Matrix v(2, 3);
  v << 0.0, 2, 1,  //
      1.5, 4, 2.5;
  auto report = ValidateTable(Table(1, {"pos", "ord", "cnt"}, v, "t"), s);
  REQUIRE(report.violations.size() == 3);
  CHECK(report.violations[0].row == 0);
  CHECK(report.violations[0].attribute_id == "pos");
  CHECK(report.violations[1].attribute_id == "ord");
  CHECK(report.violations[1].value == 4);
  CHECK(report.violations[2].attribute_id == "cnt");
}

TEST_CASE("validate: version and column errors") {
  SchemaStore store;
  store.put(DatasetSchema(3, {Attr("a", VariableKind::kReal)}));
  Matrix v = Matrix::Zero(1, 1);
  try {
    ValidateTable(Table(2, {"a"}, v, "t"), store);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownSchemaVersion);
  }
  Matrix v2 = Matrix::Zero(1, 2);
  try {
    ValidateTable(Table(3, {"a"}, v2, "t"), store);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kColumnCountMismatch);
  }
}

TEST_CASE("schema edits bump the version and reject duplicates") {
  DatasetSchema s(1, {Attr("a", VariableKind::kReal)});
  s.add_attribute(Attr("b", VariableKind::kCount));
  CHECK(s.version() == 2);
  CHECK(s.require_index("b") == 1);
  s.replace_attribute(Attr("b", VariableKind::kCategorical, 2));
  CHECK(s.version() == 3);
  s.remove_attribute("a");
  CHECK(s.version() == 4);
  CHECK(s.require_index("b") == 0);
  CHECK_THROWS_AS(s.add_attribute(Attr("b", VariableKind::kReal)), Error);
  CHECK_THROWS_AS(DatasetSchema(1, {Attr("x", VariableKind::kOrdinal, 1)}), Error);
}

TEST_CASE("train stats: real, categorical, positive examples") {
  DatasetSchema s(1, {Attr("r", VariableKind::kReal), Attr("c", VariableKind::kCategorical, 3),
                      Attr("p", VariableKind::kPositive)});
  Matrix v(4, 3);
  v << 1, 1, 1,  //
      2, 1, std::exp(2.0),  //
      3, 2, kMissing,  //
      kMissing, kMissing, kMissing;
  TrainStats st = ComputeTrainStats(Table(1, {"r", "c", "p"}, v, "t"), s);
  CHECK(st.attributes[0].mean == doctest::Approx(2.0));
  CHECK(st.attributes[0].std == doctest::Approx(1.0));
  CHECK(st.attributes[1].class_probs(0) == doctest::Approx(2.0 / 3));
  CHECK(st.attributes[1].class_probs(1) == doctest::Approx(1.0 / 3));
  CHECK(st.attributes[1].class_probs(2) == 0.0);
  CHECK(st.attributes[1].mode == 1.0);
  // log values {0, 2}: mean 1, sample std sqrt(2)
  CHECK(st.attributes[2].mean == doctest::Approx(1.0));
  CHECK(st.attributes[2].std == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("train stats: constant column std floored, all-missing column errors") {
  DatasetSchema s(1, {Attr("r", VariableKind::kReal), Attr("n", VariableKind::kCount)});
  Matrix v(3, 2);
  v << 5, 0,  //
      5, 3,  //
      5, kMissing;
  TrainStats st = ComputeTrainStats(Table(1, {"r", "n"}, v, "t"), s);
  CHECK(st.attributes[0].std == kStdFloor);
  CHECK(st.attributes[0].mode == doctest::Approx(5.0));
  CHECK(st.attributes[1].raw_mean == doctest::Approx(1.5));
  CHECK(st.attributes[1].mean == doctest::Approx(std::log(4.0) / 2));
  v.col(1).setConstant(kMissing);
  try {
    ComputeTrainStats(Table(1, {"r", "n"}, v, "t"), s);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAllMissingColumn);
    CHECK(e.attribute_id() == "n");
  }
}

TEST_CASE("merge: union semantics and block missingness") {
  DatasetSchema s(1, {Attr("A", VariableKind::kReal), Attr("B", VariableKind::kReal),
                      Attr("C", VariableKind::kReal)});
  Matrix v1(2, 2), v2(1, 2);
  v1 << 1, 2, 3, 4;
  v2 << 5, 6;
  HeteroTable m = MergeTables({Table(1, {"A", "B"}, v1, "t1"), Table(1, {"B", "C"}, v2, "t2")}, s);
  REQUIRE(m.rows() == 3);
  REQUIRE(m.cols() == 3);
  CHECK(m.columns == std::vector<std::string>{"A", "B", "C"});
  CHECK(!m.observed(0, 2));
  CHECK(!m.observed(1, 2));
  CHECK(!m.observed(2, 0));
  CHECK(m.values(2, 1) == 5);
  CHECK(m.values(2, 2) == 6);
  CHECK(m.row_tags == std::vector<std::string>{"t1", "t1", "t2"});
  CHECK_THROWS_AS(MergeTables({Table(1, {"Z"}, v2.col(0), "t")}, s), Error);
}

TEST_CASE("merge: self-merge and row counts") {
  DatasetSchema s(1, {Attr("A", VariableKind::kReal), Attr("B", VariableKind::kReal)});
  Matrix v = Matrix::Random(100, 2);
  v(3, 1) = kMissing;
  HeteroTable t = Table(1, {"A", "B"}, v, "x");
  HeteroTable m = MergeTables({t, t}, s);
  CHECK(m.rows() == 200);
  CHECK(ObservedMask(m.values.topRows(100)) == ObservedMask(m.values.bottomRows(100)));
  HeteroTable m2 = MergeTables({t, SelectRows(t, std::vector<int>(50, 0))}, s);
  CHECK(m2.rows() == 150);
}

TEST_CASE("property: merge preserves observed cells bit-exactly") {
  DatasetSchema s(1, {Attr("A", VariableKind::kReal), Attr("B", VariableKind::kReal),
                      Attr("C", VariableKind::kReal), Attr("D", VariableKind::kReal)});
  std::srand(11);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix v1 = Matrix::Random(7, 2), v2 = Matrix::Random(5, 3);
    for (int i = 0; i < 7; ++i) if (std::rand() % 3 == 0) v1(i, std::rand() % 2) = kMissing;
    HeteroTable a = Table(1, {"C", "A"}, v1, "a"), b = Table(1, {"B", "D", "A"}, v2, "b");
    HeteroTable m = MergeTables({a, b}, s);
    for (int i = 0; i < 7; ++i) {
      for (int j = 0; j < 2; ++j) {
        const int mj = s.require_index(a.columns[j]);
        if (a.observed(i, j)) {
          CHECK(m.values(i, mj) == v1(i, j));
        } else {
          CHECK(!m.observed(i, mj));
        }
      }
      CHECK(!m.observed(i, 1));
      CHECK(!m.observed(i, 3));
    }
    for (int i = 0; i < 5; ++i) {
      CHECK(m.values(7 + i, 1) == v2(i, 0));
      CHECK(!m.observed(7 + i, 2));
    }
  }
}

}  // namespace
}  // namespace vhgm
