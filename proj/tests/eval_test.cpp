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

#include "fixtures.hpp"
#include "vhgm/eval.hpp"

namespace vhgm {
namespace {

using testing::Attr;
using testing::ToySchema;
using testing::ToyTable;

// Returns the held-out truth regardless of its inputs.
class TruthImputer : public Imputer {
 public:
  TruthImputer(DatasetSchema s, Matrix truth) : schema_(std::move(s)), truth_(std::move(truth)) {}
  const DatasetSchema& schema() const override { return schema_; }
  std::string kind() const override { return "truth"; }
  Matrix PredictPoints(const Matrix&) const override { return truth_; }

 private:
  DatasetSchema schema_;
  Matrix truth_;
};

// Records what the evaluator let it see.
class SpyImputer : public Imputer {
 public:
  explicit SpyImputer(DatasetSchema s) : schema_(std::move(s)) {}
  const DatasetSchema& schema() const override { return schema_; }
  std::string kind() const override { return "spy"; }
  Matrix PredictPoints(const Matrix& raw) const override {
    seen = raw;
    return Matrix::Constant(raw.rows(), raw.cols(), 1.0);
  }
  mutable Matrix seen;

 private:
  DatasetSchema schema_;
};

TEST_CASE("categorical error examples") {
  CHECK(CategoricalError({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(CategoricalError({1, 1}, {2, 2}) == 1.0);
  CHECK(CategoricalError({1, 2, 3, 1}, {1, 2, 3, 2}) == 0.25);
  CHECK_THROWS_AS(CategoricalError({}, {}), Error);
}

TEST_CASE("ordinal error examples") {
  CHECK(OrdinalError({1, 2}, {1, 2}, 3) == 0.0);
  CHECK(OrdinalError({1, 1}, {3, 1}, 4) == 0.25);
  CHECK(OrdinalError({1, 1, 1}, {2, 2, 2}, 2) == 0.5);
}

TEST_CASE("continuous error examples") {
  CHECK(ContinuousError({4, 5}, {4, 5}) == 0.0);
  CHECK(ContinuousError({0, 0}, {0, 10}) == doctest::Approx(std::sqrt(50.0) / 10).epsilon(1e-15));
  try {
    ContinuousError({1, 1}, {2, 2});
    FAIL("expected DegenerateRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateRange);
  }
}

TEST_CASE("metric scale properties") {
  ad::Rng rng(5);
  std::uniform_int_distribution<int> cls(1, 6);
  std::normal_distribution<double> n(0, 10);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p, t, pc, tc;
    for (int i = 0; i < 30; ++i) {
      p.push_back(cls(rng));
      t.push_back(cls(rng));
      pc.push_back(n(rng));
      tc.push_back(n(rng));
    }
    const double ce = CategoricalError(p, t);
    CHECK((ce >= 0 && ce <= 1));
    const double oe = OrdinalError(p, t, 6);
    CHECK((oe >= 0 && oe <= 5.0 / 6.0));
    const double shift = n(rng);
    std::vector<double> ps = pc, ts = tc;
    for (auto& x : ps) x += shift;
    for (auto& x : ts) x += shift;
    CHECK(ContinuousError(ps, ts) == doctest::Approx(ContinuousError(pc, tc)).epsilon(1e-9));
  }
}

TEST_CASE("baseline imputers") {
  const DatasetSchema s(1, {Attr("c", VariableKind::kCategorical, 3), Attr("r", VariableKind::kReal),
                            Attr("o", VariableKind::kOrdinal, 4), Attr("p", VariableKind::kPositive),
                            Attr("n", VariableKind::kCount)});
  HeteroTable t;
  t.schema_version = 1;
  t.columns = {"c", "r", "o", "p", "n"};
  t.values.resize(5, 5);
  t.values << 2, 5.0, 3, 1.0, 1,  //
      2, 5.6, 3, 2.0, 2,          //
      1, 5.3, 2, 3.0, 2,          //
      2, 5.3, 3, 4.0, 3,          //
      3, 5.3, 2, 5.0, 4;
  const TrainStats st = ComputeTrainStats(t, s);
  const ConstantImputer mode = ModeImputer(s, st);
  const ConstantImputer mm = ModeMeanImputer(s, st);
  CHECK(mode.values()(0) == 2.0);
  CHECK(mm.values()(0) == 2.0);
  CHECK(mm.values()(1) == doctest::Approx(5.3).epsilon(1e-12));
  CHECK(mm.values()(2) == 3.0);  // mean 2.6
  CHECK(mm.values()(3) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(mm.values()(4) == 2.0);  // mean 2.4
  CHECK(RoundHalfAway(2.5) == 3.0);
  CHECK(RoundHalfAway(-2.5) == -3.0);
  const Matrix pred = mode.PredictPoints(Matrix::Constant(3, 5, kMissing));
  CHECK(pred.rows() == 3);
  CHECK((pred.col(0).array() == 2.0).all());
}

TEST_CASE("evaluate with a truth oracle scores zero") {
  const DatasetSchema s = ToySchema();
  const HeteroTable t = ToyTable(s, 300, 0.2, 4);
  const TruthImputer oracle(s, t.values);
  EvalOptions opt;
  opt.test_missing_rate = 0.5;
  opt.seed = 3;
  const ErrorReport r = Evaluate(oracle, t.values, opt);
  CHECK(r.total == 0.0);
  for (double e : r.attribute_error) CHECK(e == 0.0);
  CHECK(r.type_error.size() == 5);
  const ErrorReport r2 = Evaluate(oracle, t.values, opt);
  CHECK(ReportToJson(r).dump() == ReportToJson(r2).dump());
  CHECK(ReportToCsv(r) == ReportToCsv(r2));
}

TEST_CASE("evaluate never scores a visible cell") {
  const DatasetSchema s = ToySchema();
  const HeteroTable t = ToyTable(s, 400, 0.1, 9);
  const SpyImputer spy(s);
  EvalOptions opt;
  opt.test_missing_rate = 0.3;
  opt.seed = 11;
  opt.columns = {0, 3};
  const ErrorReport r = Evaluate(spy, t.values, opt);
  const MissMask hide = DrawTestMask(t.values, 0.3, 11);
  int hidden = 0, observed = 0;
  for (int i = 0; i < t.rows(); ++i) {
    for (int j = 0; j < 5; ++j) {
      if (!t.observed(i, j)) continue;
      ++observed;
      if (hide(i, j)) {
        ++hidden;
        CHECK(std::isnan(spy.seen(i, j)));
      } else {
        CHECK(spy.seen(i, j) == t.values(i, j));
      }
    }
  }
  CHECK(static_cast<double>(hidden) / observed == doctest::Approx(0.3).epsilon(0.1));
  CHECK(r.scored_cells[1] == 0);
  CHECK(std::isnan(r.attribute_error[1]));
  CHECK(r.scored_cells[0] > 0);
}

TEST_CASE("evaluate skips constant ground truth with a warning") {
  const DatasetSchema s(1, {Attr("a", VariableKind::kReal), Attr("b", VariableKind::kReal)});
  Matrix v(50, 2);
  for (int i = 0; i < 50; ++i) {
    v(i, 0) = 1.0;
    v(i, 1) = i;
  }
  const ConstantImputer c("c", s, RowVector::Zero(2));
  EvalOptions opt;
  opt.test_missing_rate = 1.0;
  const ErrorReport r = Evaluate(c, v, opt);
  CHECK(std::isnan(r.attribute_error[0]));
  CHECK(r.warnings.size() == 1);
  CHECK(r.total == doctest::Approx(ContinuousError(std::vector<double>(50, 0.0), [] {
                                     std::vector<double> t;
                                     for (int i = 0; i < 50; ++i) t.push_back(i);
                                     return t;
                                   }())));
}

TEST_CASE("curve fit") {
  std::vector<ProbePoint> c;
  for (int k = 0; k < 5; ++k) c.push_back({static_cast<double>(k), 3.0 - 2.0 * k, 0.0});
  const CurveFit f = FitCurve(c);
  CHECK(f.slope == doctest::Approx(-2.0));
  CHECK(f.pearson == doctest::Approx(-1.0));
  CHECK(ProbeToCsv(c).rfind("grid,mean,spread\n", 0) == 0);
}

}  // namespace
}  // namespace vhgm
