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
#include <numbers>

#include "vhgm/likelihood.hpp"

namespace vhgm {
namespace {

using ad::Rng;

const double kLn2 = std::log(2.0);

Vector Vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

TEST_CASE("ordinal thresholds") {
  Vector t = OrdinalThresholds(Vec({0, 0}), 0.0);
  CHECK(t(0) == doctest::Approx(kLn2).epsilon(1e-15));
  CHECK(t(1) == doctest::Approx(2 * kLn2).epsilon(1e-15));
  Rng rng(1);
  std::normal_distribution<double> n(0, 3);
  for (int trial = 0; trial < 10000; ++trial) {
    const int c1 = 1 + trial % 6;
    Vector r(c1);
    for (int k = 0; k < c1; ++k) r(k) = n(rng);
    const double h = n(rng);
    Vector a = OrdinalThresholds(r, h), b = OrdinalThresholds(r, h + 1.0);
    for (int k = 0; k + 1 < c1; ++k) {
      CHECK_MESSAGE(a(k + 1) > a(k), "thresholds not increasing");
      if (trial < 100) CHECK(a(k + 1) - a(k) == doctest::Approx(ad::softplus(r(k + 1))));
    }
    if (trial < 100) CHECK((a - b).isApprox(Vector::Ones(c1), 1e-9));
  }
}

TEST_CASE("log_prob examples") {
  CHECK(LogProb(CountParams{1.0}, 0.0) == doctest::Approx(-1.0).epsilon(1e-15));
  OrdinalParams o{Vec({0.0})};
  CHECK(std::exp(LogProb(o, 1)) == doctest::Approx(0.5));
  CHECK(std::exp(LogProb(o, 2)) == doctest::Approx(0.5));
  CHECK(LogProb(CategoricalParams{Vec({0.2, 0.8})}, 2) == doctest::Approx(std::log(0.8)));
  CHECK(LogProb(RealParams{1.0, 4.0}, 3.0) ==
        doctest::Approx(-0.5 * std::log(2 * std::numbers::pi * 4.0) - 0.5));
  // Log-normal density at x includes the 1/x Jacobian.
  CHECK(LogProb(PositiveParams{0.0, 1.0}, std::exp(1.0)) ==
        doctest::Approx(-0.5 * std::log(2 * std::numbers::pi) - 0.5 - 1.0));
  CHECK_THROWS_AS(LogProb(PositiveParams{}, 0.0), Error);
  CHECK_THROWS_AS(LogProb(CountParams{}, 1.5), Error);
  CHECK_THROWS_AS(LogProb(o, 3), Error);
  try {
    LogProb(CategoricalParams{Vec({0.5, 0.5})}, 0);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTypeMismatch);
  }
}

TEST_CASE("mode examples") {
  CHECK(Mode(RealParams{5.0, 2.0}) == 5.0);
  CHECK(Mode(PositiveParams{0.0, 1.0}) == doctest::Approx(std::exp(-1.0)));
  CHECK(Mode(CategoricalParams{Vec({0.1, 0.7, 0.2})}) == 2.0);
  CHECK(Mode(CountParams{3.0}) == 3.0);
  CHECK(Mode(CountParams{2.7}) == 2.0);
  CHECK(Mode(CategoricalParams{Vec({0.4, 0.4, 0.2})}) == 1.0);
}

TEST_CASE("sample examples") {
  Rng rng(77);
  for (int i = 0; i < 1000; ++i) CHECK(Sample(CategoricalParams{Vec({1, 0, 0})}, rng) == 1.0);
  const int n = 100000;
  std::vector<double> xs(n);
  for (auto& x : xs) x = Sample(RealParams{0.0, 1.0}, rng);
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = NormalCdf(xs[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n),
                  std::abs(f - static_cast<double>(i + 1) / n)});
  }
  CHECK(d < 1.628 / std::sqrt(static_cast<double>(n)));
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += Sample(CountParams{4.0}, rng);
  CHECK(std::abs(mean / n - 4.0) < 0.05);
  for (int i = 0; i < 100; ++i) {
    CHECK(Sample(PositiveParams{0.0, 1.0}, rng) > 0.0);
    const double o = Sample(OrdinalParams{Vec({-1, 0, 2})}, rng);
    CHECK((o >= 1 && o <= 4 && o == std::floor(o)));
  }
}

DistributionParams RandomParams(const VariableType& type, Rng& rng) {
  std::normal_distribution<double> n(0, 1.5);
  std::vector<double> raw(NumRawOutputs(type));
  for (auto& r : raw) r = n(rng);
  return ParamsFromRaw(type, raw);
}

const std::vector<VariableType> kTypes = {
    {VariableKind::kReal, 0},        {VariableKind::kPositive, 0},   {VariableKind::kCount, 0},
    {VariableKind::kCategorical, 2}, {VariableKind::kCategorical, 5}, {VariableKind::kOrdinal, 2},
    {VariableKind::kOrdinal, 4},     {VariableKind::kOrdinal, 7}};

TEST_CASE("property: masses normalize and ordinal CDF increases") {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    for (const auto& type : kTypes) {
      DistributionParams p = RandomParams(type, rng);
      if (type.is_discrete_class()) {
        double total = 0.0;
        for (int k = 1; k <= type.num_categories; ++k) total += std::exp(LogProb(p, k));
        CHECK(std::abs(total - 1.0) < 1e-8);
      }
      if (type.kind == VariableKind::kOrdinal) {
        const Vector& t = std::get<OrdinalParams>(p).thresholds;
        for (int k = 0; k + 1 < t.size(); ++k) CHECK(ad::sigmoid(t(k + 1)) > ad::sigmoid(t(k)));
      }
      if (type.kind == VariableKind::kCount && trial < 200) {
        const double lambda = std::get<CountParams>(p).lambda;
        double total = 0.0;
        for (int x = 0; x <= 10 * lambda + 50; ++x) total += std::exp(LogProb(p, x));
        CHECK(total >= 1.0 - 1e-8);
      }
    }
  }
}

TEST_CASE("property: mode maximizes log_prob") {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    for (const auto& type : kTypes) {
      DistributionParams p = RandomParams(type, rng);
      const double m = Mode(p);
      const double best = LogProb(p, m);
      if (type.is_discrete_class()) {
        for (int k = 1; k <= type.num_categories; ++k) CHECK(LogProb(p, k) <= best);
      } else if (type.kind == VariableKind::kCount) {
        const double lambda = std::get<CountParams>(p).lambda;
        for (int x = 0; x <= 10 * lambda + 50; ++x) CHECK(LogProb(p, x) <= best + 1e-12);
      } else if (type.kind == VariableKind::kReal) {
        const auto& g = std::get<RealParams>(p);
        const double s = std::sqrt(g.sigma2);
        for (int k = -600; k <= 600; ++k) CHECK(LogProb(p, g.mu + k * s / 100) <= best);
      } else {
        const auto& g = std::get<PositiveParams>(p);
        const double s = std::sqrt(g.sigma2);
        for (int k = -600; k <= 600; ++k) {
          CHECK(LogProb(p, std::exp(g.mu + k * s / 100)) <= best + 1e-12);
        }
      }
    }
  }
}

AttributeStats RandomStats(const VariableType& type, Rng& rng) {
  std::normal_distribution<double> n;
  AttributeStats s;
  s.kind = type.kind;
  s.mean = n(rng);
  s.std = std::exp(0.5 * n(rng));
  if (type.is_discrete_class()) s.class_probs = Vector::Constant(type.num_categories, 1.0 / type.num_categories);
  return s;
}

double RandomTarget(const VariableType& type, Rng& rng) {
  std::normal_distribution<double> n;
  std::uniform_int_distribution<int> cls(1, std::max(type.num_categories, 1));
  std::poisson_distribution<int> pois(3.0);
  switch (type.kind) {
    case VariableKind::kReal: return n(rng) * 2;
    case VariableKind::kPositive: return std::exp(n(rng));
    case VariableKind::kCount: return pois(rng);
    default: return cls(rng);
  }
}

TEST_CASE("property: raw-output NLL matches log_prob oracle and finite differences") {
  Rng rng(12);
  std::normal_distribution<double> n(0, 1.2);
  for (const auto& type : kTypes) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const AttributeStats st = RandomStats(type, rng);
      const double x = RandomTarget(type, rng);
      const int w = NumRawOutputs(type);
      std::vector<double> raw(w), grad(w), scratch(w);
      for (auto& r : raw) r = n(rng);
      const double nll = RawOutputNll(type, st, raw, x, grad);
      const double oracle = -LogProb(Denormalize(ParamsFromRaw(type, raw), st), x);
      CHECK(nll == doctest::Approx(oracle).epsilon(1e-10));
      for (int k = 0; k < w; ++k) {
        const double h = 1e-5;
        std::vector<double> up = raw, dn = raw;
        up[k] += h;
        dn[k] -= h;
        const double num = (RawOutputNll(type, st, up, x, scratch) -
                            RawOutputNll(type, st, dn, x, scratch)) / (2 * h);
        const double rel = std::abs(num - grad[k]) / std::max({std::abs(num), std::abs(grad[k]), 1e-6});
        worst = std::max(worst, rel);
      }
    }
    INFO(KindName(type.kind), " c=", type.num_categories);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("hetero NLL op: value and gradient") {
  DatasetSchema schema(1, {{"r", "r", {VariableKind::kReal, 0}, {}},
                           {"o", "o", {VariableKind::kOrdinal, 3}, {"a", "b", "c"}},
                           {"n", "n", {VariableKind::kCount, 0}, {}}});
  Rng rng(6);
  TrainStats stats{1, {}};
  for (const auto& a : schema.attributes()) stats.attributes.push_back(RandomStats(a.var_type, rng));
  const OutputLayout layout = MakeOutputLayout(schema);
  CHECK(layout.total == 6);
  std::vector<NllTerm> terms = {{0, 0, 0, 1.3}, {1, 2, 1, 2}, {0, 5, 2, 4}, {1, 5, 2, 0}};
  const Matrix point = ad::standard_normal(2, 6, rng);
  ad::Tape t;
  const double v = HeteroNll(t.constant(point), terms, schema, stats).scalar();
  double oracle = 0.0;
  std::vector<double> g(3);
  for (const auto& term : terms) {
    const auto& type = schema.attribute(term.attribute).var_type;
    std::vector<double> raw(NumRawOutputs(type));
    for (size_t k = 0; k < raw.size(); ++k) raw[k] = point(term.row, term.offset + k);
    oracle -= LogProb(Denormalize(ParamsFromRaw(type, raw), stats.attributes[term.attribute]),
                      term.target);
  }
  CHECK(v == doctest::Approx(oracle).epsilon(1e-12));
  auto r = ad::grad_check(
      [&](ad::Tape& tp, const ad::Var& x) { return HeteroNll(x, terms, schema, stats); }, point);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("preprocess examples") {
  DatasetSchema schema(1, {{"r", "r", {VariableKind::kReal, 0}, {}},
                           {"p", "p", {VariableKind::kPositive, 0}, {}},
                           {"n", "n", {VariableKind::kCount, 0}, {}},
                           {"c", "c", {VariableKind::kCategorical, 3}, {"a", "b", "c"}},
                           {"o", "o", {VariableKind::kOrdinal, 3}, {"a", "b", "c"}}});
  TrainStats st{1, {}};
  st.attributes = {{VariableKind::kReal, 10, 2, 0, {}, 0},
                   {VariableKind::kPositive, 1, 0.5, 0, {}, 0},
                   {VariableKind::kCount, std::log(3.0), 0.25, 2, {}, 0},
                   {VariableKind::kCategorical, 0, 1, 0, Vec({2.0 / 3, 1.0 / 3, 0}), 1},
                   {VariableKind::kOrdinal, 0, 1, 0, Vec({0.2, 0.5, 0.3}), 2}};
  Matrix raw(2, 5);
  raw << 12, std::exp(2.0), 2, 2, 2,  //
      kMissing, kMissing, kMissing, kMissing, kMissing;
  PreprocessedBatch b = PreprocessRows(raw, st, schema);
  REQUIRE(b.values.cols() == 1 + 1 + 1 + 3 + 2);
  CHECK(b.flags.row(0) == RowVector::Ones(5));
  CHECK(b.flags.row(1) == RowVector::Zero(5));
  RowVector expect0(8), expect1(8);
  expect0 << 1.0, 2.0, 0.0, 0, 1, 0, 1, 0;
  expect1 << 0, 0, 0, 2.0 / 3, 1.0 / 3, 0, 0.8, 0.3;
  CHECK(b.values.row(0).isApprox(expect0));
  CHECK((b.values.row(1) - expect1).cwiseAbs().maxCoeff() < 1e-12);

  TrainStats wrong = st;
  wrong.attributes.pop_back();
  CHECK_THROWS_AS(PreprocessRows(raw, wrong, schema), Error);
}

TEST_CASE("denormalize examples and round trip") {
  AttributeStats neutral{VariableKind::kReal, 0, 1, 0, {}, 0};
  auto p = std::get<RealParams>(Denormalize(RealParams{0.3, 2.0}, neutral));
  CHECK(p.mu == 0.3);
  CHECK(p.sigma2 == 2.0);
  AttributeStats s{VariableKind::kReal, 10, 2, 0, {}, 0};
  p = std::get<RealParams>(Denormalize(RealParams{0, 1}, s));
  CHECK(p.mu == 10);
  CHECK(p.sigma2 == 4);
  Rng rng(19);
  std::normal_distribution<double> n;
  double drift = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    AttributeStats st{VariableKind::kReal, 3 * n(rng), std::exp(n(rng)), 0, {}, 0};
    const double mu = n(rng), s2 = std::exp(n(rng)), lam = std::exp(n(rng));
    auto r = std::get<RealParams>(Normalize(Denormalize(RealParams{mu, s2}, st), st));
    auto q = std::get<PositiveParams>(Normalize(Denormalize(PositiveParams{mu, s2}, st), st));
    auto c = std::get<CountParams>(Normalize(Denormalize(CountParams{lam}, st), st));
    drift = std::max({drift, std::abs(r.mu - mu), std::abs(r.sigma2 - s2), std::abs(q.mu - mu),
                      std::abs(q.sigma2 - s2), std::abs(c.lambda - lam)});
  }
  CHECK(drift < 1e-9);
}

TEST_CASE("params json round trip") {
  Rng rng(3);
  for (const auto& type : kTypes) {
    DistributionParams p = RandomParams(type, rng);
    DistributionParams back = ParamsFromJson(Json::parse(ParamsToJson(p).dump()));
    CHECK(KindOf(back) == type.kind);
    CHECK(ParamsToJson(back) == ParamsToJson(p));
  }
  CHECK_THROWS_AS(ParamsFromJson(Json::parse(R"({"kind":"beta"})")), Error);
}

TEST_CASE("distribution mean matches sampling") {
  Rng rng(31);
  const std::vector<DistributionParams> cases = {
      RealParams{1.5, 4.0}, PositiveParams{0.2, 0.3}, CountParams{3.5},
      CategoricalParams{Vec({0.2, 0.5, 0.3})}, OrdinalParams{Vec({-0.5, 0.4, 1.2})}};
  for (const auto& p : cases) {
    double acc = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) acc += Sample(p, rng);
    CHECK(acc / n == doctest::Approx(Mean(p)).epsilon(0.01));
  }
  CHECK(Mean(CategoricalParams{Vec({0.2, 0.5, 0.3})}) == doctest::Approx(2.1));
}

}  // namespace
}  // namespace vhgm
