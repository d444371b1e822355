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
#include "vhgm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <numbers>
#include <random>
#include <sstream>

#include "vhgm/autodiff.hpp"
#include "vhgm/random.hpp"

namespace vhgm {

namespace {

constexpr int kTotalAttributes = 48;
constexpr int kFactors = 6;

std::string AttrId(int j) {
  std::ostringstream s;
  s << 'a' << (j < 10 ? "0" : "") << j;
  return s.str();
}

Matrix Cholesky(const Matrix& sigma) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success || !sigma.isApprox(sigma.transpose(), 1e-12)) {
    throw Error(ErrorCode::kNotPositiveDefinite, "latent correlation is not positive definite");
  }
  return llt.matrixL();
}

double PoissonCdf(double rate, int k) {
  double term = std::exp(-rate), acc = term;
  for (int i = 1; i <= k; ++i) {
    term *= rate / i;
    acc += term;
  }
  return acc;
}

// Latent interval [lo, hi] that maps to the observed value `x`.
std::pair<double, double> LatentInterval(const MarginalSpec& m, double x) {
  const double inf = std::numeric_limits<double>::infinity();
  auto q = [&](double p) { return p <= 0 ? -inf : (p >= 1 ? inf : NormalQuantile(p)); };
  switch (m.kind) {
    case VariableKind::kReal: {
      const double u = (x - m.loc) / m.scale;
      return {u, u};
    }
    case VariableKind::kPositive: {
      const double u = (std::log(x) - m.loc) / m.scale;
      return {u, u};
    }
    case VariableKind::kCount: {
      const int k = static_cast<int>(x);
      return {q(k == 0 ? 0.0 : PoissonCdf(m.rate, k - 1)), q(PoissonCdf(m.rate, k))};
    }
    default: {
      const int k = static_cast<int>(x);
      double lo = 0.0;
      for (int i = 0; i < k - 1; ++i) lo += m.probs(i);
      return {q(lo), q(lo + m.probs(k - 1))};
    }
  }
}

Vector RandomProbs(int c, ad::Rng& rng) {
  std::gamma_distribution<double> g(2.0, 1.0);
  Vector p(c);
  for (int k = 0; k < c; ++k) p(k) = g(rng) + 0.2;
  return p / p.sum();
}

Json VectorToJson(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector VectorFromJson(const Json& doc) {
  const std::vector<double> xs = doc.get<std::vector<double>>();
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

}  // namespace

double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Acklam's rational approximation followed by one Halley refinement step.
double NormalQuantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw Error(ErrorCode::kInvalidArgument, "normal quantile needs p in [0, 1]");
  }
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double lo = 0.02425;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - lo) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = NormalCdf(x) - p;
  const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

double MarginalValue(const MarginalSpec& m, double u) {
  switch (m.kind) {
    case VariableKind::kReal:
      return m.loc + m.scale * u;
    case VariableKind::kPositive:
      return std::exp(m.loc + m.scale * u);
    case VariableKind::kCount: {
      const double target = NormalCdf(u);
      double term = std::exp(-m.rate), acc = term;
      int k = 0;
      while (acc < target && k < 10000) {
        ++k;
        term *= m.rate / k;
        acc += term;
      }
      return k;
    }
    default: {
      const double target = NormalCdf(u);
      double acc = 0.0;
      for (Eigen::Index k = 0; k < m.probs.size(); ++k) {
        acc += m.probs(k);
        if (target < acc) return static_cast<double>(k + 1);
      }
      return static_cast<double>(m.probs.size());
    }
  }
}

HeteroTable SamplePopulation(const CopulaSpec& spec, int n, uint64_t seed) {
  const int p = spec.schema.size();
  if (spec.sigma.rows() != p || spec.sigma.cols() != p ||
      static_cast<int>(spec.marginals.size()) != p) {
    throw Error(ErrorCode::kShapeMismatch, "copula spec does not match its schema");
  }
  const Matrix L = Cholesky(spec.sigma);
  ad::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  HeteroTable t;
  t.schema_version = spec.schema.version();
  for (const auto& a : spec.schema.attributes()) t.columns.push_back(a.id);
  t.values.resize(n, p);
  t.row_tags.assign(n, "population");
  Vector eps(p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) eps(j) = normal(rng);
    const Vector u = L * eps;
    for (int j = 0; j < p; ++j) t.values(i, j) = MarginalValue(spec.marginals[j], u(j));
  }
  return t;
}

std::vector<HeteroTable> CarveBlocks(const HeteroTable& population, const BlockDesign& design) {
  int need = 0;
  for (const auto& b : design.blocks) need += b.rows;
  if (need > population.rows()) {
    throw Error(ErrorCode::kRowBudgetExceeded, "blocks need " + std::to_string(need) +
                                                   " rows, population has " +
                                                   std::to_string(population.rows()));
  }
  std::vector<HeteroTable> out;
  int at = 0;
  for (const auto& b : design.blocks) {
    HeteroTable t;
    t.schema_version = population.schema_version;
    t.values.resize(b.rows, static_cast<Eigen::Index>(b.columns.size()));
    for (size_t c = 0; c < b.columns.size(); ++c) {
      const int j = b.columns[c];
      if (j < 0 || j >= population.cols()) {
        throw Error(ErrorCode::kAttributeNotInSchema, "block column outside the population");
      }
      t.columns.push_back(population.columns[j]);
      t.values.col(static_cast<Eigen::Index>(c)) = population.values.col(j).segment(at, b.rows);
    }
    t.row_tags.assign(b.rows, b.name);
    at += b.rows;
    out.push_back(std::move(t));
  }
  return out;
}

Matrix ConditionalSamples(const CopulaSpec& spec, const std::map<int, double>& observed, int n,
                          uint64_t seed) {
  const int p = spec.schema.size();
  std::vector<int> cont, rest;
  std::vector<double> cont_u;
  std::vector<std::pair<double, double>> iv(p, {-INFINITY, INFINITY});
  for (int j = 0; j < p; ++j) {
    const auto it = observed.find(j);
    const MarginalSpec& m = spec.marginals[j];
    if (it != observed.end() &&
        (m.kind == VariableKind::kReal || m.kind == VariableKind::kPositive)) {
      cont.push_back(j);
      cont_u.push_back(LatentInterval(m, it->second).first);
    } else {
      if (it != observed.end()) iv[j] = LatentInterval(m, it->second);
      rest.push_back(j);
    }
  }
  const int nc = static_cast<int>(cont.size()), nr = static_cast<int>(rest.size());
  Matrix soo(nc, nc), sro(nr, nc), srr(nr, nr);
  for (int a = 0; a < nc; ++a) {
    for (int b = 0; b < nc; ++b) soo(a, b) = spec.sigma(cont[a], cont[b]);
  }
  for (int a = 0; a < nr; ++a) {
    for (int b = 0; b < nc; ++b) sro(a, b) = spec.sigma(rest[a], cont[b]);
    for (int b = 0; b < nr; ++b) srr(a, b) = spec.sigma(rest[a], rest[b]);
  }
  Vector mean = Vector::Zero(nr);
  Matrix cov = srr;
  if (nc > 0) {
    const Eigen::LDLT<Matrix> solver(soo);
    mean = sro * solver.solve(Eigen::Map<const Vector>(cont_u.data(), nc));
    cov = srr - sro * solver.solve(sro.transpose());
  }
  cov = 0.5 * (cov + cov.transpose());
  cov.diagonal().array() += 1e-12;
  const Matrix L = nr > 0 ? Cholesky(cov) : Matrix();

  ad::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(n, p);
  Vector eps(nr);
  int got = 0;
  for (int64_t draw = 0; got < n; ++draw) {
    if (draw > 1000000LL * std::max(1, n)) {
      throw Error(ErrorCode::kInvalidArgument, "conditioning event has negligible probability");
    }
    for (int a = 0; a < nr; ++a) eps(a) = normal(rng);
    const Vector u = mean + L * eps;
    bool ok = true;
    for (int a = 0; ok && a < nr; ++a) ok = u(a) >= iv[rest[a]].first && u(a) < iv[rest[a]].second;
    if (!ok) continue;
    for (int a = 0; a < nc; ++a) out(got, cont[a]) = observed.at(cont[a]);
    for (int a = 0; a < nr; ++a) {
      const auto it = observed.find(rest[a]);
      out(got, rest[a]) =
          it != observed.end() ? it->second : MarginalValue(spec.marginals[rest[a]], u(a));
    }
    ++got;
  }
  return out;
}

CopulaOracle::CopulaOracle(CopulaSpec spec, int samples, uint64_t seed)
    : spec_(std::move(spec)), samples_(samples), seed_(seed) {
  marginal_ = Optimal(SamplePopulation(spec_, 200000, DeriveSeed(seed_, 0)).values);
}

RowVector CopulaOracle::Optimal(const Matrix& draws) const {
  const int p = spec_.schema.size();
  RowVector best(p);
  for (int j = 0; j < p; ++j) {
    const MarginalSpec& m = spec_.marginals[j];
    if (m.kind == VariableKind::kReal || m.kind == VariableKind::kPositive ||
        m.kind == VariableKind::kCount) {
      best(j) = draws.col(j).mean();
      continue;
    }
    std::vector<double> counts(m.probs.size() + 1, 0.0);
    for (Eigen::Index i = 0; i < draws.rows(); ++i) counts[static_cast<int>(draws(i, j))] += 1;
    if (m.kind == VariableKind::kCategorical) {
      best(j) = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    } else {
      double acc = 0.0;
      for (size_t k = 1; k < counts.size(); ++k) {
        acc += counts[k];
        if (acc >= 0.5 * static_cast<double>(draws.rows())) {
          best(j) = static_cast<double>(k);
          break;
        }
      }
    }
  }
  return best;
}

Matrix CopulaOracle::PredictPoints(const Matrix& raw) const {
  const int p = spec_.schema.size();
  if (raw.cols() != p) throw Error(ErrorCode::kDimensionMismatch, "oracle input width");
  Matrix out(raw.rows(), p);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    std::map<int, double> obs;
    for (int j = 0; j < p; ++j) {
      if (!std::isnan(raw(i, j))) obs[j] = raw(i, j);
    }
    out.row(i) = obs.empty() ? marginal_
                             : Optimal(ConditionalSamples(spec_, obs, samples_,
                                                          DeriveSeed(seed_, 1 + i)));
  }
  return out;
}

ConditionalSummary TrueConditional(const CopulaSpec& spec, const std::map<int, double>& observed,
                                   int target, uint64_t seed, int samples,
                                   bool force_monte_carlo) {
  const int p = spec.schema.size();
  if (target < 0 || target >= p || observed.count(target)) {
    throw Error(ErrorCode::kInvalidArgument, "target must be an unobserved schema column");
  }
  std::vector<int> cont, disc;
  std::vector<double> cont_u;
  std::vector<std::pair<double, double>> disc_iv;
  for (const auto& [j, x] : observed) {
    const MarginalSpec& m = spec.marginals.at(j);
    const auto iv = LatentInterval(m, x);
    if (m.kind == VariableKind::kReal || m.kind == VariableKind::kPositive) {
      cont.push_back(j);
      cont_u.push_back(iv.first);
    } else {
      disc.push_back(j);
      disc_iv.push_back(iv);
    }
  }
  ad::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ConditionalSummary out;
  std::vector<double> latent_draws;

  if (force_monte_carlo) {
    // Rejection from the joint latent law with a band around continuous values.
    const double band = 0.02;
    std::vector<int> idx = cont;
    idx.insert(idx.end(), disc.begin(), disc.end());
    idx.push_back(target);
    const int k = static_cast<int>(idx.size());
    Matrix sub(k, k);
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) sub(a, b) = spec.sigma(idx[a], idx[b]);
    }
    const Matrix L = Cholesky(sub);
    Vector eps(k);
    for (int64_t draw = 0; static_cast<int>(latent_draws.size()) < samples && draw < 2000000000LL;
         ++draw) {
      for (int a = 0; a < k; ++a) eps(a) = normal(rng);
      const Vector u = L * eps;
      bool ok = true;
      for (size_t c = 0; ok && c < cont.size(); ++c) ok = std::abs(u(c) - cont_u[c]) < band;
      for (size_t d = 0; ok && d < disc.size(); ++d) {
        const double v = u(static_cast<Eigen::Index>(cont.size() + d));
        ok = v >= disc_iv[d].first && v < disc_iv[d].second;
      }
      if (ok) latent_draws.push_back(u(k - 1));
    }
  } else {
    // Condition the (discrete, target) block on the continuous observations.
    std::vector<int> rest = disc;
    rest.push_back(target);
    const int nc = static_cast<int>(cont.size()), nr = static_cast<int>(rest.size());
    Matrix soo(nc, nc), sro(nr, nc), srr(nr, nr);
    for (int a = 0; a < nc; ++a) {
      for (int b = 0; b < nc; ++b) soo(a, b) = spec.sigma(cont[a], cont[b]);
    }
    for (int a = 0; a < nr; ++a) {
      for (int b = 0; b < nc; ++b) sro(a, b) = spec.sigma(rest[a], cont[b]);
      for (int b = 0; b < nr; ++b) srr(a, b) = spec.sigma(rest[a], rest[b]);
    }
    Vector mean = Vector::Zero(nr);
    Matrix cov = srr;
    if (nc > 0) {
      const Eigen::LDLT<Matrix> solver(soo);
      const Vector xo = Eigen::Map<const Vector>(cont_u.data(), nc);
      mean = sro * solver.solve(xo);
      cov = srr - sro * solver.solve(sro.transpose());
    }
    out.latent_mean = mean(nr - 1);
    out.latent_var = cov(nr - 1, nr - 1);
    const bool closed = disc.empty() && spec.marginals[target].kind == VariableKind::kReal;
    if (closed) {
      const MarginalSpec& m = spec.marginals[target];
      out.mean = m.loc + m.scale * out.latent_mean;
      out.std = m.scale * std::sqrt(std::max(0.0, out.latent_var));
      return out;
    }
    cov = 0.5 * (cov + cov.transpose());
    cov.diagonal().array() += 1e-12;
    const Matrix L = Cholesky(cov);
    Vector eps(nr);
    for (int64_t draw = 0; static_cast<int>(latent_draws.size()) < samples && draw < 2000000000LL;
         ++draw) {
      for (int a = 0; a < nr; ++a) eps(a) = normal(rng);
      const Vector u = mean + L * eps;
      bool ok = true;
      for (int d = 0; ok && d < nr - 1; ++d) {
        ok = u(d) >= disc_iv[d].first && u(d) < disc_iv[d].second;
      }
      if (ok) latent_draws.push_back(u(nr - 1));
    }
  }
  out.samples = static_cast<int>(latent_draws.size());
  if (latent_draws.empty()) return out;
  double s = 0, s2 = 0, r = 0, r2 = 0;
  for (double u : latent_draws) {
    s += u;
    s2 += u * u;
    const double v = MarginalValue(spec.marginals[target], u);
    r += v;
    r2 += v * v;
  }
  const double n = static_cast<double>(latent_draws.size());
  if (force_monte_carlo || !disc.empty()) {
    out.latent_mean = s / n;
    out.latent_var = std::max(0.0, s2 / n - out.latent_mean * out.latent_mean);
  }
  out.mean = r / n;
  out.std = std::sqrt(std::max(0.0, r2 / n - out.mean * out.mean));
  return out;
}

CopulaSpec DefaultCopula(uint64_t seed) {
  ad::Rng rng(DeriveSeed(seed, 101));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Core: 3 real, positive, ordinal, categorical. The rest cycles through a
  // real-heavy mix (21 real, 7 categorical, 6 ordinal, 5 count, 3 positive).
  std::vector<VariableKind> kinds = {VariableKind::kReal,     VariableKind::kReal,
                                     VariableKind::kReal,     VariableKind::kPositive,
                                     VariableKind::kOrdinal,  VariableKind::kCategorical};
  const std::vector<VariableKind> cycle = {
      VariableKind::kReal, VariableKind::kCategorical, VariableKind::kReal,
      VariableKind::kOrdinal, VariableKind::kReal, VariableKind::kCount,
      VariableKind::kReal, VariableKind::kCategorical, VariableKind::kReal,
      VariableKind::kOrdinal, VariableKind::kReal, VariableKind::kPositive,
      VariableKind::kReal, VariableKind::kCount};
  int counts[5] = {0, 0, 0, 0, 0};
  const int limit[5] = {21, 3, 5, 7, 6};  // real, positive, count, categorical, ordinal
  for (size_t k = 0; kinds.size() < kTotalAttributes; ++k) {
    const VariableKind v = cycle[k % cycle.size()];
    const int slot = static_cast<int>(v);
    if (counts[slot] >= limit[slot]) continue;
    ++counts[slot];
    kinds.push_back(v);
  }

  CopulaSpec spec;
  std::vector<AttributeSpec> attrs;
  for (int j = 0; j < kTotalAttributes; ++j) {
    MarginalSpec m;
    m.kind = kinds[j];
    AttributeSpec a{AttrId(j), std::string(KindName(m.kind)) + "_" + AttrId(j), {m.kind, 0}, {}};
    switch (m.kind) {
      case VariableKind::kReal:
        m.loc = std::round(100.0 * unif(rng)) / 2.0;
        m.scale = 1.0 + std::round(190.0 * unif(rng)) / 10.0;
        break;
      case VariableKind::kPositive:
        m.loc = 3.0 * unif(rng);
        m.scale = 0.2 + 0.4 * unif(rng);
        break;
      case VariableKind::kCount:
        m.rate = 0.5 + 7.5 * unif(rng);
        break;
      case VariableKind::kCategorical:
        a.var_type.num_categories = 2 + static_cast<int>(4 * unif(rng));
        m.probs = RandomProbs(a.var_type.num_categories, rng);
        break;
      case VariableKind::kOrdinal:
        a.var_type.num_categories = 3 + static_cast<int>(5 * unif(rng));
        m.probs = RandomProbs(a.var_type.num_categories, rng);
        break;
    }
    spec.marginals.push_back(std::move(m));
    attrs.push_back(std::move(a));
  }
  spec.schema = DatasetSchema(1, std::move(attrs));

  // Each attribute loads mainly on one factor; a few load on none.
  Matrix load = Matrix::Zero(kTotalAttributes, kFactors);
  Vector noise(kTotalAttributes);
  for (int j = 0; j < kTotalAttributes; ++j) {
    const bool isolated = j % 11 == 10;
    if (!isolated) {
      const double sign = unif(rng) < 0.3 ? -1.0 : 1.0;
      load(j, (j * 5 + j / kFactors) % kFactors) = sign * (0.6 + 0.9 * unif(rng));
      if (unif(rng) < 0.3) load(j, static_cast<int>(unif(rng) * kFactors)) += 0.3 * normal(rng);
    }
    noise(j) = 0.15 + 0.5 * unif(rng);
  }
  Matrix cov = load * load.transpose();
  cov.diagonal() += noise;
  const Vector inv = cov.diagonal().cwiseSqrt().cwiseInverse();
  spec.sigma = inv.asDiagonal() * cov * inv.asDiagonal();
  spec.sigma.diagonal().setOnes();
  return spec;
}

BlockDesign DefaultDesign() {
  BlockDesign d;
  d.core = {0, 1, 2, 3, 4, 5};
  auto block = [&](const std::string& name, int rows, int first, int last) {
    BlockSpec b{name, rows, d.core};
    for (int j = first; j <= last; ++j) b.columns.push_back(j);
    return b;
  };
  d.blocks = {block("A", 4000, 6, 19), block("B", 600, 12, 45), block("C", 1500, 42, 47)};
  return d;
}

Benchmark MakeBenchmark(uint64_t seed) {
  return MakeBenchmark(DefaultCopula(seed), DefaultDesign(), seed);
}

Benchmark MakeBenchmark(const CopulaSpec& spec, const BlockDesign& design, uint64_t seed) {
  int need = 0;
  for (const auto& b : design.blocks) need += b.rows;
  Benchmark bench{spec, design, {}};
  const HeteroTable pop = SamplePopulation(spec, need, DeriveSeed(seed, 102));
  const std::vector<HeteroTable> carved = CarveBlocks(pop, design);
  for (size_t k = 0; k < carved.size(); ++k) {
    const HeteroTable& t = carved[k];
    const int n = t.rows();
    const int n_train = static_cast<int>(std::round(0.7 * n));
    const int n_val = static_cast<int>(std::round(0.15 * n));
    auto range = [&](int a, int b) {
      std::vector<int> rows(b - a);
      std::iota(rows.begin(), rows.end(), a);
      return SelectRows(t, rows);
    };
    BlockSplit s;
    s.name = design.blocks[k].name;
    s.columns = design.blocks[k].columns;
    s.train = range(0, n_train);
    s.val = range(n_train, n_train + n_val);
    s.test = range(n_train + n_val, n);
    bench.blocks.push_back(std::move(s));
  }
  return bench;
}

Json CopulaToJson(const CopulaSpec& spec) {
  Json marg = Json::array();
  for (const auto& m : spec.marginals) {
    Json e = {{"kind", KindName(m.kind)}};
    switch (m.kind) {
      case VariableKind::kReal:
      case VariableKind::kPositive:
        e["loc"] = m.loc;
        e["scale"] = m.scale;
        break;
      case VariableKind::kCount:
        e["rate"] = m.rate;
        break;
      default:
        e["probs"] = VectorToJson(m.probs);
    }
    marg.push_back(std::move(e));
  }
  return {{"schema", SchemaToJson(spec.schema)},
          {"sigma", MatrixToJson(spec.sigma)},
          {"marginals", marg}};
}

CopulaSpec CopulaFromJson(const Json& doc) {
  CopulaSpec spec;
  spec.schema = SchemaFromJson(doc.at("schema"));
  spec.sigma = MatrixFromJson(doc.at("sigma"));
  for (const Json& e : doc.at("marginals")) {
    MarginalSpec m;
    m.kind = ParseKind(e.at("kind").get<std::string>());
    m.loc = e.value("loc", 0.0);
    m.scale = e.value("scale", 1.0);
    m.rate = e.value("rate", 1.0);
    if (e.contains("probs")) m.probs = VectorFromJson(e.at("probs"));
    spec.marginals.push_back(std::move(m));
  }
  return spec;
}

Json DesignToJson(const BlockDesign& design) {
  Json blocks = Json::array();
  for (const auto& b : design.blocks) {
    blocks.push_back({{"name", b.name}, {"rows", b.rows}, {"columns", b.columns}});
  }
  return {{"core", design.core}, {"blocks", blocks}};
}

BlockDesign DesignFromJson(const Json& doc) {
  BlockDesign d;
  d.core = doc.at("core").get<std::vector<int>>();
  for (const Json& b : doc.at("blocks")) {
    d.blocks.push_back({b.at("name").get<std::string>(), b.at("rows").get<int>(),
                        b.at("columns").get<std::vector<int>>()});
  }
  return d;
}

std::string WriteBenchmark(const Benchmark& bench, const std::string& dir, uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("schema.json", SchemaToJson(bench.spec.schema).dump(2) + "\n");
  for (const auto& b : bench.blocks) {
    for (const auto& [split, table] :
         {std::pair{"train", &b.train}, std::pair{"val", &b.val}, std::pair{"test", &b.test}}) {
      std::ostringstream csv;
      WriteTableCsv(*table, csv);
      files.emplace_back(b.name + "_" + split + ".csv", csv.str());
    }
  }
  std::string all;
  Json checksums = Json::object();
  for (const auto& [name, text] : files) {
    checksums[name] = Checksum(text);
    all += name + '\n' + text;
  }
  Json manifest = {{"format_version", kFormatVersion},
                   {"seed", seed},
                   {"copula", CopulaToJson(bench.spec)},
                   {"design", DesignToJson(bench.design)},
                   {"files", checksums}};
  const std::string manifest_text = manifest.dump(2) + "\n";
  all += "manifest.json\n" + manifest_text;
  for (const auto& [name, text] : files) WriteFileText(dir + "/" + name, text);
  WriteFileText(dir + "/manifest.json", manifest_text);
  return Checksum(all);
}

Benchmark ReadBenchmark(const std::string& dir) {
  const Json manifest = Json::parse(ReadFileText(dir + "/manifest.json"));
  Benchmark bench;
  bench.spec = CopulaFromJson(manifest.at("copula"));
  bench.design = DesignFromJson(manifest.at("design"));
  const int64_t version = bench.spec.schema.version();
  for (const auto& b : bench.design.blocks) {
    BlockSplit s;
    s.name = b.name;
    s.columns = b.columns;
    s.train = ReadTableFile(dir + "/" + b.name + "_train.csv", version);
    s.val = ReadTableFile(dir + "/" + b.name + "_val.csv", version);
    s.test = ReadTableFile(dir + "/" + b.name + "_test.csv", version);
    bench.blocks.push_back(std::move(s));
  }
  return bench;
}

}  // namespace vhgm
