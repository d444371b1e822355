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
#ifndef VHGM_TESTS_FIXTURES_HPP_
#define VHGM_TESTS_FIXTURES_HPP_

#include <random>
#include <string>
#include <vector>

#include "vhgm/autodiff.hpp"
#include "vhgm/schema.hpp"

namespace vhgm::testing {

inline AttributeSpec Attr(const std::string& id, VariableKind kind, int classes = 0) {
  return {id, id, {kind, classes}, {}};
}

// real, positive, count, categorical(3), ordinal(4)
inline DatasetSchema ToySchema() {
  return DatasetSchema(1, {Attr("r", VariableKind::kReal), Attr("p", VariableKind::kPositive),
                           Attr("n", VariableKind::kCount),
                           Attr("c", VariableKind::kCategorical, 3),
                           Attr("o", VariableKind::kOrdinal, 4)});
}

// real, count, categorical(3), ordinal(3)
inline DatasetSchema MicroSchema() {
  return DatasetSchema(1, {Attr("r", VariableKind::kReal), Attr("n", VariableKind::kCount),
                           Attr("c", VariableKind::kCategorical, 3),
                           Attr("o", VariableKind::kOrdinal, 3)});
}

// Correlated draws for any schema; each cell missing with `missing_rate`.
inline HeteroTable ToyTable(const DatasetSchema& schema, int n, double missing_rate,
                            uint64_t seed) {
  ad::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  HeteroTable t;
  t.schema_version = schema.version();
  for (const auto& a : schema.attributes()) t.columns.push_back(a.id);
  t.values.resize(n, schema.size());
  t.row_tags.assign(n, "toy");
  for (int i = 0; i < n; ++i) {
    const double f = normal(rng);
    for (int j = 0; j < schema.size(); ++j) {
      const VariableType& vt = schema.attribute(j).var_type;
      const double u = 0.8 * f + 0.6 * normal(rng);
      double v = 0.0;
      switch (vt.kind) {
        case VariableKind::kReal: v = 2.0 + 3.0 * u; break;
        case VariableKind::kPositive: v = std::exp(0.5 * u); break;
        case VariableKind::kCount: v = std::floor(std::exp(1.0 + 0.5 * u)); break;
        case VariableKind::kCategorical:
        case VariableKind::kOrdinal: {
          const double c = std::floor((0.5 + 0.5 * std::erf(u / std::sqrt(2.0))) * vt.num_categories);
          v = 1.0 + std::min<double>(c, vt.num_categories - 1);
          break;
        }
      }
      t.values(i, j) = unif(rng) < missing_rate ? kMissing : v;
    }
  }
  // Every column keeps at least one observed value.
  for (int j = 0; j < schema.size(); ++j) {
    if (std::isnan(t.values(0, j))) {
      t.values(0, j) = 1.0;
    }
  }
  return t;
}

}  // namespace vhgm::testing

#endif  // VHGM_TESTS_FIXTURES_HPP_
