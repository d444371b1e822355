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
#include "vhgm/checkpoint.hpp"

namespace vhgm {

Json CheckpointToJson(const Checkpoint& ckpt) {
  Json params = Json::array();
  for (const auto& [name, m] : ckpt.parameters) {
    Json p = MatrixToJson(m);
    p["name"] = name;
    params.push_back(std::move(p));
  }
  return {{"format_version", ckpt.format_version},
          {"model_kind", ckpt.model_kind},
          {"schema_version", ckpt.schema.version()},
          {"schema", SchemaToJson(ckpt.schema)},
          {"config", ckpt.config},
          {"train_stats", StatsToJson(ckpt.stats)},
          {"parameters", std::move(params)}};
}

Checkpoint CheckpointFromJson(const Json& doc) {
  Checkpoint c;
  try {
    c.format_version = doc.at("format_version").get<int>();
    if (c.format_version != kFormatVersion) {
      throw Error(ErrorCode::kCheckpointMismatch,
                  "unsupported checkpoint format_version " + std::to_string(c.format_version));
    }
    c.model_kind = doc.at("model_kind").get<std::string>();
    c.schema = SchemaFromJson(doc.at("schema"));
    if (doc.at("schema_version").get<int64_t>() != c.schema.version()) {
      throw Error(ErrorCode::kCheckpointMismatch, "schema_version differs from embedded schema");
    }
    c.config = doc.at("config");
    c.stats = StatsFromJson(doc.at("train_stats"));
    for (const auto& p : doc.at("parameters")) {
      c.parameters.emplace_back(p.at("name").get<std::string>(), MatrixFromJson(p));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("checkpoint: ") + e.what());
  }
  if (c.stats.schema_version != c.schema.version() || c.stats.size() != c.schema.size()) {
    throw Error(ErrorCode::kCheckpointMismatch, "train stats do not match checkpoint schema");
  }
  return c;
}

void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path) {
  WriteFileText(path, CheckpointToJson(ckpt).dump());
}

Checkpoint LoadCheckpoint(const std::string& path) {
  const std::string text = ReadFileText(path);
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
  return CheckpointFromJson(doc);
}

void LoadParameters(const Checkpoint& ckpt, ad::ParameterSet& params) {
  if (ckpt.parameters.size() != params.size()) {
    throw Error(ErrorCode::kCheckpointMismatch,
                "checkpoint has " + std::to_string(ckpt.parameters.size()) +
                    " tensors, model expects " + std::to_string(params.size()));
  }
  for (const auto& [name, m] : ckpt.parameters) {
    if (!params.contains(name)) {
      throw Error(ErrorCode::kCheckpointMismatch, "unexpected tensor '" + name + "'");
    }
    ad::Parameter& p = params.get(name);
    if (p.value.rows() != m.rows() || p.value.cols() != m.cols()) {
      throw Error(ErrorCode::kCheckpointMismatch,
                  "tensor '" + name + "' has shape " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()) + ", expected " + std::to_string(p.value.rows()) +
                      "x" + std::to_string(p.value.cols()));
    }
    p.value = m;
  }
}

std::vector<std::pair<std::string, Matrix>> SnapshotParameters(const ad::ParameterSet& params) {
  std::vector<std::pair<std::string, Matrix>> out;
  for (const auto* p : params.all()) out.emplace_back(p->name, p->value);
  return out;
}

}  // namespace vhgm
