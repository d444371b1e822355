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
#ifndef VHGM_CHECKPOINT_HPP_
#define VHGM_CHECKPOINT_HPP_

#include <string>
#include <utility>
#include <vector>

#include "vhgm/autodiff.hpp"
#include "vhgm/io.hpp"
#include "vhgm/schema.hpp"

namespace vhgm {

// Self-describing JSON container for a trained model.
struct Checkpoint {
  int format_version = kFormatVersion;
  std::string model_kind;
  DatasetSchema schema;
  Json config;
  TrainStats stats;
  std::vector<std::pair<std::string, Matrix>> parameters;
};

Json CheckpointToJson(const Checkpoint& ckpt);
// Throws ParseError on malformed documents and CheckpointMismatch on an
// unsupported format version or inconsistent stats.
Checkpoint CheckpointFromJson(const Json& doc);
void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint LoadCheckpoint(const std::string& path);

// Copies every named tensor into `params`. Missing names, extra names and
// shape differences throw CheckpointMismatch.
void LoadParameters(const Checkpoint& ckpt, ad::ParameterSet& params);
std::vector<std::pair<std::string, Matrix>> SnapshotParameters(const ad::ParameterSet& params);

}  // namespace vhgm

#endif  // VHGM_CHECKPOINT_HPP_
