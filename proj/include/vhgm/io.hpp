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
#ifndef VHGM_IO_HPP_
#define VHGM_IO_HPP_

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "vhgm/schema.hpp"

namespace vhgm {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kDatasetTagColumn = "__dataset_tag";

Json SchemaToJson(const DatasetSchema& schema);
DatasetSchema SchemaFromJson(const Json& doc);

DatasetSchema ReadSchemaFile(const std::string& path);
void WriteSchemaFile(const DatasetSchema& schema, const std::string& path);

// CSV with a header of attribute ids; empty field = missing; class codes are
// 1-based integers; `__dataset_tag` names the source of each row. Values are
// written with round-trip precision.
void WriteTableCsv(const HeteroTable& table, std::ostream& out);
HeteroTable ReadTableCsv(std::istream& in, int64_t schema_version);
void WriteTableFile(const HeteroTable& table, const std::string& path);
HeteroTable ReadTableFile(const std::string& path, int64_t schema_version);

Json StatsToJson(const TrainStats& stats);
TrainStats StatsFromJson(const Json& doc);

Json MatrixToJson(const Matrix& m);
Matrix MatrixFromJson(const Json& doc);

std::string ReadFileText(const std::string& path);
void WriteFileText(const std::string& path, const std::string& text);

// FNV-1a 64 of a byte string, hex encoded.
std::string Checksum(const std::string& bytes);

}  // namespace vhgm

#endif  // VHGM_IO_HPP_
