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
#include "vhgm/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vhgm {

Json SchemaToJson(const DatasetSchema& schema) {
  Json attrs = Json::array();
  for (const auto& a : schema.attributes()) {
    Json item = {{"id", a.id}, {"name", a.name}, {"kind", KindName(a.var_type.kind)}};
    if (a.var_type.is_discrete_class()) {
      item["num_categories"] = a.var_type.num_categories;
      item["category_labels"] = a.category_labels;
    }
    attrs.push_back(std::move(item));
  }
  return {{"version", schema.version()}, {"attributes", std::move(attrs)}};
}

DatasetSchema SchemaFromJson(const Json& doc) {
  try {
    std::vector<AttributeSpec> attrs;
    for (const auto& item : doc.at("attributes")) {
      AttributeSpec a;
      a.id = item.at("id").get<std::string>();
      a.name = item.value("name", a.id);
      a.var_type.kind = ParseKind(item.at("kind").get<std::string>());
      if (a.var_type.is_discrete_class()) {
        a.var_type.num_categories = item.at("num_categories").get<int>();
        if (item.contains("category_labels")) {
          a.category_labels = item.at("category_labels").get<std::vector<std::string>>();
        }
      } else if (item.contains("num_categories")) {
        throw Error(ErrorCode::kInvalidSchema, "num_categories on non-class attribute", a.id);
      }
      attrs.push_back(std::move(a));
    }
    return DatasetSchema(doc.at("version").get<int64_t>(), std::move(attrs));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed schema document: ") + e.what());
  }
}

std::string ReadFileText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path + "'");
  out << text;
}

DatasetSchema ReadSchemaFile(const std::string& path) {
  Json doc;
  try {
    doc = Json::parse(ReadFileText(path));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kParseError, "schema '" + path + "': " + e.what());
  }
  return SchemaFromJson(doc);
}

void WriteSchemaFile(const DatasetSchema& schema, const std::string& path) {
  WriteFileText(path, SchemaToJson(schema).dump(2) + "\n");
}

namespace {

std::string FormatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string QuoteCsv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

void WriteTableCsv(const HeteroTable& table, std::ostream& out) {
  for (int c = 0; c < table.cols(); ++c) out << QuoteCsv(table.columns[c]) << ',';
  out << kDatasetTagColumn << '\n';
  for (int i = 0; i < table.rows(); ++i) {
    for (int c = 0; c < table.cols(); ++c) {
      const double v = table.values(i, c);
      if (!std::isnan(v)) out << FormatDouble(v);
      out << ',';
    }
    out << QuoteCsv(table.row_tags.empty() ? std::string() : table.row_tags[i]) << '\n';
  }
}

HeteroTable ReadTableCsv(std::istream& in, int64_t schema_version) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "empty table file");
  auto header = SplitCsvLine(line);
  int tag_col = -1;
  HeteroTable table;
  table.schema_version = schema_version;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (header[c] == kDatasetTagColumn) {
      tag_col = c;
    } else {
      table.columns.push_back(header[c]);
    }
  }
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = SplitCsvLine(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kColumnCountMismatch,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields");
    }
    std::vector<double> row;
    row.reserve(table.columns.size());
    std::string tag;
    for (int c = 0; c < static_cast<int>(fields.size()); ++c) {
      if (c == tag_col) {
        tag = fields[c];
        continue;
      }
      const std::string& f = fields[c];
      if (f.empty()) {
        row.push_back(kMissing);
        continue;
      }
      double v = 0.0;
      auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(line_no) + ": bad number '" + f + "'", header[c]);
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
    table.row_tags.push_back(std::move(tag));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.columns.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t c = 0; c < rows[i].size(); ++c) {
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
  }
  return table;
}

void WriteTableFile(const HeteroTable& table, const std::string& path) {
  std::ostringstream ss;
  WriteTableCsv(table, ss);
  WriteFileText(path, ss.str());
}

HeteroTable ReadTableFile(const std::string& path, int64_t schema_version) {
  std::istringstream ss(ReadFileText(path));
  return ReadTableCsv(ss, schema_version);
}

Json MatrixToJson(const Matrix& m) {
  std::vector<double> data(static_cast<size_t>(m.size()));
  // Row-major on the wire.
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      data.data(), m.rows(), m.cols()) = m;
  return {{"shape", {m.rows(), m.cols()}}, {"data", data}};
}

Matrix MatrixFromJson(const Json& doc) {
  const auto shape = doc.at("shape").get<std::vector<int64_t>>();
  const auto data = doc.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0 ||
      static_cast<int64_t>(data.size()) != shape[0] * shape[1]) {
    throw Error(ErrorCode::kShapeMismatch, "tensor shape does not match its data length");
  }
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      data.data(), shape[0], shape[1]);
}

Json StatsToJson(const TrainStats& stats) {
  Json attrs = Json::array();
  for (const auto& s : stats.attributes) {
    Json item = {{"kind", KindName(s.kind)}, {"mean", s.mean},       {"std", s.std},
                 {"raw_mean", s.raw_mean},   {"mode", s.mode}};
    if (s.class_probs.size() > 0) {
      item["class_probs"] = std::vector<double>(s.class_probs.data(),
                                                s.class_probs.data() + s.class_probs.size());
    }
    attrs.push_back(std::move(item));
  }
  return {{"schema_version", stats.schema_version}, {"attributes", std::move(attrs)}};
}

TrainStats StatsFromJson(const Json& doc) {
  TrainStats stats;
  stats.schema_version = doc.at("schema_version").get<int64_t>();
  for (const auto& item : doc.at("attributes")) {
    AttributeStats s;
    s.kind = ParseKind(item.at("kind").get<std::string>());
    s.mean = item.at("mean").get<double>();
    s.std = item.at("std").get<double>();
    s.raw_mean = item.at("raw_mean").get<double>();
    s.mode = item.at("mode").get<double>();
    if (item.contains("class_probs")) {
      const auto p = item.at("class_probs").get<std::vector<double>>();
      s.class_probs = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
    }
    stats.attributes.push_back(std::move(s));
  }
  return stats;
}

std::string Checksum(const std::string& bytes) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace vhgm
