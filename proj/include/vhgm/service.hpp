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
#ifndef VHGM_SERVICE_HPP_
#define VHGM_SERVICE_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "vhgm/model.hpp"

namespace httplib {
class Server;
}

namespace vhgm {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  // Relative checkpoint paths are resolved against this directory.
  std::string registry_dir = ".";
  int max_sampling_n = 1000;
  size_t max_body_bytes = 1 << 20;
};

struct ModelEntry {
  std::string model_id;
  std::string checkpoint_path;
  std::string model_kind;
  int64_t schema_version = 0;
  std::shared_ptr<const GenerativeModel> model;
};

// Models are shared read-only; registration and activation take the writer
// side of one lock.
class ModelRegistry {
 public:
  ModelRegistry() = default;
  explicit ModelRegistry(SchemaStore store) : schemas_(std::move(store)) {}

  void AddSchema(DatasetSchema schema);
  std::optional<DatasetSchema> FindSchema(int64_t version) const;

  // Throws UnknownSchemaVersion when the model's schema version is not in
  // the store and CheckpointMismatch when the stored schema differs.
  void Register(const std::string& model_id, std::shared_ptr<const GenerativeModel> model,
                const std::string& checkpoint_path = {}, bool activate = false);
  void RegisterCheckpoint(const std::string& model_id, const std::string& path,
                          bool activate = false);
  void Activate(const std::string& model_id);

  // Empty id selects the default model.
  std::optional<ModelEntry> Find(const std::string& model_id) const;
  std::vector<ModelEntry> List() const;
  std::string default_model() const;

 private:
  mutable std::shared_mutex mu_;
  SchemaStore schemas_;
  std::map<std::string, ModelEntry> models_;
  std::string default_model_;
};

// registry.json: {"schemas": [paths], "models": [{"model_id", "checkpoint"}],
// "default_model": id}. Paths are relative to `dir`.
std::shared_ptr<ModelRegistry> LoadRegistry(const std::string& dir);

struct HttpReply {
  int status = 200;
  std::string body;
};

class PredictionService {
 public:
  PredictionService(std::shared_ptr<ModelRegistry> registry, ServiceConfig config);

  HttpReply Predict(const std::string& body) const;
  HttpReply GetSchema(const std::string& version) const;
  HttpReply ListModels() const;
  HttpReply RegisterModel(const std::string& body);
  HttpReply Health() const;

  // Routes one request; unknown routes give 404.
  HttpReply Handle(const std::string& method, const std::string& path,
                   const std::string& body);

  void Mount(httplib::Server& server);
  const ServiceConfig& config() const { return config_; }

 private:
  std::shared_ptr<ModelRegistry> registry_;
  ServiceConfig config_;
};

// Structured error body {code, message, attribute_id?}.
std::string ErrorBody(const std::string& code, const std::string& message,
                      const std::string& attribute_id = {});

// Blocks until the server stops.
bool RunServer(PredictionService& service);

}  // namespace vhgm

#endif  // VHGM_SERVICE_HPP_
