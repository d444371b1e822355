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
#include "vhgm/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <limits>
#include <mutex>
#include <random>

#include "vhgm/hivae.hpp"

namespace vhgm {
namespace {

namespace fs = std::filesystem;

bool SameSchema(const DatasetSchema& a, const DatasetSchema& b) {
  return SchemaToJson(a) == SchemaToJson(b);
}

std::string Resolve(const std::string& dir, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? path : (fs::path(dir) / p).string();
}

HttpReply Fail(int status, const std::string& code, const std::string& message,
               const std::string& attribute_id = {}) {
  return {status, ErrorBody(code, message, attribute_id)};
}

HttpReply FromError(const Error& e) {
  int status = 500;
  switch (e.code()) {
    case ErrorCode::kTypeMismatch:
    case ErrorCode::kAttributeNotInSchema:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParseError:
      status = 400;
      break;
    case ErrorCode::kUnknownSchemaVersion:
    case ErrorCode::kCheckpointMismatch:
    case ErrorCode::kStatsSchemaMismatch:
    case ErrorCode::kIoError:
      status = 422;
      break;
    case ErrorCode::kUntrainedModel:
      status = 409;
      break;
    default:
      break;
  }
  return Fail(status, ErrorCodeName(e.code()), e.what(), e.attribute_id());
}

// Decodes one input value. Class attributes also accept their labels.
double InputValue(const AttributeSpec& a, const Json& v) {
  if (v.is_null()) return kMissing;
  if (v.is_string() && a.var_type.is_discrete_class()) {
    const auto& labels = a.category_labels;
    const auto it = std::find(labels.begin(), labels.end(), v.get<std::string>());
    if (it != labels.end()) return static_cast<double>(it - labels.begin() + 1);
  }
  if (!v.is_number()) {
    throw Error(ErrorCode::kTypeMismatch, "value for '" + a.id + "' has the wrong JSON type",
                a.id);
  }
  const double x = v.get<double>();
  if (!a.var_type.accepts(x)) {
    throw Error(ErrorCode::kTypeMismatch, "value for '" + a.id + "' is outside its domain", a.id);
  }
  return x;
}

Json AttributeJson(const DatasetSchema& schema, const ParamsRow& row, bool with_point) {
  Json out = Json::array();
  for (int j = 0; j < schema.size(); ++j) {
    Json item{{"id", schema.attribute(j).id}, {"params", ParamsToJson(row[j])}};
    if (with_point) item["point_estimate"] = Mode(row[j]);
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace

std::string ErrorBody(const std::string& code, const std::string& message,
                      const std::string& attribute_id) {
  Json e{{"code", code}, {"message", message}};
  if (!attribute_id.empty()) e["attribute_id"] = attribute_id;
  return e.dump();
}

// ---- registry ---------------------------------------------------------------

void ModelRegistry::AddSchema(DatasetSchema schema) {
  std::unique_lock lock(mu_);
  schemas_.put(std::move(schema));
}

std::optional<DatasetSchema> ModelRegistry::FindSchema(int64_t version) const {
  std::shared_lock lock(mu_);
  const DatasetSchema* s = schemas_.find(version);
  if (!s) return std::nullopt;
  return *s;
}

void ModelRegistry::Register(const std::string& model_id,
                             std::shared_ptr<const GenerativeModel> model,
                             const std::string& checkpoint_path, bool activate) {
  if (model_id.empty()) throw Error(ErrorCode::kInvalidArgument, "model_id must not be empty");
  std::unique_lock lock(mu_);
  const DatasetSchema& schema = model->schema();
  const DatasetSchema* known = schemas_.find(schema.version());
  if (!known) {
    throw Error(ErrorCode::kUnknownSchemaVersion,
                "schema version " + std::to_string(schema.version()) + " is not registered");
  }
  if (!SameSchema(*known, schema)) {
    throw Error(ErrorCode::kCheckpointMismatch,
                "model schema differs from registered version " +
                    std::to_string(schema.version()));
  }
  ModelEntry e;
  e.model_id = model_id;
  e.checkpoint_path = checkpoint_path;
  e.model_kind = model->kind();
  e.schema_version = schema.version();
  e.model = std::move(model);
  models_[model_id] = std::move(e);
  if (activate || default_model_.empty()) default_model_ = model_id;
}

void ModelRegistry::RegisterCheckpoint(const std::string& model_id, const std::string& path,
                                       bool activate) {
  // Loading happens outside the lock; only the insertion is serialized.
  std::shared_ptr<const GenerativeModel> model = ModelFromCheckpoint(LoadCheckpoint(path));
  Register(model_id, std::move(model), path, activate);
}

void ModelRegistry::Activate(const std::string& model_id) {
  std::unique_lock lock(mu_);
  if (!models_.count(model_id)) {
    throw Error(ErrorCode::kInvalidArgument, "unknown model '" + model_id + "'");
  }
  default_model_ = model_id;
}

std::optional<ModelEntry> ModelRegistry::Find(const std::string& model_id) const {
  std::shared_lock lock(mu_);
  const auto it = models_.find(model_id.empty() ? default_model_ : model_id);
  if (it == models_.end()) return std::nullopt;
  return it->second;
}

std::vector<ModelEntry> ModelRegistry::List() const {
  std::shared_lock lock(mu_);
  std::vector<ModelEntry> out;
  for (const auto& [id, e] : models_) out.push_back(e);
  return out;
}

std::string ModelRegistry::default_model() const {
  std::shared_lock lock(mu_);
  return default_model_;
}

std::shared_ptr<ModelRegistry> LoadRegistry(const std::string& dir) {
  const std::string path = Resolve(dir, "registry.json");
  Json doc;
  try {
    doc = Json::parse(ReadFileText(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
  auto reg = std::make_shared<ModelRegistry>();
  for (const auto& s : doc.value("schemas", Json::array())) {
    reg->AddSchema(ReadSchemaFile(Resolve(dir, s.get<std::string>())));
  }
  for (const auto& m : doc.value("models", Json::array())) {
    reg->RegisterCheckpoint(m.at("model_id").get<std::string>(),
                            Resolve(dir, m.at("checkpoint").get<std::string>()));
  }
  if (doc.contains("default_model")) reg->Activate(doc["default_model"].get<std::string>());
  return reg;
}

// ---- handlers ---------------------------------------------------------------

PredictionService::PredictionService(std::shared_ptr<ModelRegistry> registry,
                                     ServiceConfig config)
    : registry_(std::move(registry)), config_(std::move(config)) {}

HttpReply PredictionService::Predict(const std::string& body) const {
  const auto start = std::chrono::steady_clock::now();
  if (body.size() > config_.max_body_bytes) {
    return Fail(413, "PayloadTooLarge", "request body exceeds " +
                                            std::to_string(config_.max_body_bytes) + " bytes");
  }
  Json req;
  try {
    req = Json::parse(body);
  } catch (const Json::exception& e) {
    return Fail(400, "ParseError", std::string("malformed JSON: ") + e.what());
  }
  if (!req.is_object()) return Fail(400, "ParseError", "request must be a JSON object");

  std::string model_id;
  if (req.contains("model_id")) {
    if (!req["model_id"].is_string()) return Fail(400, "InvalidArgument", "model_id must be a string");
    model_id = req["model_id"].get<std::string>();
  }
  const std::optional<ModelEntry> entry = registry_->Find(model_id);
  if (!entry) {
    return Fail(404, "UnknownModel",
                model_id.empty() ? "no default model" : "unknown model '" + model_id + "'");
  }
  const DatasetSchema& schema = entry->model->schema();
  if (req.contains("schema_version")) {
    const Json& v = req["schema_version"];
    if (!v.is_number_integer()) return Fail(400, "InvalidArgument", "schema_version must be an integer");
    if (v.get<int64_t>() != entry->schema_version) {
      return Fail(422, "SchemaVersionConflict",
                  "model '" + entry->model_id + "' is bound to schema version " +
                      std::to_string(entry->schema_version));
    }
  }

  std::optional<int> sampling_n;
  if (req.contains("sampling_n") && !req["sampling_n"].is_null()) {
    if (entry->model_kind != "hivae") {
      return Fail(409, "SamplingUnsupported",
                  "latent-variable sampling is only available for hivae models");
    }
    const Json& v = req["sampling_n"];
    if (!v.is_number_integer() || v.get<int64_t>() < 1 ||
        v.get<int64_t>() > config_.max_sampling_n) {
      return Fail(400, "InvalidArgument",
                  "sampling_n must be an integer in [1, " +
                      std::to_string(config_.max_sampling_n) + "]");
    }
    sampling_n = v.get<int>();
  }
  std::optional<uint64_t> seed;
  if (req.contains("seed") && !req["seed"].is_null()) {
    const Json& v = req["seed"];
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<int64_t>() >= 0)) {
      return Fail(400, "InvalidArgument", "seed must be a non-negative integer");
    }
    seed = v.get<uint64_t>();
  }

  RowVector raw = RowVector::Constant(schema.size(), kMissing);
  if (req.contains("inputs")) {
    const Json& inputs = req["inputs"];
    if (!inputs.is_object()) return Fail(400, "InvalidArgument", "inputs must be an object");
    for (const auto& [id, v] : inputs.items()) {
      const std::optional<int> j = schema.index_of(id);
      if (!j) return Fail(400, "AttributeNotInSchema", "unknown attribute '" + id + "'", id);
      try {
        raw(*j) = InputValue(schema.attribute(*j), v);
      } catch (const Error& e) {
        return FromError(e);
      }
    }
  }

  Json out{{"model_id", entry->model_id},
           {"model_kind", entry->model_kind},
           {"schema_version", entry->schema_version}};
  try {
    if (sampling_n) {
      const auto* hivae = dynamic_cast<const HivaeModel*>(entry->model.get());
      ad::Rng rng(seed ? *seed : std::random_device{}());
      Json samples = Json::array();
      for (const ParamsRow& row : hivae->ImputeSamples(raw, *sampling_n, rng)) {
        samples.push_back(AttributeJson(schema, row, false));
      }
      out["sampling_n"] = *sampling_n;
      out["samples"] = std::move(samples);
    } else {
      out["attributes"] = AttributeJson(schema, entry->model->Impute(raw).front(), true);
    }
  } catch (const Error& e) {
    return FromError(e);
  }
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start).count();
  out["timing"] = {{"server_ms", ms}};
  return {200, out.dump()};
}

HttpReply PredictionService::GetSchema(const std::string& version) const {
  int64_t v = 0;
  try {
    size_t used = 0;
    v = std::stoll(version, &used);
    if (used != version.size()) throw std::invalid_argument(version);
  } catch (const std::exception&) {
    return Fail(400, "InvalidArgument", "schema version must be an integer");
  }
  const std::optional<DatasetSchema> s = registry_->FindSchema(v);
  if (!s) return Fail(404, "UnknownSchemaVersion", "schema version " + version + " not found");
  return {200, SchemaToJson(*s).dump()};
}

HttpReply PredictionService::ListModels() const {
  Json models = Json::array();
  for (const ModelEntry& e : registry_->List()) {
    models.push_back({{"model_id", e.model_id},
                      {"model_kind", e.model_kind},
                      {"schema_version", e.schema_version},
                      {"checkpoint", e.checkpoint_path}});
  }
  return {200, Json{{"default_model", registry_->default_model()}, {"models", models}}.dump()};
}

HttpReply PredictionService::RegisterModel(const std::string& body) {
  Json req;
  try {
    req = Json::parse(body);
  } catch (const Json::exception& e) {
    return Fail(400, "ParseError", std::string("malformed JSON: ") + e.what());
  }
  if (!req.is_object() || !req.contains("model_id") || !req["model_id"].is_string() ||
      !req.contains("checkpoint") || !req["checkpoint"].is_string()) {
    return Fail(400, "InvalidArgument", "model_id and checkpoint strings are required");
  }
  const std::string id = req["model_id"].get<std::string>();
  try {
    registry_->RegisterCheckpoint(id, Resolve(config_.registry_dir, req["checkpoint"].get<std::string>()),
                                  req.value("activate", false));
  } catch (const Error& e) {
    HttpReply r = FromError(e);
    if (r.status == 400 && e.code() == ErrorCode::kParseError) r.status = 422;
    return r;
  }
  const ModelEntry e = *registry_->Find(id);
  return {201, Json{{"model_id", e.model_id},
                    {"model_kind", e.model_kind},
                    {"schema_version", e.schema_version}}.dump()};
}

HttpReply PredictionService::Health() const { return {200, R"({"status":"ok"})"}; }

HttpReply PredictionService::Handle(const std::string& method, const std::string& path,
                                    const std::string& body) {
  const std::string schema_prefix = "/v1/schema/";
  auto only = [&](const char* allowed, auto&& fn) -> HttpReply {
    if (method != allowed) return Fail(405, "MethodNotAllowed", method + " " + path);
    return fn();
  };
  try {
    if (path == "/healthz") return only("GET", [&] { return Health(); });
    if (path == "/v1/predict") return only("POST", [&] { return Predict(body); });
    if (path == "/v1/models") {
      if (method == "GET") return ListModels();
      if (method == "POST") return RegisterModel(body);
      return Fail(405, "MethodNotAllowed", method + " " + path);
    }
    if (path.rfind(schema_prefix, 0) == 0) {
      return only("GET", [&] { return GetSchema(path.substr(schema_prefix.size())); });
    }
  } catch (const std::exception& e) {
    return Fail(500, "Internal", e.what());
  }
  return Fail(404, "NotFound", "no route for " + path);
}

void PredictionService::Mount(httplib::Server& server) {
  server.set_payload_max_length(config_.max_body_bytes);
  auto bind = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpReply r = Handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Get("/healthz", bind);
  server.Post("/v1/predict", bind);
  server.Get("/v1/models", bind);
  server.Post("/v1/models", bind);
  server.Get(R"(/v1/schema/([^/]+))", bind);
  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 413 ? "PayloadTooLarge" : "NotFound";
    res.set_content(ErrorBody(code, req.method + " " + req.path), "application/json");
  });
  server.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "unknown error";
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          what = e.what();
        } catch (...) {
        }
        res.status = 500;
        res.set_content(ErrorBody("Internal", what), "application/json");
      });
}

bool RunServer(PredictionService& service) {
  httplib::Server server;
  service.Mount(server);
  return server.listen(service.config().host, service.config().port);
}

}  // namespace vhgm
