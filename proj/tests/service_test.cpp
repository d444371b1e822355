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

#include <filesystem>
#include <thread>

#include "fixtures.hpp"
#include "vhgm/hivae.hpp"
#include "vhgm/mae.hpp"
#include "vhgm/service.hpp"

// After Eigen: resolv.h defines a macro that collides with Eigen internals.
#include <httplib.h>

namespace vhgm {
namespace {

using testing::MicroSchema;
using testing::ToySchema;
using testing::ToyTable;

std::shared_ptr<HivaeModel> ToyHivae() {
  const DatasetSchema s = ToySchema();
  HivaeConfig c;
  c.d_s = 3;
  c.d_z = 2;
  c.d_y_shared = 6;
  c.d_y_specific = 2;
  c.hidden = {8};
  auto m = std::make_shared<HivaeModel>(s, ComputeTrainStats(ToyTable(s, 50, 0.1, 1), s), c, 3);
  m->set_trained(true);
  return m;
}

std::shared_ptr<MaeModel> MicroMae() {
  const DatasetSchema s(2, MicroSchema().attributes());
  MaeConfig c;
  c.d_model = 8;
  c.heads = 2;
  c.ffn_hidden = 8;
  c.d_y = 8;
  c.encoder_blocks = 1;
  c.decoder_blocks = 1;
  auto m = std::make_shared<MaeModel>(s, ComputeTrainStats(ToyTable(s, 50, 0.1, 2), s), c, 4);
  m->set_trained(true);
  return m;
}

struct Fixture {
  std::shared_ptr<ModelRegistry> registry = std::make_shared<ModelRegistry>();
  std::shared_ptr<HivaeModel> hivae = ToyHivae();
  std::shared_ptr<MaeModel> mae = MicroMae();
  PredictionService service{registry, ServiceConfig{}};

  Fixture() {
    registry->AddSchema(hivae->schema());
    registry->AddSchema(mae->schema());
    registry->Register("h", hivae);
    registry->Register("m", mae);
  }
  HttpReply Post(const Json& body) { return service.Handle("POST", "/v1/predict", body.dump()); }
};

Json Body(const HttpReply& r) { return Json::parse(r.body); }

std::string WithoutTiming(const std::string& body) {
  Json j = Json::parse(body);
  j.erase("timing");
  return j.dump();
}

TEST_CASE("service health and schema endpoints") {
  Fixture f;
  CHECK(f.service.Handle("GET", "/healthz", "").body == R"({"status":"ok"})");
  const HttpReply s = f.service.Handle("GET", "/v1/schema/1", "");
  REQUIRE(s.status == 200);
  CHECK(Body(s)["attributes"].size() == 5);
  CHECK(SchemaToJson(SchemaFromJson(Body(s))) == Body(s));
  CHECK(f.service.Handle("GET", "/v1/schema/9", "").status == 404);
  CHECK(f.service.Handle("GET", "/v1/schema/x", "").status == 400);
  CHECK(f.service.Handle("GET", "/v1/nothing", "").status == 404);
  CHECK(f.service.Handle("GET", "/v1/predict", "").status == 405);
}

TEST_CASE("deterministic prediction") {
  Fixture f;
  SUBCASE("empty inputs give population-level parameters") {
    const HttpReply r = f.Post({{"model_id", "h"}, {"inputs", Json::object()}});
    REQUIRE(r.status == 200);
    const Json b = Body(r);
    REQUIRE(b["attributes"].size() == 5);
    for (const auto& a : b["attributes"]) {
      CHECK(a.contains("params"));
      CHECK(a.contains("point_estimate"));
    }
    CHECK(b["schema_version"] == 1);
    CHECK(b["model_kind"] == "hivae");
  }
  SUBCASE("matches the library and is byte-stable") {
    const Json req{{"model_id", "h"}, {"inputs", {{"r", 2.5}, {"c", 2}}}};
    const std::string first = WithoutTiming(f.Post(req).body);
    for (int k = 0; k < 20; ++k) CHECK(WithoutTiming(f.Post(req).body) == first);
    RowVector raw = RowVector::Constant(5, kMissing);
    raw(0) = 2.5;
    raw(3) = 2;
    const ParamsRow row = f.hivae->Impute(raw).front();
    const Json b = Json::parse(first);
    for (int j = 0; j < 5; ++j) {
      CHECK(b["attributes"][j]["params"] == ParamsToJson(row[j]));
      CHECK(b["attributes"][j]["point_estimate"] == Mode(row[j]));
    }
  }
  SUBCASE("default model") {
    CHECK(f.registry->default_model() == "h");
    CHECK(f.Post(Json::object()).status == 200);
  }
}

TEST_CASE("prediction input validation") {
  Fixture f;
  auto expect = [&](const Json& body, int status, const std::string& code,
                    const std::string& attribute = {}) {
    const HttpReply r = f.Post(body);
    CHECK(r.status == status);
    const Json b = Body(r);
    CHECK(b["code"] == code);
    CHECK(b.contains("message"));
    if (!attribute.empty()) CHECK(b["attribute_id"] == attribute);
  };
  expect({{"model_id", "h"}, {"inputs", {{"r", "high"}}}}, 400, "TypeMismatch", "r");
  expect({{"model_id", "h"}, {"inputs", {{"c", 7}}}}, 400, "TypeMismatch", "c");
  expect({{"model_id", "h"}, {"inputs", {{"n", 1.5}}}}, 400, "TypeMismatch", "n");
  expect({{"model_id", "h"}, {"inputs", {{"zz", 1}}}}, 400, "AttributeNotInSchema", "zz");
  expect({{"model_id", "h"}, {"inputs", Json::array()}}, 400, "InvalidArgument");
  expect({{"model_id", "nope"}}, 404, "UnknownModel");
  expect({{"model_id", "h"}, {"schema_version", 2}}, 422, "SchemaVersionConflict");
  expect({{"model_id", "h"}, {"sampling_n", 0}}, 400, "InvalidArgument");
  expect({{"model_id", "h"}, {"sampling_n", 1001}}, 400, "InvalidArgument");
  expect({{"model_id", "h"}, {"seed", -1}}, 400, "InvalidArgument");
  expect({{"model_id", "m"}, {"sampling_n", 5}}, 409, "SamplingUnsupported");

  const HttpReply bad = f.service.Handle("POST", "/v1/predict", "{not json");
  CHECK(bad.status == 400);
  CHECK(Body(bad)["code"] == "ParseError");
  CHECK(f.service.Handle("POST", "/v1/predict", "[1,2]").status == 400);
  const std::string huge(ServiceConfig{}.max_body_bytes + 1, ' ');
  CHECK(f.service.Handle("POST", "/v1/predict", huge).status == 413);
}

TEST_CASE("sampling prediction") {
  Fixture f;
  const Json req{{"model_id", "h"}, {"inputs", {{"r", 1.0}}}, {"sampling_n", 100}, {"seed", 5}};
  const HttpReply a = f.Post(req);
  REQUIRE(a.status == 200);
  const Json b = Body(a);
  REQUIRE(b["samples"].size() == 100);
  CHECK(b["samples"][0].size() == 5);
  CHECK(!b["samples"][0][0].contains("point_estimate"));
  CHECK(WithoutTiming(f.Post(req).body) == WithoutTiming(a.body));

  Json one = req;
  one["sampling_n"] = 1;
  RowVector raw = RowVector::Constant(5, kMissing);
  raw(0) = 1.0;
  ad::Rng rng(5);
  const ParamsRow expected = f.hivae->ImputeSamples(raw, 1, rng).front();
  const Json got = Body(f.Post(one))["samples"][0];
  for (int j = 0; j < 5; ++j) CHECK(got[j]["params"] == ParamsToJson(expected[j]));
}

TEST_CASE("model registry lifecycle") {
  Fixture f;
  const auto dir = std::filesystem::temp_directory_path() / "vhgm_registry_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  SaveCheckpoint(f.hivae->ToCheckpoint(), (dir / "h.json").string());
  Checkpoint orphan = f.hivae->ToCheckpoint();
  orphan.schema = DatasetSchema(7, orphan.schema.attributes());
  orphan.stats.schema_version = 7;
  SaveCheckpoint(orphan, (dir / "orphan.json").string());

  ServiceConfig cfg;
  cfg.registry_dir = dir.string();
  PredictionService svc(f.registry, cfg);
  const HttpReply ok =
      svc.Handle("POST", "/v1/models", Json{{"model_id", "h2"}, {"checkpoint", "h.json"}}.dump());
  CHECK(ok.status == 201);
  CHECK(Body(ok)["model_kind"] == "hivae");
  const HttpReply p1 = svc.Predict(Json{{"model_id", "h2"}, {"inputs", {{"r", 0.3}}}}.dump());
  const HttpReply p2 = svc.Predict(Json{{"model_id", "h"}, {"inputs", {{"r", 0.3}}}}.dump());
  CHECK(p1.status == 200);
  CHECK(Body(p1)["attributes"] == Body(p2)["attributes"]);

  const HttpReply orphaned = svc.Handle(
      "POST", "/v1/models", Json{{"model_id", "o"}, {"checkpoint", "orphan.json"}}.dump());
  CHECK(orphaned.status == 422);
  CHECK(Body(orphaned)["code"] == "UnknownSchemaVersion");
  CHECK(svc.Handle("POST", "/v1/models", Json{{"model_id", "x"}, {"checkpoint", "missing.json"}}.dump())
            .status == 422);
  CHECK(svc.Handle("POST", "/v1/models", R"({"model_id": 3})").status == 400);

  const Json listing = Body(svc.Handle("GET", "/v1/models", ""));
  REQUIRE(listing["models"].size() == 3);
  CHECK(listing["models"][2]["model_id"] == "m");
  CHECK(listing["models"][2]["schema_version"] == 2);
  CHECK(listing["models"][2]["model_kind"] == "mae");

  // Models over different schema versions answer independently.
  const Json pm = Body(svc.Predict(Json{{"model_id", "m"}, {"inputs", {{"o", 2}}}}.dump()));
  CHECK(pm["attributes"].size() == 4);
  CHECK(pm["schema_version"] == 2);

  Json reg{{"schemas", {"schema.json"}}, {"models", {{{"model_id", "h"}, {"checkpoint", "h.json"}}}}};
  WriteSchemaFile(f.hivae->schema(), (dir / "schema.json").string());
  WriteFileText((dir / "registry.json").string(), reg.dump());
  const auto loaded = LoadRegistry(dir.string());
  CHECK(loaded->default_model() == "h");
  CHECK(loaded->List().size() == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("concurrent predictions match serial ones") {
  Fixture f;
  std::vector<std::string> bodies;
  for (int k = 0; k < 16; ++k) {
    bodies.push_back(Json{{"model_id", k % 2 ? "h" : "m"}, {"inputs", {{"r", 0.25 * k}}}}.dump());
  }
  std::vector<std::string> serial;
  for (const auto& b : bodies) serial.push_back(WithoutTiming(f.service.Predict(b).body));
  std::vector<std::string> parallel(bodies.size());
  std::vector<std::thread> threads;
  for (int w = 0; w < 4; ++w) {
    threads.emplace_back([&, w] {
      for (size_t k = w; k < bodies.size(); k += 4) {
        parallel[k] = WithoutTiming(f.service.Predict(bodies[k]).body);
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(parallel == serial);
}

TEST_CASE("service over http") {
  Fixture f;
  httplib::Server server;
  f.service.Mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto pred = client.Post("/v1/predict", Json{{"model_id", "h"}}.dump(), "application/json");
  REQUIRE(pred);
  CHECK(pred->status == 200);
  CHECK(Json::parse(pred->body)["attributes"].size() == 5);
  auto missing = client.Get("/v1/unknown");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(Json::parse(missing->body)["code"] == "NotFound");
  server.stop();
  th.join();
}

}  // namespace
}  // namespace vhgm
