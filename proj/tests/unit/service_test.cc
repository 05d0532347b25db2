// Copyright 2026 The guidedgen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "guidedgen/service.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "guidedgen/experiment.h"
#include "guidedgen/http_server.h"

namespace guidedgen {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Per-process scratch root, removed at exit.
const fs::path& scratch_root() {
  static const struct Root {
    fs::path path = fs::temp_directory_path() /
                    ("guidedgen-service-" + std::to_string(::getpid()));
    ~Root() {
      std::error_code ec;
      fs::remove_all(path, ec);
    }
  } root;
  return root.path;
}

fs::path scratch(const std::string& name) {
  const auto dir = scratch_root() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Models trained once per process from a small synthetic workspace.
fs::path models_dir() {
  static const fs::path dir = [] {
    SyntheticOptions options;
    options.pairs = 120;
    options.attribute_records = 200;
    const auto spec = ExperimentSpec::load(write_demo_workspace(scratch("world"), options));
    cmd_train(spec);
    return spec.models_dir();
  }();
  return dir;
}

std::shared_ptr<const ModelRegistry> registry() {
  static const auto r =
      std::make_shared<const ModelRegistry>(ModelRegistry::load(models_dir()));
  return r;
}

json request(json weights, std::uint64_t seed = 7) {
  return {{"model", "base"},
          {"prompt", "you are all stupid idiots"},
          {"weights", std::move(weights)},
          {"overrides", {{"num_samples", 3}, {"max_new_tokens", 30}}},
          {"seed", seed}};
}

std::vector<std::string> digests(const json& body) {
  std::vector<std::string> out;
  for (const auto& c : body.at("candidates")) out.push_back(c.at("digest"));
  return out;
}

TEST(ControlServiceTest, ListsModelsAndPresets) {
  ControlService service(registry(), nullptr);
  const auto r = service.handle_models();
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body.at("schema"), kApiSchema);
  std::map<std::string, std::string> kinds;
  for (const auto& m : r.body.at("models")) kinds[m.at("name")] = m.at("kind");
  EXPECT_EQ(kinds, (std::map<std::string, std::string>{
                       {"base", "base"}, {"polite", "attribute"},
                       {"detox", "attribute"}, {"joy", "attribute"}}));
  EXPECT_EQ(r.body.at("registry"), registry()->fingerprint());
  json triple;
  for (const auto& p : r.body.at("presets")) {
    if (p.at("name") == "triple") triple = p.at("weights");
  }
  EXPECT_EQ(triple, (json{{"polite", 0.3}, {"detox", 0.3}, {"emotion", 0.4}}));
}

TEST(ControlServiceTest, EmptyRegistryListsNothing) {
  ControlService service(std::make_shared<const ModelRegistry>(), nullptr);
  const auto r = service.handle_models();
  ASSERT_EQ(r.status, 200);
  EXPECT_TRUE(r.body.at("models").empty());
}

TEST(ControlServiceTest, EmptyWeightsAreUncontrolled) {
  ControlService service(registry(), nullptr);
  const auto r = service.handle_generate(request(json::object()));
  ASSERT_EQ(r.status, 200) << r.body.dump();
  ASSERT_EQ(r.body.at("candidates").size(), 3u);
  for (const auto& c : r.body.at("candidates")) {
    EXPECT_TRUE(c.at("mean_posteriors").empty());
    EXPECT_EQ(c.at("scores").size(), 3u);
  }
}

TEST(ControlServiceTest, TripleWeightsEchoedVerbatim) {
  ControlService service(registry(), nullptr);
  const json weights{{"joy", 0.4}, {"polite", 0.3}, {"detox", 0.3}};
  const auto r = service.handle_generate(request(weights));
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body.at("weights"), weights);
  EXPECT_EQ(r.body.at("seed"), 7);
  EXPECT_EQ(r.body.at("generation").at("num_samples"), 3);
  for (const auto& c : r.body.at("candidates")) {
    EXPECT_EQ(c.at("mean_posteriors").size(), 3u);
  }
}

TEST(ControlServiceTest, NegativeWeightNamesTheAttribute) {
  ControlService service(registry(), nullptr);
  const auto r = service.handle_generate(request({{"joy", -1}}));
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body.at("error").at("field"), "joy");
  EXPECT_EQ(r.body.at("error").at("code"), "invalid_argument");
}

TEST(ControlServiceTest, UnknownModelAndAttributeAreNotFound) {
  ControlService service(registry(), nullptr);
  auto bad_model = request(json::object());
  bad_model["model"] = "gpt";
  EXPECT_EQ(service.handle_generate(bad_model).status, 404);
  const auto r = service.handle_generate(request({{"hope", 1.0}}));
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(r.body.at("error").at("field"), "hope");
}

TEST(ControlServiceTest, RejectsBadRequests) {
  ControlService service(registry(), nullptr);
  auto check = [&](json req, const std::string& field) {
    const auto r = service.handle_generate(req);
    EXPECT_EQ(r.status, 400) << req.dump();
    EXPECT_EQ(r.body.at("error").at("field"), field) << r.body.dump();
  };
  check(json::array(), "body");
  auto r = request(json::object());
  r["schema"] = "guidedgen/0";
  check(r, "schema");
  r = request(json::object());
  r.erase("prompt");
  check(r, "prompt");
  r = request(json::object());
  r["prompt"] = "   ";
  check(r, "prompt");
  r = request(json::object());
  r["seed"] = -3;
  check(r, "seed");
  r = request(json::object());
  r["overrides"] = {{"top_q", 3}};
  check(r, "overrides.top_q");
  r = request(json::object());
  r["overrides"] = {{"max_new_tokens", 401}};
  check(r, "overrides.max_new_tokens");
  r = request(json::object());
  r["overrides"] = {{"num_samples", 33}};
  check(r, "overrides.num_samples");
}

TEST(ControlServiceTest, ScoreMatchesGenerateScores) {
  ControlService service(registry(), nullptr);
  const auto g = service.handle_generate(request({{"polite", 1.0}}));
  ASSERT_EQ(g.status, 200);
  for (const auto& c : g.body.at("candidates")) {
    const auto s = service.handle_score({{"text", c.at("text")}});
    ASSERT_EQ(s.status, 200);
    EXPECT_EQ(s.body.at("scores"), c.at("scores"));
  }
}

TEST(ControlServiceTest, ScoreSubsetsAndErrors) {
  ControlService service(registry(), nullptr);
  const auto s = service.handle_score({{"text", ""}, {"attributes", {"joy"}}});
  ASSERT_EQ(s.status, 200);
  ASSERT_EQ(s.body.at("scores").size(), 1u);
  EXPECT_DOUBLE_EQ(s.body.at("scores").at("joy").get<double>(),
                   registry()->find_attribute("joy")->score(""));
  const auto unknown = service.handle_score({{"text", "x"}, {"attributes", {"hope"}}});
  EXPECT_EQ(unknown.status, 404);
  EXPECT_EQ(unknown.body.at("error").at("field"), "hope");
  EXPECT_EQ(service.handle_score({{"text", 3}}).status, 400);
}

TEST(ControlServiceTest, SameSeedSameOutputAcrossRestart) {
  const auto req = request({{"detox", 1.0}, {"joy", 0.5}}, 1234);
  ControlService first(registry(), nullptr);
  const auto a = first.handle_generate(req);
  ControlService second(
      std::make_shared<const ModelRegistry>(ModelRegistry::load(models_dir())), nullptr);
  const auto b = second.handle_generate(req);
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(digests(a.body), digests(b.body));
  EXPECT_EQ(a.body.at("candidates"), b.body.at("candidates"));
  const auto c = first.handle_generate(request({{"detox", 1.0}, {"joy", 0.5}}, 1235));
  EXPECT_NE(digests(a.body), digests(c.body));
}

TEST(ControlServiceTest, MissingSeedComesFromSource) {
  ControlService service(registry(), nullptr);
  service.set_seed_source([] { return std::uint64_t{99}; });
  auto req = request(json::object());
  req.erase("seed");
  const auto r = service.handle_generate(req);
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body.at("seed"), 99);
  EXPECT_EQ(digests(r.body), digests(service.handle_generate(request(json::object(), 99)).body));
}

TEST(ControlServiceTest, DefaultSeedsFitInDoubles) {
  ControlService service(registry(), nullptr);
  auto req = request(json::object());
  req.erase("seed");
  for (int i = 0; i < 5; ++i) {
    const auto r = service.handle_generate(req);
    ASSERT_EQ(r.status, 200);
    EXPECT_LT(r.body.at("seed").get<std::uint64_t>(), std::uint64_t{1} << 53);
  }
}

TEST(ControlServiceTest, SessionsAreLoggedAndRetrievable) {
  const auto path = scratch("log") / "sessions.jsonl";
  auto log = std::make_shared<SessionLog>(path);
  ControlService service(registry(), log);
  const auto g = service.handle_generate(request({{"polite", 1.0}}));
  ASSERT_EQ(g.status, 200);
  EXPECT_EQ(g.body.at("session_id"), "s-1");
  const auto s = service.handle_session("s-1");
  ASSERT_EQ(s.status, 200);
  const auto& rec = s.body.at("session");
  EXPECT_EQ(rec.at("request").at("seed"), 7);
  EXPECT_EQ(rec.at("request").at("weights"), (json{{"polite", 1.0}}));
  EXPECT_EQ(rec.at("digests").get<std::vector<std::string>>(), digests(g.body));
  EXPECT_EQ(rec.at("registry"), registry()->fingerprint());
  EXPECT_EQ(service.handle_session("s-9").status, 404);

  // A reopened log keeps its records and continues the sequence.
  auto reopened = std::make_shared<SessionLog>(path);
  EXPECT_EQ(reopened->records().size(), 1u);
  ControlService again(registry(), reopened);
  EXPECT_EQ(again.handle_generate(request(json::object())).body.at("session_id"), "s-2");
}

TEST(ControlServiceTest, ReplayDetectsTampering) {
  const auto path = scratch("replay") / "sessions.jsonl";
  {
    auto log = std::make_shared<SessionLog>(path);
    ControlService service(registry(), log);
    ASSERT_EQ(service.handle_generate(request({{"joy", 1.0}}, 1)).status, 200);
    ASSERT_EQ(service.handle_generate(request(json::object(), 2)).status, 200);
    const auto report = replay_log(*log, service);
    EXPECT_EQ(report.sessions, 2u);
    EXPECT_EQ(report.candidates, 6u);
    EXPECT_TRUE(report.mismatched_sessions.empty());
  }
  std::ifstream in(path);
  std::vector<json> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(json::parse(line));
  in.close();
  lines[1]["digests"][0] = "0000000000000000";
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : lines) out << l.dump() << "\n";
  out.close();
  SessionLog tampered(path);
  ControlService service(registry(), nullptr);
  const auto report = replay_log(tampered, service);
  EXPECT_EQ(report.mismatched_sessions, std::vector<std::string>{"s-2"});
}

TEST(ControlServiceTest, ConcurrentGenerationsGetDistinctSessions) {
  auto log = std::make_shared<SessionLog>(scratch("concurrent") / "sessions.jsonl");
  ControlService service(registry(), log);
  const auto expected = digests(ControlService(registry(), nullptr)
                                    .handle_generate(request({{"polite", 1.0}}))
                                    .body);
  std::vector<std::thread> threads;
  std::vector<std::vector<std::string>> ids(4);
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 3; ++i) {
        const auto r = service.handle_generate(request({{"polite", 1.0}}));
        if (digests(r.body) != expected) ++mismatches;
        ids[static_cast<std::size_t>(t)].push_back(r.body.at("session_id"));
      }
    });
  }
  for (auto& th : threads) th.join();
  std::set<std::string> unique;
  for (const auto& v : ids) unique.insert(v.begin(), v.end());
  EXPECT_EQ(unique.size(), 12u);
  EXPECT_EQ(mismatches.load(), 0);
  EXPECT_EQ(SessionLog(log->path()).records().size(), 12u);
}

TEST(ServiceConfigTest, EnvironmentOverridesFile) {
  const auto dir = scratch("config");
  std::ofstream(dir / "service.json")
      << R"({"listen_address": "0.0.0.0", "port": 9000, "model_dir": "m", "log_path": "l.jsonl"})";
  auto cfg = ServiceConfig::load(dir / "service.json");
  EXPECT_EQ(cfg.port, 9000);
  EXPECT_EQ(cfg.model_dir, dir / "m");
  const std::map<std::string, std::string> env{{"GUIDEDGEN_PORT", "9100"},
                                               {"GUIDEDGEN_LOG_PATH", "/tmp/x.jsonl"}};
  cfg.apply_environment([&](const char* name) -> const char* {
    const auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  EXPECT_EQ(cfg.port, 9100);
  EXPECT_EQ(cfg.log_path, "/tmp/x.jsonl");
  EXPECT_EQ(cfg.listen_address, "0.0.0.0");
  EXPECT_THROW(cfg.apply_environment([](const char* name) -> const char* {
                 return std::string(name) == "GUIDEDGEN_PORT" ? "80a" : nullptr;
               }),
               Error);
}

TEST(HttpServerTest, ServesTheApi) {
  auto log = std::make_shared<SessionLog>(scratch("http") / "sessions.jsonl");
  auto service = std::make_shared<ControlService>(registry(), log);
  HttpServer server(service, 2);
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread loop([&] { server.serve(); });
  httplib::Client client("127.0.0.1", port);

  auto models = client.Get("/models");
  ASSERT_TRUE(models);
  EXPECT_EQ(models->status, 200);
  EXPECT_EQ(models->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(json::parse(models->body).at("models").size(), 4u);

  auto gen = client.Post("/generate", request({{"polite", 1.0}}).dump(), "application/json");
  ASSERT_TRUE(gen);
  EXPECT_EQ(gen->status, 200);
  const auto body = json::parse(gen->body);
  EXPECT_EQ(body.at("session_id"), "s-1");

  auto session = client.Get("/sessions/s-1");
  ASSERT_TRUE(session);
  EXPECT_EQ(session->status, 200);
  EXPECT_EQ(json::parse(session->body).at("session").at("digests").size(), 3u);
  EXPECT_EQ(client.Get("/sessions/s-404")->status, 404);

  auto score = client.Post("/score", R"({"text": "thank you"})", "application/json");
  ASSERT_TRUE(score);
  EXPECT_EQ(score->status, 200);

  auto bad = client.Post("/generate", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body).at("error").at("field"), "body");

  auto options = client.Options("/generate");
  ASSERT_TRUE(options);
  EXPECT_LT(options->status, 300);
  EXPECT_FALSE(options->get_header_value("Access-Control-Allow-Methods").empty());

  server.stop();
  loop.join();
  EXPECT_FALSE(server.running());
}

}  // namespace
}  // namespace guidedgen
