// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <set>
#include <thread>

#include "httplib.h"
#include "storycast/error.hpp"
#include "storycast/http.hpp"
#include "storycast/mock_backend.hpp"
#include "storycast/wire.hpp"

namespace storycast {
namespace {

using nlohmann::json;
using namespace std::chrono_literals;

HttpOptions options_for(const std::string& url, std::string token = {}) {
  HttpOptions o;
  o.base_url = url;
  o.bearer_token = std::move(token);
  o.timeout = 5s;
  o.retries = 2;
  o.backoff = 1ms;
  return o;
}

// Raw server for fault injection: answers each request with the next scripted
// status and records the headers it saw.
class ScriptedServer {
 public:
  ScriptedServer(std::vector<int> statuses, json ok_body) : statuses_(std::move(statuses)), ok_(std::move(ok_body)) {
    server_.Post(R"(/v1/([a-z_]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      keys_.push_back(req.get_header_value("Idempotency-Key"));
      bodies_.push_back(req.body);
      int status = calls_ < statuses_.size() ? statuses_[calls_] : statuses_.back();
      ++calls_;
      res.status = status;
      json body = status == 200 ? ok_
                  : status < 500 ? wire::error_body("invalid_request", "bad")
                                 : wire::error_body("backend_unavailable", "busy");
      res.set_content(body.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }
  std::vector<std::string> keys() const {
    std::lock_guard lock(mutex_);
    return keys_;
  }
  std::vector<std::string> bodies() const {
    std::lock_guard lock(mutex_);
    return bodies_;
  }

 private:
  httplib::Server server_;
  std::vector<int> statuses_;
  json ok_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
  std::vector<std::string> keys_;
  std::vector<std::string> bodies_;
  int port_ = 0;
  std::thread thread_;
};

class MockServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    JudgeFixtures f;
    f.sessions["s1"] = {"first", "second"};
    mock_ = std::make_unique<MockBackend>(7, ModelRegistry::defaults(), f);
    server_ = std::make_unique<ProtocolServer>(*mock_);
    server_->start();
  }

  std::unique_ptr<MockBackend> mock_;
  std::unique_ptr<ProtocolServer> server_;
};

TEST_F(MockServerTest, ClientMatchesInProcessMock) {
  HttpBackend client(options_for(server_->url()));
  MockBackend local(7);
  EXPECT_EQ(client.capabilities().models, local.capabilities().models);

  SynthesisRequest r;
  r.model_id = "f5-tts";
  r.text = "a cold wind crossed the moor";
  r.language = "en";
  r.reference_audio = "narrator.wav";
  EXPECT_EQ(client.synthesize(r), local.synthesize(r));
  EXPECT_EQ(client.generate_audio("gull cry", 0.5, CueKind::kSfx), local.generate_audio("gull cry", 0.5, CueKind::kSfx));
  EXPECT_EQ(client.embed("quiet dread"), local.embed("quiet dread"));
  Clip clip = sine_tone(330, 0.4, 12000, 24000);
  EXPECT_EQ(client.align({"one", "two", "three"}, clip), local.align({"one", "two", "three"}, clip));
  EXPECT_EQ(client.predict_mos(clip), local.predict_mos(clip));
  EXPECT_EQ(client.speaker_embed("cosyvoice2", clip), local.speaker_embed("cosyvoice2", clip));
  EXPECT_EQ(client.judge("p", {"a.wav"}, "s1"), "first");
  EXPECT_EQ(client.judge("p", {"a.wav"}, "s1"), "second");
}

TEST_F(MockServerTest, ErrorMapping) {
  HttpBackend client(options_for(server_->url()));
  SynthesisRequest r;
  r.model_id = "f5-tts";
  r.text = "x";
  r.language = "en";
  r.speaker_embedding = SpeakerEmbedding{std::vector<double>(32, 0.1), "f5-tts"};
  EXPECT_THROW(client.synthesize(r), ModeUnsupported);
  EXPECT_THROW(client.call("embed", json::object()), InvalidArgument);
  EXPECT_THROW(client.generate_audio("x", -2.0, CueKind::kBgm), InvalidArgument);
  try {
    client.call("teleport", json::object());
    FAIL();
  } catch (const BackendUnavailable& e) {
    EXPECT_NE(std::string(e.what()).find("404"), std::string::npos);
  }
  try {
    client.judge("p", {}, "unknown-session");
    FAIL();
  } catch (const BackendUnavailable& e) {
    EXPECT_NE(std::string(e.what()).find("503"), std::string::npos);
  }
}

TEST_F(MockServerTest, HealthEndpoint) {
  httplib::Client c("127.0.0.1", server_->port());
  auto res = c.Get("/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["protocol_version"], 1);
}

TEST(HttpAuth, BearerTokenRequired) {
  MockBackend mock;
  ProtocolServer server(mock, "s3cret");
  server.start();
  HttpBackend good(options_for(server.url(), "s3cret"));
  EXPECT_EQ(good.embed("x").size(), 64u);
  HttpBackend none(options_for(server.url()));
  EXPECT_THROW(none.embed("x"), BackendUnavailable);
  HttpBackend wrong(options_for(server.url(), "guess"));
  try {
    wrong.capabilities();
    FAIL();
  } catch (const BackendUnavailable& e) {
    EXPECT_NE(std::string(e.what()).find("401"), std::string::npos);
  }
}

TEST(HttpRetry, RetriesTransientFailuresWithStableKey) {
  json ok = {{"embedding", std::vector<double>{1.0, 0.0}}, {"dimension", 2}};
  ScriptedServer server({503, 500, 200}, ok);
  HttpBackend client(options_for(server.url()));
  EXPECT_EQ(client.embed("hello"), (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(server.calls(), 3u);
  auto keys = server.keys();
  EXPECT_EQ(std::set<std::string>(keys.begin(), keys.end()).size(), 1u);
  EXPECT_EQ(keys[0], idempotency_key("embed", server.bodies()[0]));
  EXPECT_EQ(keys[0].size(), 64u);
}

TEST(HttpRetry, GivesUpAfterBudget) {
  ScriptedServer server({503}, json::object());
  auto o = options_for(server.url());
  o.retries = 1;
  HttpBackend client(o);
  EXPECT_THROW(client.embed("x"), BackendUnavailable);
  EXPECT_EQ(server.calls(), 2u);
}

TEST(HttpRetry, ClientErrorsAreNotRetried) {
  ScriptedServer server({400}, json::object());
  HttpBackend client(options_for(server.url()));
  EXPECT_THROW(client.embed("x"), InvalidArgument);
  EXPECT_EQ(server.calls(), 1u);
}

TEST(HttpRetry, SchemaViolatingResponseIsBackendError) {
  ScriptedServer server({200}, json{{"embedding", "not a vector"}});
  HttpBackend client(options_for(server.url()));
  EXPECT_THROW(client.embed("x"), BackendUnavailable);
}

TEST(HttpClient, ConnectionRefusedAndBadUrl) {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto o = options_for("http://127.0.0.1:" + std::to_string(port));
  o.retries = 1;
  o.timeout = 200ms;
  EXPECT_THROW(HttpBackend(o).embed("x"), BackendUnavailable);
  EXPECT_THROW(HttpBackend(options_for("localhost:80")), ConfigError);
}

TEST(IdempotencyKey, DependsOnEndpointAndBody) {
  EXPECT_EQ(idempotency_key("embed", "{}"), idempotency_key("embed", "{}"));
  EXPECT_NE(idempotency_key("embed", "{}"), idempotency_key("mos", "{}"));
  EXPECT_NE(idempotency_key("embed", "{}"), idempotency_key("embed", "{ }"));
}

}  // namespace
}  // namespace storycast
