// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// HTTP transport for the wire protocol: a Backend client and a server that
// exposes any Backend (usually the mock) under /v1/*.

#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "json.hpp"
#include "storycast/backend.hpp"

namespace httplib {
class Server;
}

namespace storycast {

struct HttpOptions {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"
  std::string bearer_token;
  std::chrono::milliseconds timeout{120000};
  int retries = 2;
  std::chrono::milliseconds backoff{250};  // doubled after every failed attempt
};

// Client. Safe for concurrent use: each call opens its own connection.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpOptions options);

  std::string id() const override;
  Capabilities capabilities() override;
  Clip synthesize(const SynthesisRequest& request) override;
  Clip generate_audio(const std::string& prompt, double duration, CueKind kind) override;
  std::vector<double> embed(const std::string& text) override;
  AlignmentResult align(const std::vector<std::string>& words, const Clip& clip) override;
  double predict_mos(const Clip& clip) override;
  std::string judge(const std::string& prompt, const std::vector<std::string>& attachments,
                    const std::string& session_id) override;
  SpeakerEmbedding speaker_embed(const std::string& model_id, const Clip& clip) override;

  // POST /v1/<endpoint> with retries; validates the response schema.
  nlohmann::json call(std::string_view endpoint, const nlohmann::json& request);

 private:
  nlohmann::json get_capabilities();

  HttpOptions options_;
  std::string backend_id_;
};

// Key sent as Idempotency-Key on every POST: sha256 of endpoint and body.
std::string idempotency_key(std::string_view endpoint, std::string_view body);

class ProtocolServer {
 public:
  // `backend` must outlive the server. An empty token disables auth.
  explicit ProtocolServer(Backend& backend, std::string bearer_token = {});
  ~ProtocolServer();
  ProtocolServer(const ProtocolServer&) = delete;
  ProtocolServer& operator=(const ProtocolServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();
  int port() const { return port_; }
  std::string url() const;

 private:
  void install_routes();

  Backend& backend_;
  std::string token_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = 0;
};

}  // namespace storycast
