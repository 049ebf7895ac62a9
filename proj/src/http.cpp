// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include "storycast/http.hpp"

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "storycast/digest.hpp"
#include "storycast/error.hpp"
#include "storycast/wire.hpp"

namespace storycast {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host:port
  std::string prefix;  // path prefix without trailing '/'
};

SplitUrl split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("backend url '" + url + "' has no scheme");
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

[[noreturn]] void raise_for(int status, const std::string& body, std::string_view endpoint) {
  std::string code = "unknown";
  std::string message = body;
  try {
    auto j = json::parse(body);
    code = j.at("error").at("code").get<std::string>();
    message = j.at("error").at("message").get<std::string>();
  } catch (const json::exception&) {
  }
  std::string what = std::string(endpoint) + ": HTTP " + std::to_string(status) + " " + code + ": " + message;
  if (code == "mode_unsupported") throw ModeUnsupported(what);
  if (code == "invalid_request") throw InvalidArgument(what);
  throw BackendUnavailable(what);
}

bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }

}  // namespace

std::string idempotency_key(std::string_view endpoint, std::string_view body) {
  std::string material(endpoint);
  material.push_back('\n');
  material.append(body);
  return sha256_hex(material);
}

HttpBackend::HttpBackend(HttpOptions options) : options_(std::move(options)) {
  split_url(options_.base_url);  // validate early
  backend_id_ = "http:" + options_.base_url;
}

std::string HttpBackend::id() const { return backend_id_; }

json HttpBackend::call(std::string_view endpoint, const json& request) {
  const auto url = split_url(options_.base_url);
  const std::string path = url.prefix + "/v1/" + std::string(endpoint);
  const bool is_get = endpoint == endpoint::kCapabilities;
  const std::string body = is_get ? std::string() : request.dump();

  httplib::Headers headers;
  if (!options_.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + options_.bearer_token);
  if (!is_get) headers.emplace("Idempotency-Key", idempotency_key(endpoint, body));

  auto delay = options_.backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto res = is_get ? client.Get(path, headers) : client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = std::string(endpoint) + ": " + httplib::to_string(res.error());
      spdlog::warn("backend call {} failed (attempt {}): {}", path, attempt + 1, last_error);
      continue;
    }
    if (res->status == 200) {
      json parsed;
      try {
        parsed = json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw BackendUnavailable(std::string(endpoint) + ": response is not JSON: " + e.what());
      }
      auto problems = wire::validate_response(endpoint, parsed);
      if (!problems.empty()) {
        throw BackendUnavailable(std::string(endpoint) + ": response violates schema: " + problems.front());
      }
      return parsed;
    }
    if (!retryable(res->status)) raise_for(res->status, res->body, endpoint);
    last_error = std::string(endpoint) + ": HTTP " + std::to_string(res->status) + " " + res->body;
    spdlog::warn("backend call {} failed (attempt {}): HTTP {}", path, attempt + 1, res->status);
    if (attempt == options_.retries) raise_for(res->status, res->body, endpoint);
  }
  throw BackendUnavailable(last_error);
}

json HttpBackend::get_capabilities() {
  auto j = call(endpoint::kCapabilities, json::object());
  if (j["protocol_version"].get<int>() != kProtocolVersion) {
    throw BackendUnavailable("backend speaks protocol version " + std::to_string(j["protocol_version"].get<int>()) +
                             ", expected " + std::to_string(kProtocolVersion));
  }
  return j;
}

Capabilities HttpBackend::capabilities() { return wire::capabilities_from(get_capabilities()); }

Clip HttpBackend::synthesize(const SynthesisRequest& request) {
  return wire::audio_from(call(endpoint::kSynthesize, wire::synthesize_request(request))["audio"]);
}

Clip HttpBackend::generate_audio(const std::string& prompt, double duration, CueKind kind) {
  return wire::audio_from(call(endpoint::kGenerateAudio, wire::generate_audio_request(prompt, duration, kind))["audio"]);
}

std::vector<double> HttpBackend::embed(const std::string& text) {
  return call(endpoint::kEmbed, wire::embed_request(text))["embedding"].get<std::vector<double>>();
}

AlignmentResult HttpBackend::align(const std::vector<std::string>& words, const Clip& clip) {
  return wire::alignment_from(call(endpoint::kAlign, wire::align_request(words, clip)));
}

double HttpBackend::predict_mos(const Clip& clip) {
  return call(endpoint::kMos, wire::mos_request(clip))["mos"].get<double>();
}

std::string HttpBackend::judge(const std::string& prompt, const std::vector<std::string>& attachments,
                               const std::string& session_id) {
  return call(endpoint::kJudge, wire::judge_request(prompt, attachments, session_id))["response"].get<std::string>();
}

SpeakerEmbedding HttpBackend::speaker_embed(const std::string& model_id, const Clip& clip) {
  return wire::speaker_embedding_from(
      call(endpoint::kSpeakerEmbed, wire::speaker_embed_request(model_id, clip))["speaker_embedding"]);
}

ProtocolServer::ProtocolServer(Backend& backend, std::string bearer_token)
    : backend_(backend), token_(std::move(bearer_token)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

ProtocolServer::~ProtocolServer() { stop(); }

void ProtocolServer::install_routes() {
  auto reply = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto authorized = [this, reply](const httplib::Request& req, httplib::Response& res) {
    if (token_.empty()) return true;
    if (req.get_header_value("Authorization") == "Bearer " + token_) return true;
    reply(res, 401, wire::error_body("unauthorized", "missing or wrong bearer token"));
    return false;
  };
  auto serve = [this, reply](std::string_view endpoint, const json& request, httplib::Response& res) {
    const auto t0 = std::chrono::steady_clock::now();
    int status = 200;
    try {
      reply(res, 200, wire::dispatch(backend_, endpoint, request));
    } catch (const ModeUnsupported& e) {
      reply(res, status = 422, wire::error_body("mode_unsupported", e.what()));
    } catch (const InvalidArgument& e) {
      reply(res, status = 400, wire::error_body("invalid_request", e.what()));
    } catch (const json::exception& e) {
      reply(res, status = 400, wire::error_body("invalid_request", e.what()));
    } catch (const Error& e) {
      if (e.error_class() == ErrorClass::kBackend) {
        reply(res, status = 503, wire::error_body("backend_unavailable", e.what()));
      } else {
        reply(res, status = 400, wire::error_body("invalid_request", e.what()));
      }
    } catch (const std::exception& e) {
      reply(res, status = 500, wire::error_body("internal", e.what()));
    }
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    spdlog::info(R"({{"event":"request","endpoint":"{}","status":{},"latency_ms":{:.3f}}})", endpoint, status, ms);
  };

  server_->Get("/health", [reply](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}, {"protocol_version", kProtocolVersion}});
  });
  server_->Get("/v1/capabilities", [=, this](const httplib::Request& req, httplib::Response& res) {
    if (authorized(req, res)) serve(endpoint::kCapabilities, json::object(), res);
  });
  server_->Post(R"(/v1/([a-z_]+))", [=, this](const httplib::Request& req, httplib::Response& res) {
    if (!authorized(req, res)) return;
    const std::string endpoint = req.matches[1];
    json request;
    try {
      request = json::parse(req.body);
    } catch (const json::parse_error& e) {
      reply(res, 400, wire::error_body("invalid_request", std::string("body is not JSON: ") + e.what()));
      return;
    }
    const auto caps = backend_.capabilities();
    if (!caps.has_endpoint(endpoint)) {
      reply(res, 404, wire::error_body("endpoint_unsupported", "endpoint '" + endpoint + "' is not served"));
      return;
    }
    serve(endpoint, request, res);
  });
}

int ProtocolServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

bool ProtocolServer::listen(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  return server_->listen(host, port);
}

void ProtocolServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string ProtocolServer::url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace storycast
