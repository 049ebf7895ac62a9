// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include "storycast/trace.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <thread>

#include "storycast/digest.hpp"
#include "storycast/error.hpp"
#include "storycast/wire.hpp"

namespace storycast {

using nlohmann::json;

json TraceRecord::to_json() const {
  json j = {{"seq", seq},
            {"backend_id", backend_id},
            {"endpoint", endpoint},
            {"request_digest", request_digest},
            {"response_digest", response_digest},
            {"latency_ms", latency_ms}};
  if (!error.empty()) j["error"] = error;
  if (!request.is_null()) j["request"] = request;
  return j;
}

TraceRecord TraceRecord::from_json(const json& j) {
  TraceRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  r.backend_id = j.at("backend_id").get<std::string>();
  r.endpoint = j.at("endpoint").get<std::string>();
  r.request_digest = j.at("request_digest").get<std::string>();
  r.response_digest = j.at("response_digest").get<std::string>();
  r.latency_ms = j.value("latency_ms", 0.0);
  r.error = j.value("error", std::string());
  if (j.contains("request")) r.request = j["request"];
  return r;
}

void TraceLog::open(const std::filesystem::path& path) {
  std::lock_guard lock(mutex_);
  file_.open(path, std::ios::trunc);
  if (!file_) throw IoError("cannot write trace " + path.string());
}

void TraceLog::append(TraceRecord record) {
  std::lock_guard lock(mutex_);
  record.seq = next_seq_++;
  if (!record_payloads_) record.request = nullptr;
  if (file_.is_open()) {
    file_ << record.to_json().dump() << '\n';
    file_.flush();
  }
  records_.push_back(std::move(record));
}

std::vector<TraceRecord> TraceLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<TraceRecord> TraceLog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace " + path.string());
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(TraceRecord::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw SchemaViolation(path.string() + ":" + std::to_string(lineno), e.what());
    }
  }
  return out;
}

TracingBackend::TracingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<TraceLog> log)
    : inner_(std::move(inner)), log_(std::move(log)) {}

json TracingBackend::traced(const char* endpoint, const json& request) {
  TraceRecord rec;
  rec.backend_id = inner_->id();
  rec.endpoint = endpoint;
  rec.request_digest = sha256_hex(request.dump());
  rec.request = request;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    json response = wire::dispatch(*inner_, endpoint, request);
    rec.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    rec.response_digest = sha256_hex(response.dump());
    log_->append(std::move(rec));
    return response;
  } catch (const std::exception& e) {
    rec.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    rec.error = e.what();
    log_->append(std::move(rec));
    throw;
  }
}

Capabilities TracingBackend::capabilities() {
  return wire::capabilities_from(traced(endpoint::kCapabilities, json::object()));
}

Clip TracingBackend::synthesize(const SynthesisRequest& request) {
  return wire::audio_from(traced(endpoint::kSynthesize, wire::synthesize_request(request))["audio"]);
}

Clip TracingBackend::generate_audio(const std::string& prompt, double duration, CueKind kind) {
  return wire::audio_from(traced(endpoint::kGenerateAudio, wire::generate_audio_request(prompt, duration, kind))["audio"]);
}

std::vector<double> TracingBackend::embed(const std::string& text) {
  return traced(endpoint::kEmbed, wire::embed_request(text))["embedding"].get<std::vector<double>>();
}

AlignmentResult TracingBackend::align(const std::vector<std::string>& words, const Clip& clip) {
  return wire::alignment_from(traced(endpoint::kAlign, wire::align_request(words, clip)));
}

double TracingBackend::predict_mos(const Clip& clip) {
  return traced(endpoint::kMos, wire::mos_request(clip))["mos"].get<double>();
}

std::string TracingBackend::judge(const std::string& prompt, const std::vector<std::string>& attachments,
                                  const std::string& session_id) {
  return traced(endpoint::kJudge, wire::judge_request(prompt, attachments, session_id))["response"].get<std::string>();
}

SpeakerEmbedding TracingBackend::speaker_embed(const std::string& model_id, const Clip& clip) {
  return wire::speaker_embedding_from(
      traced(endpoint::kSpeakerEmbed, wire::speaker_embed_request(model_id, clip))["speaker_embedding"]);
}

RoutingBackend::RoutingBackend(std::shared_ptr<Backend> fallback, std::map<std::string, std::shared_ptr<Backend>> routes)
    : fallback_(std::move(fallback)), routes_(routes.begin(), routes.end()) {
  if (!fallback_) throw ConfigError("routing backend needs a fallback backend");
}

Backend& RoutingBackend::route(std::string_view endpoint) const {
  auto it = routes_.find(endpoint);
  return it == routes_.end() ? *fallback_ : *it->second;
}

Capabilities RoutingBackend::capabilities() {
  Capabilities caps = route(endpoint::kSynthesize).capabilities();
  caps.backend_id = id();
  caps.endpoints.clear();
  for (const char* ep : {endpoint::kSynthesize, endpoint::kGenerateAudio, endpoint::kEmbed, endpoint::kAlign,
                         endpoint::kMos, endpoint::kJudge, endpoint::kSpeakerEmbed}) {
    if (route(ep).capabilities().has_endpoint(ep)) caps.endpoints.push_back(ep);
  }
  caps.embed_dimension = route(endpoint::kEmbed).capabilities().embed_dimension;
  return caps;
}

Clip RoutingBackend::synthesize(const SynthesisRequest& request) { return route(endpoint::kSynthesize).synthesize(request); }

Clip RoutingBackend::generate_audio(const std::string& prompt, double duration, CueKind kind) {
  return route(endpoint::kGenerateAudio).generate_audio(prompt, duration, kind);
}

std::vector<double> RoutingBackend::embed(const std::string& text) { return route(endpoint::kEmbed).embed(text); }

AlignmentResult RoutingBackend::align(const std::vector<std::string>& words, const Clip& clip) {
  return route(endpoint::kAlign).align(words, clip);
}

double RoutingBackend::predict_mos(const Clip& clip) { return route(endpoint::kMos).predict_mos(clip); }

std::string RoutingBackend::judge(const std::string& prompt, const std::vector<std::string>& attachments,
                                  const std::string& session_id) {
  return route(endpoint::kJudge).judge(prompt, attachments, session_id);
}

SpeakerEmbedding RoutingBackend::speaker_embed(const std::string& model_id, const Clip& clip) {
  return route(endpoint::kSpeakerEmbed).speaker_embed(model_id, clip);
}

std::vector<ReplayMismatch> replay_trace(const std::vector<TraceRecord>& records, Backend& backend) {
  std::vector<const TraceRecord*> ordered;
  for (const auto& r : records) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->seq < b->seq; });

  std::vector<ReplayMismatch> out;
  for (const TraceRecord* r : ordered) {
    if (r->request.is_null()) {
      out.push_back({r->seq, r->endpoint, r->response_digest, "<no payload recorded>"});
      continue;
    }
    std::string actual;
    try {
      actual = sha256_hex(wire::dispatch(backend, r->endpoint, r->request).dump());
    } catch (const std::exception&) {
      actual.clear();
    }
    if (actual != r->response_digest) out.push_back({r->seq, r->endpoint, r->response_digest, actual});
  }
  return out;
}

void parallel_for(std::size_t n, std::size_t bound, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  bound = std::max<std::size_t>(1, std::min(bound, n));
  if (bound == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::size_t failed_index = n;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      {
        std::lock_guard lock(mutex);
        if (failure && i > failed_index) return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < bound; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace storycast
