// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Backend decorators (tracing, per-endpoint routing), trace replay and the
// bounded worker helper used by the orchestrator.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "storycast/backend.hpp"

namespace storycast {

struct TraceRecord {
  std::uint64_t seq = 0;
  std::string backend_id;
  std::string endpoint;
  std::string request_digest;   // sha256 of the compact wire request
  std::string response_digest;  // sha256 of the compact wire response; empty on error
  double latency_ms = 0.0;
  std::string error;
  nlohmann::json request;       // null unless payloads are recorded

  nlohmann::json to_json() const;
  static TraceRecord from_json(const nlohmann::json& j);
};

// Thread-safe append-only log, optionally mirrored to a JSONL file.
class TraceLog {
 public:
  explicit TraceLog(bool record_payloads = true) : record_payloads_(record_payloads) {}
  void open(const std::filesystem::path& path);

  void append(TraceRecord record);
  std::vector<TraceRecord> records() const;
  bool record_payloads() const { return record_payloads_; }

  static std::vector<TraceRecord> load(const std::filesystem::path& path);

 private:
  mutable std::mutex mutex_;
  bool record_payloads_;
  std::uint64_t next_seq_ = 0;
  std::vector<TraceRecord> records_;
  std::ofstream file_;
};

// Routes every call through the wire encoding so the digests are exactly
// those a remote peer would see.
class TracingBackend : public Backend {
 public:
  TracingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<TraceLog> log);

  std::string id() const override { return inner_->id(); }
  Capabilities capabilities() override;
  Clip synthesize(const SynthesisRequest& request) override;
  Clip generate_audio(const std::string& prompt, double duration, CueKind kind) override;
  std::vector<double> embed(const std::string& text) override;
  AlignmentResult align(const std::vector<std::string>& words, const Clip& clip) override;
  double predict_mos(const Clip& clip) override;
  std::string judge(const std::string& prompt, const std::vector<std::string>& attachments,
                    const std::string& session_id) override;
  SpeakerEmbedding speaker_embed(const std::string& model_id, const Clip& clip) override;

 private:
  nlohmann::json traced(const char* endpoint, const nlohmann::json& request);

  std::shared_ptr<Backend> inner_;
  std::shared_ptr<TraceLog> log_;
};

// Sends each endpoint to its configured backend, falling back to `fallback`.
class RoutingBackend : public Backend {
 public:
  RoutingBackend(std::shared_ptr<Backend> fallback, std::map<std::string, std::shared_ptr<Backend>> routes = {});

  std::string id() const override { return "routing"; }
  // Endpoints are the union over routes; models come from the synthesize route.
  Capabilities capabilities() override;
  Clip synthesize(const SynthesisRequest& request) override;
  Clip generate_audio(const std::string& prompt, double duration, CueKind kind) override;
  std::vector<double> embed(const std::string& text) override;
  AlignmentResult align(const std::vector<std::string>& words, const Clip& clip) override;
  double predict_mos(const Clip& clip) override;
  std::string judge(const std::string& prompt, const std::vector<std::string>& attachments,
                    const std::string& session_id) override;
  SpeakerEmbedding speaker_embed(const std::string& model_id, const Clip& clip) override;

  Backend& route(std::string_view endpoint) const;

 private:
  std::shared_ptr<Backend> fallback_;
  std::map<std::string, std::shared_ptr<Backend>, std::less<>> routes_;
};

struct ReplayMismatch {
  std::uint64_t seq;
  std::string endpoint;
  std::string expected;
  std::string actual;
};

// Re-issues every recorded request in seq order and compares response
// digests. Records without payloads are reported as mismatches.
std::vector<ReplayMismatch> replay_trace(const std::vector<TraceRecord>& records, Backend& backend);

// Runs fn(0..n-1) on at most `bound` threads. If any call throws, the
// exception of the lowest failing index is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t bound, const std::function<void(std::size_t)>& fn);

inline constexpr std::size_t kDefaultParallelism = 4;

}  // namespace storycast
