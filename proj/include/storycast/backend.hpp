// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// The single seam between the engine and every external model: TTS, sound
// and music generation, text embedding, forced alignment, MOS prediction,
// speaker-embedding extraction and the judge/planner chat model.

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "storycast/acms.hpp"
#include "storycast/audio.hpp"
#include "storycast/cues.hpp"
#include "storycast/prosody.hpp"

namespace storycast {

inline constexpr int kProtocolVersion = 1;

struct SynthesisRequest {
  std::string model_id;
  std::string text;
  std::string language;
  // Conditioning mode: exactly one of these is set.
  std::optional<std::string> reference_audio;
  std::optional<std::string> description;
  std::optional<SpeakerEmbedding> speaker_embedding;
  std::vector<std::string> paralinguistic_tokens;
};

struct Capabilities {
  int protocol_version = kProtocolVersion;
  std::string backend_id;
  std::vector<std::string> endpoints;
  std::size_t embed_dimension = 0;
  int sample_rate = kDefaultSampleRate;
  std::vector<ModelProfile> models;

  bool has_endpoint(std::string_view name) const;
};

// Registry assembled from the profiles a backend advertises.
ModelRegistry registry_from(const Capabilities& caps);

class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string id() const = 0;
  virtual Capabilities capabilities() = 0;

  virtual Clip synthesize(const SynthesisRequest& request) = 0;
  virtual Clip generate_audio(const std::string& prompt, double duration, CueKind kind) = 0;
  virtual std::vector<double> embed(const std::string& text) = 0;
  virtual AlignmentResult align(const std::vector<std::string>& words, const Clip& clip) = 0;
  virtual double predict_mos(const Clip& clip) = 0;
  virtual std::string judge(const std::string& prompt, const std::vector<std::string>& attachments,
                            const std::string& session_id) = 0;
  virtual SpeakerEmbedding speaker_embed(const std::string& model_id, const Clip& clip) = 0;
};

// Endpoint names, shared by the wire protocol and the trace log.
namespace endpoint {
inline constexpr const char* kCapabilities = "capabilities";
inline constexpr const char* kSynthesize = "synthesize";
inline constexpr const char* kGenerateAudio = "generate_audio";
inline constexpr const char* kEmbed = "embed";
inline constexpr const char* kAlign = "align";
inline constexpr const char* kMos = "mos";
inline constexpr const char* kJudge = "judge";
inline constexpr const char* kSpeakerEmbed = "speaker_embed";
}  // namespace endpoint

}  // namespace storycast
