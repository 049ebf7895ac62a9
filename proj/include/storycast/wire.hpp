// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Version 1 of the HTTP/JSON backend protocol: request/response encodings,
// schema validation shared by client, server and conformance tests, and a
// dispatcher that serves any Backend over the wire format.
//
// The field-by-field schemas are documented in docs/protocol.md.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "storycast/backend.hpp"

namespace storycast::wire {

using nlohmann::json;

json audio(const Clip& clip);
Clip audio_from(const json& j);

json speaker_embedding(const SpeakerEmbedding& e);
SpeakerEmbedding speaker_embedding_from(const json& j);

json synthesize_request(const SynthesisRequest& r);
SynthesisRequest synthesize_request_from(const json& j);
json generate_audio_request(const std::string& prompt, double duration, CueKind kind);
json embed_request(const std::string& text);
json align_request(const std::vector<std::string>& words, const Clip& clip);
json mos_request(const Clip& clip);
json judge_request(const std::string& prompt, const std::vector<std::string>& attachments,
                   const std::string& session_id);
json speaker_embed_request(const std::string& model_id, const Clip& clip);

json capabilities(const Capabilities& caps);
Capabilities capabilities_from(const json& j);

AlignmentResult alignment_from(const json& response);

// Empty result means the document conforms.
std::vector<std::string> validate_request(std::string_view endpoint, const json& body);
std::vector<std::string> validate_response(std::string_view endpoint, const json& body);

// Validates `request`, calls the matching Backend method, encodes the result.
// Throws InvalidArgument for schema failures; backend errors propagate.
json dispatch(Backend& backend, std::string_view endpoint, const json& request);

json error_body(std::string_view code, std::string_view message);

}  // namespace storycast::wire
