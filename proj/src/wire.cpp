// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include "storycast/wire.hpp"

#include <cmath>

#include "storycast/digest.hpp"
#include "storycast/error.hpp"

namespace storycast::wire {

namespace {

// Tiny structural checker: each call appends a problem when the field is
// absent or has the wrong JSON type.
class Checker {
 public:
  Checker(const json& body, std::vector<std::string>& problems, std::string prefix = {})
      : body_(body), problems_(problems), prefix_(std::move(prefix)) {}

  bool object() {
    if (!body_.is_object()) problems_.push_back(path("") + " must be an object");
    return body_.is_object();
  }
  void string(const char* key, bool required = true) {
    check(key, required, [](const json& v) { return v.is_string(); }, "a string");
  }
  void number(const char* key, bool required = true) {
    check(key, required, [](const json& v) { return v.is_number(); }, "a number");
  }
  void integer(const char* key) {
    check(key, true, [](const json& v) { return v.is_number_integer(); }, "an integer");
  }
  void boolean(const char* key, bool required = true) {
    check(key, required, [](const json& v) { return v.is_boolean(); }, "a boolean");
  }
  void string_array(const char* key, bool required = true) {
    check(key, required, [](const json& v) {
      if (!v.is_array()) return false;
      for (const auto& x : v) if (!x.is_string()) return false;
      return true;
    }, "an array of strings");
  }
  void number_array(const char* key) {
    check(key, true, [](const json& v) {
      if (!v.is_array()) return false;
      for (const auto& x : v) if (!x.is_number()) return false;
      return true;
    }, "an array of numbers");
  }
  void audio(const char* key) {
    auto it = body_.find(key);
    if (it == body_.end()) {
      problems_.push_back(path(key) + " is required");
      return;
    }
    Checker sub(*it, problems_, path(key));
    if (!sub.object()) return;
    sub.string("wav_base64");
  }
  void speaker_embedding(const char* key, bool required) {
    auto it = body_.find(key);
    if (it == body_.end() || it->is_null()) {
      if (required) problems_.push_back(path(key) + " is required");
      return;
    }
    Checker sub(*it, problems_, path(key));
    if (!sub.object()) return;
    sub.number_array("values");
    sub.string("source_model");
  }
  const json* get(const char* key) const {
    auto it = body_.find(key);
    return it == body_.end() ? nullptr : &*it;
  }
  void fail(const std::string& msg) { problems_.push_back(prefix_ + msg); }

 private:
  template <typename Pred>
  void check(const char* key, bool required, Pred pred, const char* what) {
    auto it = body_.find(key);
    if (it == body_.end() || (!required && it->is_null())) {
      if (required) problems_.push_back(path(key) + " is required");
      return;
    }
    if (!pred(*it)) problems_.push_back(path(key) + " must be " + what);
  }
  std::string path(const char* key) const { return prefix_ + "/" + key; }

  const json& body_;
  std::vector<std::string>& problems_;
  std::string prefix_;
};

}  // namespace

json audio(const Clip& clip) {
  auto bytes = encode_wav(clip);
  return {{"wav_base64", base64_encode(bytes)}, {"sample_rate", clip.sample_rate}};
}

Clip audio_from(const json& j) {
  auto bytes = base64_decode(j.at("wav_base64").get<std::string>());
  return decode_wav(bytes);
}

json speaker_embedding(const SpeakerEmbedding& e) { return {{"values", e.values}, {"source_model", e.source_model}}; }

SpeakerEmbedding speaker_embedding_from(const json& j) {
  return {j.at("values").get<std::vector<double>>(), j.at("source_model").get<std::string>()};
}

json synthesize_request(const SynthesisRequest& r) {
  json j = {{"model_id", r.model_id},
            {"text", r.text},
            {"language", r.language},
            {"paralinguistic_tokens", r.paralinguistic_tokens}};
  if (r.reference_audio) j["reference_audio"] = *r.reference_audio;
  if (r.description) j["description"] = *r.description;
  if (r.speaker_embedding) j["speaker_embedding"] = speaker_embedding(*r.speaker_embedding);
  return j;
}

SynthesisRequest synthesize_request_from(const json& j) {
  SynthesisRequest r;
  r.model_id = j.at("model_id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.language = j.at("language").get<std::string>();
  r.paralinguistic_tokens = j.value("paralinguistic_tokens", std::vector<std::string>{});
  if (auto it = j.find("reference_audio"); it != j.end() && !it->is_null()) r.reference_audio = it->get<std::string>();
  if (auto it = j.find("description"); it != j.end() && !it->is_null()) r.description = it->get<std::string>();
  if (auto it = j.find("speaker_embedding"); it != j.end() && !it->is_null()) {
    r.speaker_embedding = speaker_embedding_from(*it);
  }
  return r;
}

json generate_audio_request(const std::string& prompt, double duration, CueKind kind) {
  return {{"prompt", prompt}, {"duration", duration}, {"kind", std::string(to_string(kind))}};
}

json embed_request(const std::string& text) { return {{"text", text}}; }

json align_request(const std::vector<std::string>& words, const Clip& clip) {
  return {{"words", words}, {"audio", audio(clip)}};
}

json mos_request(const Clip& clip) { return {{"audio", audio(clip)}}; }

json judge_request(const std::string& prompt, const std::vector<std::string>& attachments,
                   const std::string& session_id) {
  return {{"prompt", prompt}, {"attachments", attachments}, {"session_id", session_id}};
}

json speaker_embed_request(const std::string& model_id, const Clip& clip) {
  return {{"model_id", model_id}, {"audio", audio(clip)}};
}

json capabilities(const Capabilities& caps) {
  json models = json::array();
  for (const auto& m : caps.models) models.push_back(to_json(m));
  return {{"protocol_version", caps.protocol_version},
          {"backend_id", caps.backend_id},
          {"endpoints", caps.endpoints},
          {"embed_dimension", caps.embed_dimension},
          {"sample_rate", caps.sample_rate},
          {"models", std::move(models)}};
}

Capabilities capabilities_from(const json& j) {
  Capabilities caps;
  caps.protocol_version = j.at("protocol_version").get<int>();
  caps.backend_id = j.at("backend_id").get<std::string>();
  caps.endpoints = j.at("endpoints").get<std::vector<std::string>>();
  caps.embed_dimension = j.value("embed_dimension", std::size_t{0});
  caps.sample_rate = j.value("sample_rate", kDefaultSampleRate);
  const auto& models = j.at("models");
  for (std::size_t i = 0; i < models.size(); ++i) {
    caps.models.push_back(profile_from_json(models[i], "/models/" + std::to_string(i)));
  }
  return caps;
}

AlignmentResult alignment_from(const json& response) {
  AlignmentResult r;
  r.clip_duration = response.at("duration").get<double>();
  for (const auto& w : response.at("words")) {
    r.words.push_back({w.at("word").get<std::string>(), w.at("start").get<double>(), w.at("end").get<double>()});
  }
  return r;
}

std::vector<std::string> validate_request(std::string_view endpoint, const json& body) {
  std::vector<std::string> problems;
  Checker c(body, problems);
  if (!c.object()) return problems;

  if (endpoint == endpoint::kSynthesize) {
    c.string("model_id");
    c.string("text");
    c.string("language");
    c.string_array("paralinguistic_tokens", false);
    c.string("reference_audio", false);
    c.string("description", false);
    c.speaker_embedding("speaker_embedding", false);
    int modes = 0;
    for (const char* k : {"reference_audio", "description", "speaker_embedding"}) {
      if (const json* v = c.get(k); v && !v->is_null()) ++modes;
    }
    if (modes != 1) c.fail("exactly one of reference_audio, description, speaker_embedding is required");
  } else if (endpoint == endpoint::kGenerateAudio) {
    c.string("prompt");
    c.number("duration");
    c.string("kind");
    if (const json* k = c.get("kind"); k && k->is_string()) {
      auto s = k->get<std::string>();
      if (s != "sfx" && s != "ambiance" && s != "bgm") c.fail("/kind must be sfx, ambiance or bgm");
    }
  } else if (endpoint == endpoint::kEmbed) {
    c.string("text");
  } else if (endpoint == endpoint::kAlign) {
    c.string_array("words");
    c.audio("audio");
  } else if (endpoint == endpoint::kMos) {
    c.audio("audio");
  } else if (endpoint == endpoint::kJudge) {
    c.string("prompt");
    c.string_array("attachments");
    c.string("session_id");
  } else if (endpoint == endpoint::kSpeakerEmbed) {
    c.string("model_id");
    c.audio("audio");
  } else {
    problems.push_back("unknown endpoint '" + std::string(endpoint) + "'");
  }
  return problems;
}

std::vector<std::string> validate_response(std::string_view endpoint, const json& body) {
  std::vector<std::string> problems;
  Checker c(body, problems);
  if (!c.object()) return problems;

  if (endpoint == endpoint::kCapabilities) {
    c.integer("protocol_version");
    c.string("backend_id");
    c.string_array("endpoints");
    c.integer("embed_dimension");
    c.integer("sample_rate");
    const json* models = c.get("models");
    if (!models || !models->is_array()) {
      c.fail("/models must be an array");
    } else {
      for (std::size_t i = 0; i < models->size(); ++i) {
        Checker m((*models)[i], problems, "/models/" + std::to_string(i));
        if (!m.object()) continue;
        m.string("model_id");
        m.string_array("languages");
        m.integer("cloning_rank");
        m.integer("controllability_rank");
        m.boolean("supports_paralinguistics");
        m.boolean("supports_speaker_embedding");
        m.string_array("emotion_clone_languages");
      }
    }
  } else if (endpoint == endpoint::kSynthesize || endpoint == endpoint::kGenerateAudio) {
    c.audio("audio");
  } else if (endpoint == endpoint::kEmbed) {
    c.number_array("embedding");
    c.integer("dimension");
    const json* e = c.get("embedding");
    const json* d = c.get("dimension");
    if (e && d && e->is_array() && d->is_number_integer() && e->size() != d->get<std::size_t>()) {
      c.fail("/embedding length differs from /dimension");
    }
  } else if (endpoint == endpoint::kAlign) {
    c.number("duration");
    const json* words = c.get("words");
    if (!words || !words->is_array()) {
      c.fail("/words must be an array");
    } else {
      double prev_end = 0.0;
      for (std::size_t i = 0; i < words->size(); ++i) {
        Checker w((*words)[i], problems, "/words/" + std::to_string(i));
        if (!w.object()) continue;
        w.string("word");
        w.number("start");
        w.number("end");
        const auto& wj = (*words)[i];
        if (wj.contains("start") && wj.contains("end") && wj["start"].is_number() && wj["end"].is_number()) {
          double s = wj["start"].get<double>(), e = wj["end"].get<double>();
          if (!(e > s) || s < prev_end) w.fail(" span is not monotone");
          prev_end = e;
        }
      }
    }
  } else if (endpoint == endpoint::kMos) {
    c.number("mos");
    if (const json* m = c.get("mos"); m && m->is_number()) {
      double v = m->get<double>();
      if (!(v >= 1.0 && v <= 5.0)) c.fail("/mos must lie in [1, 5]");
    }
  } else if (endpoint == endpoint::kJudge) {
    c.string("response");
  } else if (endpoint == endpoint::kSpeakerEmbed) {
    c.speaker_embedding("speaker_embedding", true);
  } else {
    problems.push_back("unknown endpoint '" + std::string(endpoint) + "'");
  }
  return problems;
}

json dispatch(Backend& backend, std::string_view endpoint, const json& request) {
  if (endpoint == endpoint::kCapabilities) return capabilities(backend.capabilities());

  auto problems = validate_request(endpoint, request);
  if (!problems.empty()) throw InvalidArgument("invalid " + std::string(endpoint) + " request: " + problems.front());

  try {
    if (endpoint == endpoint::kSynthesize) {
      return {{"audio", audio(backend.synthesize(synthesize_request_from(request)))}};
    }
    if (endpoint == endpoint::kGenerateAudio) {
      auto clip = backend.generate_audio(request["prompt"].get<std::string>(), request["duration"].get<double>(),
                                         cue_kind_from_string(request["kind"].get<std::string>()));
      return {{"audio", audio(clip)}};
    }
    if (endpoint == endpoint::kEmbed) {
      auto v = backend.embed(request["text"].get<std::string>());
      return {{"embedding", v}, {"dimension", v.size()}};
    }
    if (endpoint == endpoint::kAlign) {
      auto r = backend.align(request["words"].get<std::vector<std::string>>(), audio_from(request["audio"]));
      json words = json::array();
      for (const auto& w : r.words) words.push_back({{"word", w.word}, {"start", w.start}, {"end", w.end}});
      return {{"words", std::move(words)}, {"duration", r.clip_duration}};
    }
    if (endpoint == endpoint::kMos) return {{"mos", backend.predict_mos(audio_from(request["audio"]))}};
    if (endpoint == endpoint::kJudge) {
      return {{"response", backend.judge(request["prompt"].get<std::string>(),
                                         request["attachments"].get<std::vector<std::string>>(),
                                         request["session_id"].get<std::string>())}};
    }
    if (endpoint == endpoint::kSpeakerEmbed) {
      auto e = backend.speaker_embed(request["model_id"].get<std::string>(), audio_from(request["audio"]));
      return {{"speaker_embedding", speaker_embedding(e)}};
    }
  } catch (const json::exception& e) {
    throw InvalidArgument("invalid " + std::string(endpoint) + " request: " + e.what());
  }
  throw InvalidArgument("unknown endpoint '" + std::string(endpoint) + "'");
}

json error_body(std::string_view code, std::string_view message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

}  // namespace storycast::wire
