// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include "storycast/acms.hpp"

#include <algorithm>
#include <fstream>

#include "storycast/error.hpp"

namespace storycast {

using nlohmann::json;

json to_json(const ModelProfile& p) {
  return {{"model_id", p.model_id},
          {"languages", p.languages},
          {"cloning_rank", p.cloning_rank},
          {"controllability_rank", p.controllability_rank},
          {"supports_paralinguistics", p.supports_paralinguistics},
          {"supports_speaker_embedding", p.supports_speaker_embedding},
          {"emotion_clone_languages", p.emotion_clone_languages}};
}

ModelProfile profile_from_json(const json& j, const std::string& pointer) {
  if (!j.is_object()) throw ConfigError(pointer + ": model profile must be an object");
  auto field = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(pointer + "/" + key + ": missing");
    return *it;
  };
  try {
    ModelProfile p;
    p.model_id = field("model_id").get<std::string>();
    p.languages = field("languages").get<std::set<std::string>>();
    p.cloning_rank = field("cloning_rank").get<int>();
    p.controllability_rank = field("controllability_rank").get<int>();
    p.supports_paralinguistics = j.value("supports_paralinguistics", false);
    p.supports_speaker_embedding = j.value("supports_speaker_embedding", false);
    p.emotion_clone_languages = j.value("emotion_clone_languages", std::set<std::string>{});
    if (p.model_id.empty()) throw ConfigError(pointer + "/model_id: empty");
    if (p.cloning_rank < 1 || p.controllability_rank < 1) throw ConfigError(pointer + ": ranks must be >= 1");
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(pointer + ": " + e.what());
  }
}

ModelRegistry ModelRegistry::defaults() {
  // Capability priors: F5-TTS clones best, VoxInstruct is the most
  // description-controllable, CosyVoice is the multilingual generalist,
  // CosyVoice 2 covers Chinese dialects and paralinguistic tags, MetaVoice
  // clones emotion from English references.
  ModelRegistry r;
  r = r.with_profile({"f5-tts", {"en", "zh"}, 1, 5, false, false, {}});
  r = r.with_profile({"cosyvoice", {"en", "ja", "ko", "yue", "zh"}, 4, 3, false, true, {}});
  r = r.with_profile({"cosyvoice2", {"en", "ja", "ko", "zh", "zh-dialect"}, 3, 2, true, true, {}});
  r = r.with_profile({"voxinstruct", {"en", "zh"}, 5, 1, false, false, {}});
  r = r.with_profile({"metavoice", {"en"}, 2, 4, false, true, {"en"}});
  return r;
}

ModelRegistry ModelRegistry::from_json(const json& j) {
  if (!j.is_object() || !j.contains("profiles") || !j["profiles"].is_array()) {
    throw ConfigError("registry: expected object with a 'profiles' array");
  }
  ModelRegistry r;
  const auto& arr = j["profiles"];
  for (std::size_t i = 0; i < arr.size(); ++i) {
    r = r.with_profile(profile_from_json(arr[i], "/profiles/" + std::to_string(i)));
  }
  return r;
}

ModelRegistry ModelRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open registry " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("registry " + path.string() + ": " + e.what());
  }
}

json ModelRegistry::to_json() const {
  json arr = json::array();
  for (const auto& p : profiles_) arr.push_back(storycast::to_json(p));
  return {{"schema_version", 1}, {"profiles", std::move(arr)}};
}

ModelRegistry ModelRegistry::with_profile(ModelProfile profile) const {
  for (const auto& p : profiles_) {
    if (p.model_id == profile.model_id) throw DuplicateModelId("model id '" + profile.model_id + "' already registered");
    if (p.cloning_rank == profile.cloning_rank) {
      throw DuplicateRank("cloning_rank " + std::to_string(profile.cloning_rank) + " already held by " + p.model_id);
    }
    if (p.controllability_rank == profile.controllability_rank) {
      throw DuplicateRank("controllability_rank " + std::to_string(profile.controllability_rank) +
                          " already held by " + p.model_id);
    }
  }
  ModelRegistry next = *this;
  next.profiles_.push_back(std::move(profile));
  return next;
}

const ModelProfile* ModelRegistry::find(std::string_view model_id) const {
  for (const auto& p : profiles_) {
    if (p.model_id == model_id) return &p;
  }
  return nullptr;
}

std::vector<ModelProfile> filter_by_language(const ModelRegistry& registry, std::string_view language) {
  if (registry.empty()) throw NoCapableModel("model registry is empty");
  std::vector<ModelProfile> out;
  for (const auto& p : registry.profiles()) {
    if (p.languages.count(std::string(language))) out.push_back(p);
  }
  if (out.empty()) throw NoCapableModel("no model supports language '" + std::string(language) + "'");
  return out;
}

Selection select_model(const ModelRegistry& registry, const SelectionRequest& request) {
  if (request.language.empty()) throw InvalidArgument("selection request has an empty language");

  Selection sel;
  auto candidates = filter_by_language(registry, request.language);
  sel.rationale.emplace_back(rule::kLanguageFilter);

  if (request.needs_paralinguistics) {
    std::erase_if(candidates, [](const ModelProfile& p) { return !p.supports_paralinguistics; });
    if (candidates.empty()) {
      throw NoCapableModel("no '" + request.language + "' model renders paralinguistic tokens");
    }
    sel.rationale.emplace_back(rule::kParalinguisticFilter);
  }

  const ModelProfile* best = nullptr;
  if (!request.emotion_shift) {
    for (const auto& p : candidates) {
      if (!best || p.cloning_rank < best->cloning_rank) best = &p;
    }
    sel.rationale.emplace_back(rule::kCloningRank);
  } else {
    for (const auto& p : candidates) {
      if (!best || p.controllability_rank < best->controllability_rank) best = &p;
    }
    sel.rationale.emplace_back(rule::kControllabilityRank);
  }
  sel.model_id = best->model_id;
  return sel;
}

}  // namespace storycast
