// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Capability registry for TTS backends and the two-step model selection:
// language filter, then cloning- or controllability-ranked pick.

#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace storycast {

struct ModelProfile {
  std::string model_id;
  std::set<std::string> languages;
  int cloning_rank = 1;           // 1 = best zero-shot voice cloning
  int controllability_rank = 1;   // 1 = best description-driven control
  bool supports_paralinguistics = false;
  bool supports_speaker_embedding = false;
  std::set<std::string> emotion_clone_languages;

  bool operator==(const ModelProfile&) const = default;
};

nlohmann::json to_json(const ModelProfile& profile);
ModelProfile profile_from_json(const nlohmann::json& j, const std::string& pointer = "");

struct SelectionRequest {
  std::string language;
  std::string text_emotion;
  std::string reference_emotion;
  bool emotion_shift = false;
  bool needs_paralinguistics = false;
};

struct Selection {
  std::string model_id;
  std::vector<std::string> rationale;

  bool operator==(const Selection&) const = default;
};

namespace rule {
inline constexpr std::string_view kLanguageFilter = "language_filter";
inline constexpr std::string_view kParalinguisticFilter = "paralinguistic_filter";
inline constexpr std::string_view kCloningRank = "cloning_rank";
inline constexpr std::string_view kControllabilityRank = "controllability_rank";
}  // namespace rule

// Immutable set of profiles. Registration returns a new registry.
class ModelRegistry {
 public:
  ModelRegistry() = default;

  // f5-tts, cosyvoice, cosyvoice2, voxinstruct, metavoice
  static ModelRegistry defaults();
  static ModelRegistry from_json(const nlohmann::json& j);
  static ModelRegistry load(const std::filesystem::path& path);

  // Throws DuplicateModelId or DuplicateRank.
  [[nodiscard]] ModelRegistry with_profile(ModelProfile profile) const;

  const std::vector<ModelProfile>& profiles() const { return profiles_; }
  const ModelProfile* find(std::string_view model_id) const;
  bool empty() const { return profiles_.empty(); }

  nlohmann::json to_json() const;

 private:
  std::vector<ModelProfile> profiles_;
};

inline ModelRegistry register_profile(const ModelRegistry& registry, ModelProfile profile) {
  return registry.with_profile(std::move(profile));
}

// Registry order is preserved. Throws NoCapableModel when nothing matches.
std::vector<ModelProfile> filter_by_language(const ModelRegistry& registry, std::string_view language);

Selection select_model(const ModelRegistry& registry, const SelectionRequest& request);

}  // namespace storycast
