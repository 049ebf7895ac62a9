// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Structured story script written by the planner: characters, emotion-level
// sub-sentences with inline sound-effect tags, and ambiance/BGM beds.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace storycast {

inline constexpr int kPlanSchemaVersion = 1;

struct CharacterSpec {
  std::string id;
  std::string display_name;
  std::string timbre_description;
  std::string language;

  bool operator==(const CharacterSpec&) const = default;
};

// Per-tag overrides for the compiled sfx cue. tag_index counts the inline
// tags of one sub-sentence from 0, left to right.
struct SfxOverride {
  int tag_index = 0;
  std::optional<double> duration;
  std::optional<double> volume;

  bool operator==(const SfxOverride&) const = default;
};

struct SubSentence {
  std::string character_id;
  std::string text;
  std::string emotion_description;
  std::vector<std::string> paralinguistic_tokens;
  int order_index = 0;
  // Planner verdict that the line needs an emotion the reference voice does
  // not carry.
  bool emotion_shift = false;
  // Planner-supplied prosody intensity (alpha); absent means config default.
  std::optional<double> intensity;
  std::vector<SfxOverride> sfx_overrides;

  bool operator==(const SubSentence&) const = default;
};

struct InlineSfx {
  std::string description;
  std::string anchor_word;
  int occurrence_index = 1;

  bool operator==(const InlineSfx&) const = default;
};

// An ambiance or BGM bed over an inclusive range of sub-sentence positions.
struct ScopedAudioEntry {
  std::string prompt;
  int first = 0;
  int last = 0;
  double relative_volume = 0.0;

  bool operator==(const ScopedAudioEntry&) const = default;
};

using AmbianceEntry = ScopedAudioEntry;
using BgmEntry = ScopedAudioEntry;

inline constexpr double kDefaultAmbianceVolume = 0.35;
inline constexpr double kDefaultBgmVolume = 0.5;

struct ScriptPlan {
  std::vector<CharacterSpec> characters;
  std::vector<SubSentence> sub_sentences;
  std::vector<AmbianceEntry> ambiance;
  std::vector<BgmEntry> bgm;
  std::string source_instruction;

  const CharacterSpec* find_character(std::string_view id) const;

  bool operator==(const ScriptPlan&) const = default;
};

class ParalinguisticLibrary {
 public:
  ParalinguisticLibrary() = default;
  explicit ParalinguisticLibrary(std::set<std::string> tokens) : tokens_(std::move(tokens)) {}

  // breath, laughter, emphasis, sigh, pause
  static const ParalinguisticLibrary& defaults();
  // One token per line; '#' starts a comment.
  static ParalinguisticLibrary load(const std::filesystem::path& path);

  bool contains(std::string_view token) const { return tokens_.count(std::string(token)) != 0; }
  const std::set<std::string>& tokens() const { return tokens_; }

 private:
  std::set<std::string> tokens_;
};

struct TagParseIssue {
  std::string message;
  std::size_t offset = 0;
};

struct InlineSfxParse {
  std::string clean_text;
  std::vector<InlineSfx> cues;
  // Populated only in lenient mode.
  std::vector<TagParseIssue> issues;
};

// Strips `[SFX: description@anchor]` tags. Strict mode throws MalformedTag on
// the first bad tag; lenient mode drops closed malformed tags, keeps an
// unclosed one as literal text, and records every problem in `issues`.
InlineSfxParse parse_inline_sfx(std::string_view text, bool lenient = false);

// Lower-cased with leading/trailing punctuation removed. Anchors and aligned
// words are compared in this form.
std::string normalize_word(std::string_view word);

// Whitespace-separated tokens of the spoken text: tags removed, `[token]`
// paralinguistic markers from the library removed.
std::vector<std::string> spoken_words(std::string_view text, const ParalinguisticLibrary& library);

// Text sent to a TTS model. Paralinguistic markers are kept only when the
// model can render them.
std::string synthesis_text(std::string_view text, const ParalinguisticLibrary& library,
                           bool keep_paralinguistic_markers);

struct Violation {
  std::string pointer;
  std::string message;
  bool dangling_reference = false;

  bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

// Every broken invariant, one entry per offending item. Library membership is
// only checked when a library is given.
ValidationReport validate_plan(const ScriptPlan& plan, const ParalinguisticLibrary* library);
inline ValidationReport validate_plan(const ScriptPlan& plan) {
  return validate_plan(plan, &ParalinguisticLibrary::defaults());
}

// Throws SchemaViolation or DanglingReference carrying a JSON pointer.
ScriptPlan parse_plan(std::string_view json_text);
std::string serialize_plan(const ScriptPlan& plan);

}  // namespace storycast
