// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Word-level timing from forced alignment, and compilation of the plan's
// sound design (inline SFX, ambiance and BGM beds) into a timed cue sheet.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "storycast/audio.hpp"
#include "storycast/script.hpp"

namespace storycast {

// One aligned word, local to a single synthesized clip.
struct AlignedWord {
  std::string word;
  double start = 0.0;
  double end = 0.0;

  bool operator==(const AlignedWord&) const = default;
};

struct AlignmentResult {
  std::vector<AlignedWord> words;
  double clip_duration = 0.0;

  bool operator==(const AlignmentResult&) const = default;
};

// Throws NonMonotoneAlignment unless every span has end > start, spans do not
// overlap, appear in time order, and lie inside [0, clip_duration].
void check_alignment(const AlignmentResult& alignment);

struct WordSpan {
  std::string word;
  double start = 0.0;
  double end = 0.0;
  int sub_sentence_index = 0;

  bool operator==(const WordSpan&) const = default;
};

struct WordTimestampMap {
  std::vector<WordSpan> spans;
  double total_duration = 0.0;
};

struct TimeWindow {
  double start = 0.0;
  double end = 0.0;
};

// Shifts each sub-sentence's local alignment by its offset on the program
// timeline. total_duration = last offset + last clip duration.
WordTimestampMap build_word_map(std::span<const AlignmentResult> alignments, std::span<const double> offsets);

// Onset of the occurrence-th match (case-insensitive, punctuation-stripped)
// of `word` among the spans of one sub-sentence.
double resolve_anchor(const WordTimestampMap& map, std::string_view word, int occurrence, int sub_sentence_index);

enum class CueKind { kSfx, kAmbiance, kBgm };

std::string_view to_string(CueKind kind);
CueKind cue_kind_from_string(std::string_view s);

struct CueAnchor {
  std::string word;
  int occurrence_index = 1;
  int sub_sentence_index = 0;

  bool operator==(const CueAnchor&) const = default;
};

struct Cue {
  std::string id;
  CueKind kind = CueKind::kSfx;
  std::string prompt;
  double start_time = 0.0;
  double end_time = 0.0;
  double duration = 0.0;
  double volume = 1.0;
  std::optional<CueAnchor> anchor;

  bool operator==(const Cue&) const = default;
};

inline constexpr int kCueSheetSchemaVersion = 1;

struct CueSheet {
  std::vector<Cue> sfx_cues;
  std::vector<Cue> ambiance_cues;
  std::vector<Cue> bgm_cues;
  double total_duration = 0.0;
  int sample_rate = kDefaultSampleRate;

  std::vector<const Cue*> all_cues() const;
  bool operator==(const CueSheet&) const = default;
};

struct CueOptions {
  double sfx_duration = 2.0;
  double sfx_volume = 0.9;
  int sample_rate = kDefaultSampleRate;
  // Drop cues whose anchor cannot be resolved instead of failing.
  bool lenient_anchors = false;
};

CueSheet compile_cue_sheet(const ScriptPlan& plan, const WordTimestampMap& map,
                           std::span<const TimeWindow> sub_sentence_windows, const CueOptions& options = {});

// Canonical JSON: sorted keys, seconds and volumes as 6-decimal fixed point.
std::string serialize_cue_sheet(const CueSheet& sheet);
// Throws SchemaViolation on malformed input or broken cue invariants.
CueSheet parse_cue_sheet(std::string_view json_text);

}  // namespace storycast
