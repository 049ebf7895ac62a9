// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Exhaustive cosine retrieval over an emotion-labelled text/speech database,
// MOS quality filtering and emotion/neutral pair assembly.

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "storycast/error.hpp"

namespace storycast {

inline constexpr std::string_view kNeutralLabel = "neutral";
inline constexpr double kDefaultMosThreshold = 3.5;

struct RetrievalEntry {
  std::string entry_id;
  std::string speaker_id;
  std::string transcript;
  std::string emotion_label;
  std::string language;
  std::vector<double> embedding;
  double mos = 1.0;
  std::string audio_uri;

  bool is_neutral() const { return emotion_label == kNeutralLabel; }
  bool operator==(const RetrievalEntry&) const = default;
};

struct EmotionNeutralPair {
  RetrievalEntry emotional;
  RetrievalEntry neutral;
};

struct ProsodyQuery {
  std::string description;
  int m = 1;
  double mos_threshold = kDefaultMosThreshold;
  std::string language;
};

struct ScoredEntry {
  const RetrievalEntry* entry = nullptr;
  double similarity = 0.0;
};

// Immutable after construction. Every entry has the declared dimension, a
// non-zero embedding and a MOS in [1, 5].
class RetrievalDatabase {
 public:
  RetrievalDatabase(std::size_t dimension, std::vector<RetrievalEntry> entries);

  // JSONL: header {"schema_version":1,"dimension":D}, then one entry per line.
  // Relative audio_uri values are resolved against the file's directory.
  static RetrievalDatabase load(const std::filesystem::path& path);
  std::string to_jsonl() const;

  std::size_t dimension() const { return dimension_; }
  const std::vector<RetrievalEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::size_t dimension_;
  std::vector<RetrievalEntry> entries_;
};

class InsufficientPairs : public Error {
 public:
  InsufficientPairs(std::vector<EmotionNeutralPair> found, int requested)
      : Error(ErrorClass::kSchema, "found " + std::to_string(found.size()) + " of " +
                                       std::to_string(requested) + " emotion/neutral pairs"),
        found_(std::move(found)),
        requested_(requested) {}
  const std::vector<EmotionNeutralPair>& found() const noexcept { return found_; }
  int requested() const noexcept { return requested_; }

 private:
  std::vector<EmotionNeutralPair> found_;
  int requested_;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Cosine similarity descending, ties by entry_id ascending. The query must be
// non-zero and match the dimension of every entry.
std::vector<ScoredEntry> top_k(std::span<const double> query, std::span<const RetrievalEntry> entries,
                               std::size_t k);
inline std::vector<ScoredEntry> top_k(std::span<const double> query, const RetrievalDatabase& db, std::size_t k) {
  return top_k(query, db.entries(), k);
}

std::vector<RetrievalEntry> filter_quality(std::span<const RetrievalEntry> entries, double mos_threshold);

// Highest-MOS neutral entry of the same speaker, ties by entry_id.
EmotionNeutralPair pair_emotion_neutral(const RetrievalEntry& emotional, const RetrievalDatabase& db);

using EmbedFn = std::function<std::vector<double>(const std::string&)>;

// Ranks non-neutral entries of the query language against the embedded
// description, pairs each with a neutral sample, drops pairs where either
// member is below the MOS threshold, and keeps the first m. Throws
// InsufficientPairs (carrying what was found) when fewer than m survive.
std::vector<EmotionNeutralPair> retrieve_prosody_refs(const ProsodyQuery& query, const RetrievalDatabase& db,
                                                      const EmbedFn& embed);

// Best neutral reference for a timbre description in one language, after the
// MOS filter. Returns nullptr when nothing qualifies.
const RetrievalEntry* retrieve_timbre(std::span<const double> description_embedding, const RetrievalDatabase& db,
                                      std::string_view language, double mos_threshold);

}  // namespace storycast
