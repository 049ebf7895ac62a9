// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include "storycast/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace storycast {

using nlohmann::json;

namespace {

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void check_entry(const RetrievalEntry& e, std::size_t dimension) {
  if (e.embedding.size() != dimension) {
    throw DimensionMismatch("entry '" + e.entry_id + "' has dimension " + std::to_string(e.embedding.size()) +
                            ", database declares " + std::to_string(dimension));
  }
  for (double x : e.embedding) {
    if (!std::isfinite(x)) throw DimensionMismatch("entry '" + e.entry_id + "' has a non-finite embedding");
  }
  if (l2_norm(e.embedding) == 0.0) throw DimensionMismatch("entry '" + e.entry_id + "' has a zero-norm embedding");
  if (!(e.mos >= 1.0 && e.mos <= 5.0)) throw InvalidArgument("entry '" + e.entry_id + "' has MOS outside [1, 5]");
}

}  // namespace

RetrievalDatabase::RetrievalDatabase(std::size_t dimension, std::vector<RetrievalEntry> entries)
    : dimension_(dimension), entries_(std::move(entries)) {
  if (dimension_ == 0) throw DimensionMismatch("database dimension must be positive");
  std::set<std::string> ids;
  for (const auto& e : entries_) {
    check_entry(e, dimension_);
    if (!ids.insert(e.entry_id).second) throw InvalidArgument("duplicate entry_id '" + e.entry_id + "'");
  }
}

RetrievalDatabase RetrievalDatabase::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open retrieval database " + path.string());
  auto base = path.parent_path();

  std::string line;
  std::size_t line_no = 0;
  std::size_t dimension = 0;
  bool have_header = false;
  std::vector<RetrievalEntry> entries;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaViolation(path.string() + ":" + std::to_string(line_no), e.what());
    }
    try {
      if (!have_header) {
        if (j.value("schema_version", 0) != 1) {
          throw SchemaViolation(path.string() + ":1", "header must declare schema_version 1");
        }
        dimension = j.at("dimension").get<std::size_t>();
        have_header = true;
        continue;
      }
      RetrievalEntry e;
      e.entry_id = j.at("entry_id").get<std::string>();
      e.speaker_id = j.at("speaker_id").get<std::string>();
      e.transcript = j.value("transcript", "");
      e.emotion_label = j.at("emotion_label").get<std::string>();
      e.language = j.at("language").get<std::string>();
      e.embedding = j.at("embedding").get<std::vector<double>>();
      e.mos = j.at("mos").get<double>();
      e.audio_uri = j.value("audio_uri", "");
      if (!e.audio_uri.empty() && e.audio_uri.find("://") == std::string::npos) {
        std::filesystem::path p(e.audio_uri);
        if (p.is_relative()) e.audio_uri = (base / p).lexically_normal().string();
      }
      entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw SchemaViolation(path.string() + ":" + std::to_string(line_no), e.what());
    }
  }
  if (!have_header) throw SchemaViolation(path.string(), "missing header record");
  return RetrievalDatabase(dimension, std::move(entries));
}

std::string RetrievalDatabase::to_jsonl() const {
  std::ostringstream out;
  out << json{{"schema_version", 1}, {"dimension", dimension_}}.dump() << "\n";
  for (const auto& e : entries_) {
    out << json{{"entry_id", e.entry_id},       {"speaker_id", e.speaker_id}, {"transcript", e.transcript},
                {"emotion_label", e.emotion_label}, {"language", e.language},     {"embedding", e.embedding},
                {"mos", e.mos},                   {"audio_uri", e.audio_uri}}
               .dump()
        << "\n";
  }
  return out.str();
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("cosine of vectors with dimensions " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  double denom = l2_norm(a) * l2_norm(b);
  if (denom == 0.0) throw DimensionMismatch("cosine similarity undefined for a zero vector");
  return dot / denom;
}

std::vector<ScoredEntry> top_k(std::span<const double> query, std::span<const RetrievalEntry> entries,
                               std::size_t k) {
  if (k < 1) throw InvalidArgument("top_k requires k >= 1");
  if (l2_norm(query) == 0.0) throw DimensionMismatch("query embedding has zero norm");

  std::vector<ScoredEntry> scored;
  scored.reserve(entries.size());
  for (const auto& e : entries) scored.push_back({&e, cosine_similarity(query, e.embedding)});

  auto before = [](const ScoredEntry& a, const ScoredEntry& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.entry->entry_id < b.entry->entry_id;
  };
  std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), before);
  scored.resize(n);
  return scored;
}

std::vector<RetrievalEntry> filter_quality(std::span<const RetrievalEntry> entries, double mos_threshold) {
  std::vector<RetrievalEntry> out;
  for (const auto& e : entries) {
    if (e.mos >= mos_threshold) out.push_back(e);
  }
  return out;
}

EmotionNeutralPair pair_emotion_neutral(const RetrievalEntry& emotional, const RetrievalDatabase& db) {
  if (emotional.is_neutral()) throw InvalidArgument("entry '" + emotional.entry_id + "' is already neutral");
  const RetrievalEntry* best = nullptr;
  for (const auto& e : db.entries()) {
    if (!e.is_neutral() || e.speaker_id != emotional.speaker_id) continue;
    if (!best || e.mos > best->mos || (e.mos == best->mos && e.entry_id < best->entry_id)) best = &e;
  }
  if (!best) throw NoNeutralSample("speaker '" + emotional.speaker_id + "' has no neutral sample");
  return {emotional, *best};
}

std::vector<EmotionNeutralPair> retrieve_prosody_refs(const ProsodyQuery& query, const RetrievalDatabase& db,
                                                      const EmbedFn& embed) {
  if (query.m < 1) throw InvalidArgument("prosody query requires m >= 1");
  if (db.empty()) throw InvalidArgument("retrieval database is empty");

  auto q = embed(query.description);
  if (q.size() != db.dimension()) {
    throw DimensionMismatch("query dimension " + std::to_string(q.size()) + " does not match database dimension " +
                            std::to_string(db.dimension()));
  }

  std::vector<RetrievalEntry> candidates;
  for (const auto& e : db.entries()) {
    if (!e.is_neutral() && e.language == query.language) candidates.push_back(e);
  }

  std::vector<EmotionNeutralPair> pairs;
  if (!candidates.empty()) {
    auto ranked = top_k(q, candidates, candidates.size());
    for (const auto& hit : ranked) {
      if (pairs.size() == static_cast<std::size_t>(query.m)) break;
      EmotionNeutralPair pair;
      try {
        pair = pair_emotion_neutral(*hit.entry, db);
      } catch (const NoNeutralSample&) {
        continue;
      }
      std::vector<RetrievalEntry> members{pair.emotional, pair.neutral};
      if (filter_quality(members, query.mos_threshold).size() != members.size()) continue;
      pairs.push_back(std::move(pair));
    }
  }

  if (pairs.size() < static_cast<std::size_t>(query.m)) throw InsufficientPairs(std::move(pairs), query.m);
  return pairs;
}

const RetrievalEntry* retrieve_timbre(std::span<const double> description_embedding, const RetrievalDatabase& db,
                                      std::string_view language, double mos_threshold) {
  std::vector<RetrievalEntry> neutral;
  for (const auto& e : db.entries()) {
    if (e.is_neutral() && e.language == language) neutral.push_back(e);
  }
  neutral = filter_quality(neutral, mos_threshold);
  if (neutral.empty()) return nullptr;
  auto best = top_k(description_embedding, neutral, 1);
  for (const auto& e : db.entries()) {
    if (e.entry_id == best.front().entry->entry_id) return &e;
  }
  return nullptr;
}

}  // namespace storycast
