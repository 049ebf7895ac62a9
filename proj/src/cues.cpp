// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include "storycast/cues.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <set>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "storycast/error.hpp"

namespace storycast {

using nlohmann::json;

void check_alignment(const AlignmentResult& alignment) {
  double prev_end = 0.0;
  for (std::size_t i = 0; i < alignment.words.size(); ++i) {
    const auto& w = alignment.words[i];
    if (!(w.start >= 0.0) || !(w.end > w.start)) {
      throw NonMonotoneAlignment("word " + std::to_string(i) + " ('" + w.word + "') has an empty or negative span");
    }
    if (w.start < prev_end) {
      throw NonMonotoneAlignment("word " + std::to_string(i) + " ('" + w.word + "') overlaps its predecessor");
    }
    if (w.end > alignment.clip_duration) {
      throw NonMonotoneAlignment("word " + std::to_string(i) + " ('" + w.word + "') ends after the clip");
    }
    prev_end = w.end;
  }
}

WordTimestampMap build_word_map(std::span<const AlignmentResult> alignments, std::span<const double> offsets) {
  if (alignments.size() != offsets.size()) {
    throw OffsetCountMismatch(std::to_string(alignments.size()) + " alignments but " +
                              std::to_string(offsets.size()) + " offsets");
  }
  WordTimestampMap map;
  for (std::size_t i = 0; i < alignments.size(); ++i) {
    check_alignment(alignments[i]);
    for (const auto& w : alignments[i].words) {
      map.spans.push_back({w.word, offsets[i] + w.start, offsets[i] + w.end, static_cast<int>(i)});
    }
  }
  if (!alignments.empty()) map.total_duration = offsets.back() + alignments.back().clip_duration;
  return map;
}

namespace {

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

}  // namespace

double resolve_anchor(const WordTimestampMap& map, std::string_view word, int occurrence, int sub_sentence_index) {
  const std::string target = normalize_word(word);
  int seen = 0;
  std::string nearest;
  std::size_t nearest_dist = SIZE_MAX;
  for (const auto& span : map.spans) {
    if (span.sub_sentence_index != sub_sentence_index) continue;
    auto w = normalize_word(span.word);
    if (w == target && ++seen == occurrence) return span.start;
    auto d = edit_distance(w, target);
    if (d < nearest_dist) {
      nearest_dist = d;
      nearest = w;
    }
  }
  throw AnchorNotFound(std::string(word), occurrence, nearest,
                       "sub-sentence " + std::to_string(sub_sentence_index));
}

std::string_view to_string(CueKind kind) {
  switch (kind) {
    case CueKind::kSfx: return "sfx";
    case CueKind::kAmbiance: return "ambiance";
    case CueKind::kBgm: return "bgm";
  }
  return "sfx";
}

CueKind cue_kind_from_string(std::string_view s) {
  if (s == "sfx") return CueKind::kSfx;
  if (s == "ambiance") return CueKind::kAmbiance;
  if (s == "bgm") return CueKind::kBgm;
  throw InvalidArgument("unknown cue kind '" + std::string(s) + "'");
}

std::vector<const Cue*> CueSheet::all_cues() const {
  std::vector<const Cue*> out;
  for (const auto* list : {&sfx_cues, &ambiance_cues, &bgm_cues}) {
    for (const auto& c : *list) out.push_back(&c);
  }
  return out;
}

namespace {

void sort_and_name(std::vector<Cue>& cues, std::string_view prefix) {
  std::stable_sort(cues.begin(), cues.end(), [](const Cue& a, const Cue& b) { return a.start_time < b.start_time; });
  for (std::size_t i = 0; i < cues.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*s-%03zu", static_cast<int>(prefix.size()), prefix.data(), i + 1);
    cues[i].id = buf;
  }
}

std::vector<Cue> compile_scoped(const std::vector<ScopedAudioEntry>& entries, CueKind kind,
                                std::span<const TimeWindow> windows, double total) {
  std::vector<Cue> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.first < 0 || e.last < e.first || static_cast<std::size_t>(e.last) >= windows.size()) {
      throw EmptyScope(std::string(to_string(kind)) + " entry " + std::to_string(i) + " has an invalid scope");
    }
    double start = windows[e.first].start;
    double end = windows[e.first].end;
    for (int k = e.first; k <= e.last; ++k) {
      start = std::min(start, windows[k].start);
      end = std::max(end, windows[k].end);
    }
    start = std::max(start, 0.0);
    end = std::min(end, total);
    if (!(end > start)) {
      throw EmptyScope(std::string(to_string(kind)) + " entry " + std::to_string(i) + " covers no time");
    }
    Cue c;
    c.kind = kind;
    c.prompt = e.prompt;
    c.start_time = start;
    c.end_time = end;
    c.duration = end - start;
    c.volume = e.relative_volume;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

CueSheet compile_cue_sheet(const ScriptPlan& plan, const WordTimestampMap& map,
                           std::span<const TimeWindow> windows, const CueOptions& options) {
  if (windows.size() != plan.sub_sentences.size()) {
    throw OffsetCountMismatch(std::to_string(plan.sub_sentences.size()) + " sub-sentences but " +
                              std::to_string(windows.size()) + " windows");
  }
  CueSheet sheet;
  sheet.total_duration = map.total_duration;
  sheet.sample_rate = options.sample_rate;

  for (std::size_t i = 0; i < plan.sub_sentences.size(); ++i) {
    const auto& sub = plan.sub_sentences[i];
    auto parsed = parse_inline_sfx(sub.text);
    for (std::size_t t = 0; t < parsed.cues.size(); ++t) {
      const auto& tag = parsed.cues[t];
      double onset = 0.0;
      try {
        onset = resolve_anchor(map, tag.anchor_word, tag.occurrence_index, static_cast<int>(i));
      } catch (const AnchorNotFound& e) {
        if (!options.lenient_anchors) throw;
        spdlog::warn("dropping sfx '{}': {}", tag.description, e.what());
        continue;
      }

      double duration = options.sfx_duration;
      double volume = options.sfx_volume;
      for (const auto& o : sub.sfx_overrides) {
        if (o.tag_index != static_cast<int>(t)) continue;
        if (o.duration) duration = *o.duration;
        if (o.volume) volume = *o.volume;
      }

      Cue c;
      c.kind = CueKind::kSfx;
      c.prompt = tag.description;
      c.start_time = onset;
      c.end_time = std::min(onset + duration, map.total_duration);
      c.duration = c.end_time - c.start_time;
      c.volume = volume;
      c.anchor = CueAnchor{tag.anchor_word, tag.occurrence_index, static_cast<int>(i)};
      if (!(c.duration > 0.0)) {
        throw EmptyScope("sfx '" + tag.description + "' starts at the end of the program");
      }
      sheet.sfx_cues.push_back(std::move(c));
    }
  }

  sheet.ambiance_cues = compile_scoped(plan.ambiance, CueKind::kAmbiance, windows, map.total_duration);
  sheet.bgm_cues = compile_scoped(plan.bgm, CueKind::kBgm, windows, map.total_duration);

  sort_and_name(sheet.sfx_cues, "sfx");
  sort_and_name(sheet.ambiance_cues, "ambiance");
  sort_and_name(sheet.bgm_cues, "bgm");
  return sheet;
}

// ---------------------------------------------------------------------------
// canonical JSON

namespace {

std::int64_t to_micros(double seconds) { return static_cast<std::int64_t>(std::llround(seconds * 1e6)); }

std::string fixed6(std::int64_t micros) {
  char buf[48];
  const char* sign = micros < 0 ? "-" : "";
  std::uint64_t mag = micros < 0 ? static_cast<std::uint64_t>(-micros) : static_cast<std::uint64_t>(micros);
  std::snprintf(buf, sizeof buf, "%s%" PRIu64 ".%06" PRIu64, sign, mag / 1000000, mag % 1000000);
  return buf;
}

std::string quote(const std::string& s) { return json(s).dump(); }

void emit_cue(std::string& out, const Cue& c, const char* indent) {
  const auto start = to_micros(c.start_time);
  const auto end = to_micros(c.end_time);
  out += indent;
  out += "{\n";
  std::string in = std::string(indent) + "  ";
  if (c.anchor) {
    out += in + "\"anchor\": {\"occurrence_index\": " + std::to_string(c.anchor->occurrence_index) +
           ", \"sub_sentence_index\": " + std::to_string(c.anchor->sub_sentence_index) +
           ", \"word\": " + quote(c.anchor->word) + "},\n";
  }
  out += in + "\"duration\": " + fixed6(end - start) + ",\n";
  out += in + "\"end_time\": " + fixed6(end) + ",\n";
  out += in + "\"id\": " + quote(c.id) + ",\n";
  out += in + "\"kind\": " + quote(std::string(to_string(c.kind))) + ",\n";
  out += in + "\"prompt\": " + quote(c.prompt) + ",\n";
  out += in + "\"start_time\": " + fixed6(start) + ",\n";
  out += in + "\"volume\": " + fixed6(to_micros(c.volume)) + "\n";
  out += indent;
  out += "}";
}

void emit_list(std::string& out, const char* key, const std::vector<Cue>& cues, bool trailing_comma) {
  out += "  \"";
  out += key;
  out += "\": [";
  if (cues.empty()) {
    out += "]";
  } else {
    out += "\n";
    for (std::size_t i = 0; i < cues.size(); ++i) {
      emit_cue(out, cues[i], "    ");
      out += i + 1 < cues.size() ? ",\n" : "\n";
    }
    out += "  ]";
  }
  out += trailing_comma ? ",\n" : "\n";
}

}  // namespace

std::string serialize_cue_sheet(const CueSheet& sheet) {
  std::string out = "{\n";
  emit_list(out, "ambiance_cues", sheet.ambiance_cues, true);
  emit_list(out, "bgm_cues", sheet.bgm_cues, true);
  out += "  \"sample_rate\": " + std::to_string(sheet.sample_rate) + ",\n";
  out += "  \"schema_version\": " + std::to_string(kCueSheetSchemaVersion) + ",\n";
  emit_list(out, "sfx_cues", sheet.sfx_cues, true);
  out += "  \"total_duration\": " + fixed6(to_micros(sheet.total_duration)) + "\n";
  out += "}\n";
  return out;
}

namespace {

double number_at(const json& obj, const char* key, const std::string& ptr) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) throw SchemaViolation(ptr + "/" + key, "expected number");
  return it->get<double>();
}

std::vector<Cue> parse_list(const json& root, const char* key, CueKind kind, double total,
                            std::set<std::string>& ids) {
  std::string ptr = std::string("/") + key;
  auto it = root.find(key);
  if (it == root.end() || !it->is_array()) throw SchemaViolation(ptr, "expected array");
  std::vector<Cue> cues;
  constexpr double kTol = 1e-6;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& j = (*it)[i];
    auto cptr = ptr + "/" + std::to_string(i);
    if (!j.is_object()) throw SchemaViolation(cptr, "expected object");
    Cue c;
    try {
      c.id = j.at("id").get<std::string>();
      c.prompt = j.at("prompt").get<std::string>();
      c.kind = cue_kind_from_string(j.at("kind").get<std::string>());
      if (auto a = j.find("anchor"); a != j.end() && !a->is_null()) {
        c.anchor = CueAnchor{a->at("word").get<std::string>(), a->at("occurrence_index").get<int>(),
                             a->at("sub_sentence_index").get<int>()};
      }
    } catch (const json::exception& e) {
      throw SchemaViolation(cptr, e.what());
    } catch (const InvalidArgument& e) {
      throw SchemaViolation(cptr + "/kind", e.what());
    }
    c.start_time = number_at(j, "start_time", cptr);
    c.end_time = number_at(j, "end_time", cptr);
    c.duration = number_at(j, "duration", cptr);
    c.volume = number_at(j, "volume", cptr);

    if (c.kind != kind) throw SchemaViolation(cptr + "/kind", "cue kind does not match its list");
    if (!ids.insert(c.id).second) throw SchemaViolation(cptr + "/id", "duplicate cue id '" + c.id + "'");
    if (!(c.start_time >= 0.0)) throw SchemaViolation(cptr + "/start_time", "negative start_time");
    if (!(c.end_time > c.start_time)) throw SchemaViolation(cptr + "/end_time", "end_time not after start_time");
    if (c.end_time > total) throw SchemaViolation(cptr + "/end_time", "end_time beyond total_duration");
    if (std::abs(c.duration - (c.end_time - c.start_time)) > kTol) {
      throw SchemaViolation(cptr + "/duration", "duration != end_time - start_time");
    }
    if (!(c.volume > 0.0 && c.volume <= 1.0)) throw SchemaViolation(cptr + "/volume", "volume outside (0, 1]");
    if (!cues.empty() && c.start_time < cues.back().start_time) {
      throw SchemaViolation(cptr + "/start_time", "cues not sorted by start_time");
    }
    cues.push_back(std::move(c));
  }
  return cues;
}

}  // namespace

CueSheet parse_cue_sheet(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaViolation("/", std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw SchemaViolation("/", "expected object");
  auto version = root.find("schema_version");
  if (version == root.end() || !version->is_number_integer() || version->get<int>() != kCueSheetSchemaVersion) {
    throw SchemaViolation("/schema_version", "unsupported schema version");
  }

  CueSheet sheet;
  sheet.total_duration = number_at(root, "total_duration", "");
  if (!(sheet.total_duration >= 0.0)) throw SchemaViolation("/total_duration", "negative total_duration");
  auto rate = root.find("sample_rate");
  if (rate == root.end() || !rate->is_number_integer() || rate->get<int>() <= 0) {
    throw SchemaViolation("/sample_rate", "expected positive integer");
  }
  sheet.sample_rate = rate->get<int>();

  std::set<std::string> ids;
  sheet.sfx_cues = parse_list(root, "sfx_cues", CueKind::kSfx, sheet.total_duration, ids);
  sheet.ambiance_cues = parse_list(root, "ambiance_cues", CueKind::kAmbiance, sheet.total_duration, ids);
  sheet.bgm_cues = parse_list(root, "bgm_cues", CueKind::kBgm, sheet.total_duration, ids);
  return sheet;
}

}  // namespace storycast
