// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include "storycast/script.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "storycast/error.hpp"

namespace storycast {

using nlohmann::json;

namespace {

constexpr std::string_view kTagOpen = "[SFX:";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_closing_punct(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case ')': case ']': case '}': case '"': case '\'':
      return true;
    default:
      return false;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

bool is_marker_token(std::string_view tok) {
  return tok.size() >= 2 && tok.front() == '[' && tok.back() == ']';
}

int count_occurrences(std::string_view text, const std::string& normalized_anchor) {
  int n = 0;
  for (auto tok : split_ws(text)) {
    if (is_marker_token(tok)) continue;
    if (normalize_word(tok) == normalized_anchor) ++n;
  }
  return n;
}

// Appends literal text to the cleaned output, honoring a pending join left by
// a removed tag: the whitespace run around the tag becomes one space, or
// nothing at either end of the text or before closing punctuation.
class CleanBuilder {
 public:
  void tag_removed() {
    if (!pending_) {
      pending_ = true;
      saw_space_ = false;
    }
    while (!out_.empty() && is_space(out_.back())) {
      out_.pop_back();
      saw_space_ = true;
    }
  }

  void append(std::string_view literal) {
    if (pending_) {
      std::size_t i = 0;
      while (i < literal.size() && is_space(literal[i])) ++i;
      if (i > 0) saw_space_ = true;
      literal.remove_prefix(i);
      if (literal.empty()) return;
      if (saw_space_ && !out_.empty() && !is_closing_punct(literal.front())) out_.push_back(' ');
      pending_ = false;
    }
    out_.append(literal);
  }

  const std::string& text() const { return out_; }

 private:
  std::string out_;
  bool pending_ = false;
  bool saw_space_ = false;
};

}  // namespace

std::string normalize_word(std::string_view word) {
  while (!word.empty() && std::ispunct(static_cast<unsigned char>(word.front()))) word.remove_prefix(1);
  while (!word.empty() && std::ispunct(static_cast<unsigned char>(word.back()))) word.remove_suffix(1);
  std::string out(word);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

InlineSfxParse parse_inline_sfx(std::string_view text, bool lenient) {
  InlineSfxParse result;
  CleanBuilder clean;
  std::size_t pos = 0;

  auto fail = [&](const std::string& msg, std::size_t offset) {
    if (!lenient) throw MalformedTag(msg, offset);
    result.issues.push_back({msg, offset});
  };

  while (pos < text.size()) {
    std::size_t open = text.find(kTagOpen, pos);
    if (open == std::string_view::npos) {
      clean.append(text.substr(pos));
      break;
    }
    clean.append(text.substr(pos, open - pos));

    std::size_t close = text.find_first_of("[]", open + kTagOpen.size());
    if (close == std::string_view::npos || text[close] == '[') {
      fail("unclosed SFX tag", open);
      // Lenient: the opening bracket stays literal and scanning resumes after it.
      clean.append(text.substr(open, 1));
      pos = open + 1;
      continue;
    }

    std::string_view body = text.substr(open + kTagOpen.size(), close - open - kTagOpen.size());
    std::size_t at = body.rfind('@');
    pos = close + 1;
    if (at == std::string_view::npos) {
      fail("SFX tag missing '@'", open);
      clean.tag_removed();
      continue;
    }
    std::string_view description = trim(body.substr(0, at));
    std::string_view anchor = trim(body.substr(at + 1));
    if (description.empty()) {
      fail("SFX tag has empty description", open);
      clean.tag_removed();
      continue;
    }
    if (anchor.empty()) {
      fail("SFX tag has empty anchor word", open);
      clean.tag_removed();
      continue;
    }
    if (std::any_of(anchor.begin(), anchor.end(), is_space)) {
      fail("SFX anchor word contains whitespace", open);
      clean.tag_removed();
      continue;
    }

    clean.tag_removed();
    InlineSfx cue;
    cue.description = std::string(description);
    cue.anchor_word = std::string(anchor);
    // The anchor normally precedes its tag, so the last prior match is the
    // one meant; with no prior match the next one is.
    int prior = count_occurrences(clean.text(), normalize_word(anchor));
    cue.occurrence_index = std::max(prior, 1);
    result.cues.push_back(std::move(cue));
  }

  result.clean_text = clean.text();
  return result;
}

std::vector<std::string> spoken_words(std::string_view text, const ParalinguisticLibrary& library) {
  auto clean = parse_inline_sfx(text, /*lenient=*/true).clean_text;
  std::vector<std::string> words;
  for (auto tok : split_ws(clean)) {
    if (is_marker_token(tok)) {
      auto inner = tok.substr(1, tok.size() - 2);
      if (library.contains(inner)) continue;
    }
    words.emplace_back(tok);
  }
  return words;
}

std::string synthesis_text(std::string_view text, const ParalinguisticLibrary& library,
                           bool keep_paralinguistic_markers) {
  auto clean = parse_inline_sfx(text, /*lenient=*/true).clean_text;
  if (keep_paralinguistic_markers) return clean;
  std::string out;
  for (auto tok : split_ws(clean)) {
    if (is_marker_token(tok) && library.contains(tok.substr(1, tok.size() - 2))) continue;
    if (!out.empty()) out.push_back(' ');
    out.append(tok);
  }
  return out;
}

const CharacterSpec* ScriptPlan::find_character(std::string_view id) const {
  for (const auto& c : characters) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

const ParalinguisticLibrary& ParalinguisticLibrary::defaults() {
  static const ParalinguisticLibrary lib({"breath", "laughter", "emphasis", "sigh", "pause"});
  return lib;
}

ParalinguisticLibrary ParalinguisticLibrary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open paralinguistic library " + path.string());
  std::set<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto tok = trim(line);
    if (!tok.empty()) tokens.emplace(tok);
  }
  return ParalinguisticLibrary(std::move(tokens));
}

// ---------------------------------------------------------------------------
// validation

namespace {

std::string idx_ptr(const std::string& base, std::size_t i) { return base + "/" + std::to_string(i); }

void validate_scoped(const std::vector<ScopedAudioEntry>& entries, const std::string& key,
                     std::size_t n_sub, ValidationReport& report) {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    auto base = idx_ptr("/" + key, i);
    if (trim(e.prompt).empty()) report.push_back({base + "/prompt", "prompt is empty"});
    if (e.first < 0 || e.first > e.last || static_cast<std::size_t>(e.last) >= n_sub) {
      report.push_back({base + "/scope", "scope [" + std::to_string(e.first) + "," + std::to_string(e.last) +
                                             "] outside 0 <= first <= last < " + std::to_string(n_sub)});
    }
    if (!(e.relative_volume > 0.0 && e.relative_volume <= 1.0)) {
      report.push_back({base + "/relative_volume", "relative_volume must lie in (0, 1]"});
    }
  }
}

}  // namespace

ValidationReport validate_plan(const ScriptPlan& plan, const ParalinguisticLibrary* library) {
  ValidationReport report;

  std::set<std::string> seen;
  for (std::size_t i = 0; i < plan.characters.size(); ++i) {
    const auto& c = plan.characters[i];
    auto base = idx_ptr("/characters", i);
    if (c.id.empty()) {
      report.push_back({base + "/id", "character id is empty"});
    } else if (!seen.insert(c.id).second) {
      report.push_back({base + "/id", "duplicate character id '" + c.id + "'"});
    }
    if (c.language.empty()) report.push_back({base + "/language", "language tag is empty"});
  }

  for (std::size_t i = 0; i < plan.sub_sentences.size(); ++i) {
    const auto& s = plan.sub_sentences[i];
    auto base = idx_ptr("/sub_sentences", i);

    if (!plan.find_character(s.character_id)) {
      report.push_back({base + "/character_id", "unknown character '" + s.character_id + "'", true});
    }

    if (s.order_index < 0) {
      report.push_back({base + "/order_index", "order_index is negative"});
    } else if (i > 0 && s.order_index <= plan.sub_sentences[i - 1].order_index) {
      report.push_back({base + "/order_index", "order_index not strictly increasing"});
    }

    std::size_t tag_count = 0;
    try {
      auto parsed = parse_inline_sfx(s.text);
      tag_count = parsed.cues.size();
      if (trim(parsed.clean_text).empty()) {
        report.push_back({base + "/text", "text is empty after tag stripping"});
      }
      if (library) {
        for (auto tok : split_ws(parsed.clean_text)) {
          if (is_marker_token(tok) && !library->contains(tok.substr(1, tok.size() - 2))) {
            report.push_back({base + "/text", "unknown paralinguistic marker " + std::string(tok)});
          }
        }
      }
    } catch (const MalformedTag& e) {
      report.push_back({base + "/text", e.what()});
    }

    if (library) {
      for (std::size_t j = 0; j < s.paralinguistic_tokens.size(); ++j) {
        const auto& tok = s.paralinguistic_tokens[j];
        if (!library->contains(tok)) {
          report.push_back({idx_ptr(base + "/paralinguistic_tokens", j),
                            "paralinguistic token '" + tok + "' not in library"});
        }
      }
    }

    if (s.intensity && !std::isfinite(*s.intensity)) {
      report.push_back({base + "/intensity", "intensity must be finite"});
    }

    for (std::size_t j = 0; j < s.sfx_overrides.size(); ++j) {
      const auto& o = s.sfx_overrides[j];
      auto obase = idx_ptr(base + "/sfx_overrides", j);
      if (o.tag_index < 0 || static_cast<std::size_t>(o.tag_index) >= tag_count) {
        report.push_back({obase + "/tag_index", "no inline SFX tag with index " + std::to_string(o.tag_index)});
      }
      if (o.duration && !(*o.duration > 0.0 && std::isfinite(*o.duration))) {
        report.push_back({obase + "/duration", "duration must be positive"});
      }
      if (o.volume && !(*o.volume > 0.0 && *o.volume <= 1.0)) {
        report.push_back({obase + "/volume", "volume must lie in (0, 1]"});
      }
    }
  }

  validate_scoped(plan.ambiance, "ambiance", plan.sub_sentences.size(), report);
  validate_scoped(plan.bgm, "bgm", plan.sub_sentences.size(), report);
  return report;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

const json& member(const json& obj, const char* key, const std::string& ptr) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaViolation(ptr + "/" + key, "missing required field");
  return *it;
}

std::string get_string(const json& obj, const char* key, const std::string& ptr,
                       std::optional<std::string> fallback = std::nullopt) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    throw SchemaViolation(ptr + "/" + key, "missing required field");
  }
  if (!it->is_string()) throw SchemaViolation(ptr + "/" + key, "expected string");
  return it->get<std::string>();
}

int get_int(const json& v, const std::string& ptr) {
  if (!v.is_number_integer()) throw SchemaViolation(ptr, "expected integer");
  auto x = v.get<long long>();
  if (x < INT32_MIN || x > INT32_MAX) throw SchemaViolation(ptr, "integer out of range");
  return static_cast<int>(x);
}

double get_number(const json& v, const std::string& ptr) {
  if (!v.is_number()) throw SchemaViolation(ptr, "expected number");
  return v.get<double>();
}

const json& get_array(const json& obj, const char* key, const std::string& ptr, bool required) {
  static const json empty = json::array();
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) throw SchemaViolation(ptr + "/" + key, "missing required field");
    return empty;
  }
  if (!it->is_array()) throw SchemaViolation(ptr + "/" + key, "expected array");
  return *it;
}

void require_object(const json& v, const std::string& ptr) {
  if (!v.is_object()) throw SchemaViolation(ptr.empty() ? "/" : ptr, "expected object");
}

std::vector<ScopedAudioEntry> parse_scoped(const json& root, const char* key, double default_volume) {
  std::vector<ScopedAudioEntry> out;
  const auto& arr = get_array(root, key, "", false);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    auto ptr = idx_ptr(std::string("/") + key, i);
    const auto& e = arr[i];
    require_object(e, ptr);
    ScopedAudioEntry entry;
    entry.prompt = get_string(e, "prompt", ptr);
    const auto& scope = member(e, "scope", ptr);
    if (!scope.is_array() || scope.size() != 2) throw SchemaViolation(ptr + "/scope", "expected [first, last]");
    entry.first = get_int(scope[0], ptr + "/scope/0");
    entry.last = get_int(scope[1], ptr + "/scope/1");
    auto vol = e.find("relative_volume");
    entry.relative_volume = vol == e.end() ? default_volume : get_number(*vol, ptr + "/relative_volume");
    out.push_back(std::move(entry));
  }
  return out;
}

json scoped_to_json(const std::vector<ScopedAudioEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) {
    arr.push_back({{"prompt", e.prompt}, {"scope", {e.first, e.last}}, {"relative_volume", e.relative_volume}});
  }
  return arr;
}

}  // namespace

ScriptPlan parse_plan(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaViolation("/", std::string("invalid JSON: ") + e.what());
  }
  require_object(root, "");

  const auto& version = member(root, "schema_version", "");
  if (get_int(version, "/schema_version") != kPlanSchemaVersion) {
    throw SchemaViolation("/schema_version", "unsupported schema version");
  }

  ScriptPlan plan;
  plan.source_instruction = get_string(root, "source_instruction", "", "");

  const auto& chars = get_array(root, "characters", "", true);
  for (std::size_t i = 0; i < chars.size(); ++i) {
    auto ptr = idx_ptr("/characters", i);
    const auto& c = chars[i];
    require_object(c, ptr);
    CharacterSpec spec;
    spec.id = get_string(c, "id", ptr);
    spec.display_name = get_string(c, "display_name", ptr, "");
    spec.timbre_description = get_string(c, "timbre_description", ptr, "");
    spec.language = get_string(c, "language", ptr);
    plan.characters.push_back(std::move(spec));
  }

  const auto& subs = get_array(root, "sub_sentences", "", true);
  for (std::size_t i = 0; i < subs.size(); ++i) {
    auto ptr = idx_ptr("/sub_sentences", i);
    const auto& s = subs[i];
    require_object(s, ptr);
    SubSentence sub;
    sub.character_id = get_string(s, "character_id", ptr);
    sub.text = get_string(s, "text", ptr);
    sub.emotion_description = get_string(s, "emotion_description", ptr, "");
    sub.order_index = get_int(member(s, "order_index", ptr), ptr + "/order_index");
    const auto& toks = get_array(s, "paralinguistic_tokens", ptr, false);
    for (std::size_t j = 0; j < toks.size(); ++j) {
      if (!toks[j].is_string()) throw SchemaViolation(idx_ptr(ptr + "/paralinguistic_tokens", j), "expected string");
      sub.paralinguistic_tokens.push_back(toks[j].get<std::string>());
    }
    if (auto it = s.find("emotion_shift"); it != s.end()) {
      if (!it->is_boolean()) throw SchemaViolation(ptr + "/emotion_shift", "expected boolean");
      sub.emotion_shift = it->get<bool>();
    }
    if (auto it = s.find("intensity"); it != s.end() && !it->is_null()) {
      sub.intensity = get_number(*it, ptr + "/intensity");
    }
    const auto& overrides = get_array(s, "sfx_overrides", ptr, false);
    for (std::size_t j = 0; j < overrides.size(); ++j) {
      auto optr = idx_ptr(ptr + "/sfx_overrides", j);
      const auto& o = overrides[j];
      require_object(o, optr);
      SfxOverride ov;
      ov.tag_index = get_int(member(o, "tag_index", optr), optr + "/tag_index");
      if (auto it = o.find("duration"); it != o.end() && !it->is_null()) ov.duration = get_number(*it, optr + "/duration");
      if (auto it = o.find("volume"); it != o.end() && !it->is_null()) ov.volume = get_number(*it, optr + "/volume");
      sub.sfx_overrides.push_back(ov);
    }
    plan.sub_sentences.push_back(std::move(sub));
  }

  plan.ambiance = parse_scoped(root, "ambiance", kDefaultAmbianceVolume);
  plan.bgm = parse_scoped(root, "bgm", kDefaultBgmVolume);

  auto report = validate_plan(plan, nullptr);
  if (!report.empty()) {
    const auto& v = report.front();
    if (v.dangling_reference) throw DanglingReference(v.pointer, v.message);
    throw SchemaViolation(v.pointer, v.message);
  }
  return plan;
}

std::string serialize_plan(const ScriptPlan& plan) {
  json root;
  root["schema_version"] = kPlanSchemaVersion;
  root["source_instruction"] = plan.source_instruction;

  json chars = json::array();
  for (const auto& c : plan.characters) {
    chars.push_back({{"id", c.id},
                     {"display_name", c.display_name},
                     {"timbre_description", c.timbre_description},
                     {"language", c.language}});
  }
  root["characters"] = std::move(chars);

  json subs = json::array();
  for (const auto& s : plan.sub_sentences) {
    json j = {{"character_id", s.character_id},
              {"text", s.text},
              {"emotion_description", s.emotion_description},
              {"paralinguistic_tokens", s.paralinguistic_tokens},
              {"order_index", s.order_index},
              {"emotion_shift", s.emotion_shift}};
    if (s.intensity) j["intensity"] = *s.intensity;
    json overrides = json::array();
    for (const auto& o : s.sfx_overrides) {
      json oj = {{"tag_index", o.tag_index}};
      if (o.duration) oj["duration"] = *o.duration;
      if (o.volume) oj["volume"] = *o.volume;
      overrides.push_back(std::move(oj));
    }
    j["sfx_overrides"] = std::move(overrides);
    subs.push_back(std::move(j));
  }
  root["sub_sentences"] = std::move(subs);
  root["ambiance"] = scoped_to_json(plan.ambiance);
  root["bgm"] = scoped_to_json(plan.bgm);

  return root.dump(2) + "\n";
}

}  // namespace storycast
