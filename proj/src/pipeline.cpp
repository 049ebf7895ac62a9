// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include "storycast/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "storycast/digest.hpp"
#include "storycast/error.hpp"
#include "storycast/http.hpp"
#include "storycast/mock_backend.hpp"
#include "storycast/wire.hpp"

namespace storycast {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr int kManifestVersion = 1;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw SchemaViolation(path.string(), e.what());
  }
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

void interpolate_tree(json& j) {
  if (j.is_string()) {
    j = interpolate_env(j.get<std::string>());
  } else if (j.is_structured()) {
    for (auto& child : j) interpolate_tree(child);
  }
}

// Scalar top-level keys that STORYCAST_<KEY> may override.
constexpr std::array<const char*, 14> kOverridable = {
    "mock_fixtures", "registry", "paralinguistic_library", "retrieval_database", "templates", "sample_rate",
    "mos_threshold", "m", "renormalize_embeddings", "gap", "parallelism", "output_dir", "seed", "trace"};

void apply_env_overrides(json& j) {
  for (const char* key : kOverridable) {
    const char* value = std::getenv(("STORYCAST_" + upper(key)).c_str());
    if (!value) continue;
    auto parsed = json::parse(value, nullptr, false);
    j[key] = parsed.is_discarded() || parsed.is_object() || parsed.is_array() ? json(value) : parsed;
  }
  if (const char* url = std::getenv("STORYCAST_BACKEND_URL")) {
    j["backends"]["default"] = {{"kind", "http"}, {"url", url}};
  }
  if (const char* token = std::getenv("STORYCAST_BACKEND_TOKEN")) {
    if (j.contains("backends")) {
      for (auto& [name, b] : j["backends"].items()) b["token"] = token;
    }
  }
}

template <typename T>
T take(const json& j, const char* key, T fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "/" + key + " has the wrong type");
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* s) { return k == s; }) == known.end()) {
      throw ConfigError("unknown config key " + where + "/" + k);
    }
  }
}

std::optional<fs::path> path_at(const json& j, const char* key, const fs::path& base) {
  auto s = take<std::string>(j, key, "", "");
  if (s.empty()) return std::nullopt;
  fs::path p(s);
  return p.is_absolute() ? p : base / p;
}

std::string digest_of(const std::string& text) { return sha256_hex(text); }

std::string stage_digest(const std::string& prev, const ManifestStage& s) {
  json body = {{"stage", s.stage}, {"inputs", s.inputs}, {"outputs", s.outputs}};
  return sha256_hex(prev + "\n" + body.dump());
}

}  // namespace

std::string interpolate_env(const std::string& text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    auto open = text.find("${", i);
    if (open == std::string::npos) break;
    auto close = text.find('}', open + 2);
    if (close == std::string::npos) throw ConfigError("unterminated ${ in config value '" + text + "'");
    out.append(text, i, open - i);
    const std::string name = text.substr(open + 2, close - open - 2);
    const char* value = std::getenv(name.c_str());
    if (!value) throw ConfigError("environment variable " + name + " referenced by the config is not set");
    out += value;
    i = close + 1;
  }
  out.append(text, i, std::string::npos);
  return out;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto base = fs::absolute(path).parent_path();
  return from_json(j, base);
}

PipelineConfig PipelineConfig::from_json(const json& input, const fs::path& base_dir) {
  if (!input.is_object()) throw ConfigError("config root must be an object");
  json j = input;
  interpolate_tree(j);
  apply_env_overrides(j);
  reject_unknown(j,
                 {"backends", "mock_fixtures", "registry", "paralinguistic_library", "retrieval_database", "templates",
                  "sample_rate", "mos_threshold", "m", "alpha", "renormalize_embeddings", "gap", "cues", "mix",
                  "parallelism", "output_dir", "seed", "trace"},
                 "");

  PipelineConfig c;
  if (auto it = j.find("backends"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("/backends must be an object");
    c.backends.clear();
    for (const auto& [name, b] : it->items()) {
      const std::string where = "/backends/" + name;
      if (!b.is_object()) throw ConfigError(where + " must be an object");
      reject_unknown(b, {"kind", "url", "token"}, where);
      EndpointBinding binding;
      binding.kind = take<std::string>(b, "kind", "mock", where);
      binding.url = take<std::string>(b, "url", "", where);
      binding.token = take<std::string>(b, "token", "", where);
      c.backends[name] = binding;
    }
    if (!c.backends.count("default")) c.backends["default"] = {};
  }
  c.mock_fixtures = path_at(j, "mock_fixtures", base_dir);
  c.registry = path_at(j, "registry", base_dir);
  c.paralinguistic_library = path_at(j, "paralinguistic_library", base_dir);
  c.retrieval_database = path_at(j, "retrieval_database", base_dir);
  c.templates = path_at(j, "templates", base_dir);
  c.sample_rate = take<int>(j, "sample_rate", c.sample_rate, "");
  c.mos_threshold = take<double>(j, "mos_threshold", c.mos_threshold, "");
  c.m = take<int>(j, "m", c.m, "");
  c.renormalize_embeddings = take<bool>(j, "renormalize_embeddings", c.renormalize_embeddings, "");
  c.gap = take<double>(j, "gap", c.gap, "");
  c.parallelism = take<std::size_t>(j, "parallelism", c.parallelism, "");
  c.output_dir = take<std::string>(j, "output_dir", c.output_dir.string(), "");
  c.seed = take<std::uint64_t>(j, "seed", c.seed, "");
  c.trace = take<bool>(j, "trace", c.trace, "");

  if (auto it = j.find("alpha"); it != j.end()) {
    reject_unknown(*it, {"mode", "value", "alpha_max", "warn_above"}, "/alpha");
    c.alpha_mode = take<std::string>(*it, "mode", c.alpha_mode, "/alpha");
    c.alpha = take<double>(*it, "value", c.alpha, "/alpha");
    c.alpha_policy.alpha_max = take<double>(*it, "alpha_max", c.alpha_policy.alpha_max, "/alpha");
    c.alpha_policy.warn_above = take<double>(*it, "warn_above", c.alpha_policy.warn_above, "/alpha");
  }
  if (auto it = j.find("cues"); it != j.end()) {
    reject_unknown(*it, {"sfx_duration", "sfx_volume", "lenient_anchors"}, "/cues");
    c.cues.sfx_duration = take<double>(*it, "sfx_duration", c.cues.sfx_duration, "/cues");
    c.cues.sfx_volume = take<double>(*it, "sfx_volume", c.cues.sfx_volume, "/cues");
    c.cues.lenient_anchors = take<bool>(*it, "lenient_anchors", c.cues.lenient_anchors, "/cues");
  }
  if (auto it = j.find("mix"); it != j.end()) {
    reject_unknown(*it, {"bed_fade", "loop_crossfade", "ceiling", "duck_bgm"}, "/mix");
    c.mix.bed_fade = take<double>(*it, "bed_fade", c.mix.bed_fade, "/mix");
    c.mix.loop_crossfade = take<double>(*it, "loop_crossfade", c.mix.loop_crossfade, "/mix");
    c.mix.ceiling = take<double>(*it, "ceiling", c.mix.ceiling, "/mix");
    c.mix.duck_bgm = take<bool>(*it, "duck_bgm", c.mix.duck_bgm, "/mix");
  }
  c.cues.sample_rate = c.sample_rate;
  c.validate();
  return c;
}

void PipelineConfig::validate() const {
  if (std::find(kSupportedSampleRates.begin(), kSupportedSampleRates.end(), sample_rate) ==
      kSupportedSampleRates.end()) {
    throw ConfigError("sample_rate " + std::to_string(sample_rate) +
                      " is not one of 16000, 22050, 24000, 44100, 48000");
  }
  for (const auto& p : {mock_fixtures, registry, paralinguistic_library, retrieval_database, templates}) {
    if (p && !fs::exists(*p)) throw ConfigError("configured path " + p->string() + " does not exist");
  }
  for (const auto& [name, b] : backends) {
    if (b.kind != "mock" && b.kind != "http") throw ConfigError("/backends/" + name + "/kind must be mock or http");
    if (b.kind == "http" && b.url.empty()) throw ConfigError("/backends/" + name + "/url is required for http");
  }
  if (m < 1) throw ConfigError("m must be at least 1");
  if (!(mos_threshold >= 1.0 && mos_threshold <= 5.0)) throw ConfigError("mos_threshold must lie in [1, 5]");
  if (alpha_mode != "fixed" && alpha_mode != "planner") throw ConfigError("/alpha/mode must be fixed or planner");
  if (!(gap >= 0.0)) throw ConfigError("gap must be non-negative");
  if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
  if (!(cues.sfx_duration > 0.0)) throw ConfigError("/cues/sfx_duration must be positive");
  if (!(cues.sfx_volume > 0.0 && cues.sfx_volume <= 1.0)) throw ConfigError("/cues/sfx_volume must lie in (0, 1]");
  if (!(mix.ceiling > 0.0 && mix.ceiling <= 1.0)) throw ConfigError("/mix/ceiling must lie in (0, 1]");
}

json PipelineConfig::to_json() const {
  json b = json::object();
  for (const auto& [name, e] : backends) {
    b[name] = {{"kind", e.kind}, {"url", e.url}, {"token", e.token.empty() ? "" : "<redacted>"}};
  }
  auto p = [](const std::optional<fs::path>& v) { return v ? json(v->string()) : json(nullptr); };
  return {{"backends", b},
          {"mock_fixtures", p(mock_fixtures)},
          {"registry", p(registry)},
          {"paralinguistic_library", p(paralinguistic_library)},
          {"retrieval_database", p(retrieval_database)},
          {"templates", p(templates)},
          {"sample_rate", sample_rate},
          {"mos_threshold", mos_threshold},
          {"m", m},
          {"alpha",
           {{"mode", alpha_mode},
            {"value", alpha},
            {"alpha_max", alpha_policy.alpha_max},
            {"warn_above", alpha_policy.warn_above}}},
          {"renormalize_embeddings", renormalize_embeddings},
          {"gap", gap},
          {"cues",
           {{"sfx_duration", cues.sfx_duration},
            {"sfx_volume", cues.sfx_volume},
            {"lenient_anchors", cues.lenient_anchors}}},
          {"mix",
           {{"bed_fade", mix.bed_fade},
            {"loop_crossfade", mix.loop_crossfade},
            {"ceiling", mix.ceiling},
            {"duck_bgm", mix.duck_bgm}}},
          {"parallelism", parallelism},
          {"output_dir", output_dir.string()},
          {"seed", seed},
          {"trace", trace}};
}

std::shared_ptr<Backend> make_backend(const PipelineConfig& config, std::shared_ptr<TraceLog> trace) {
  std::shared_ptr<MockBackend> mock;
  auto build = [&](const EndpointBinding& b) -> std::shared_ptr<Backend> {
    if (b.kind == "http") {
      HttpOptions o;
      o.base_url = b.url;
      o.bearer_token = b.token;
      return std::make_shared<HttpBackend>(o);
    }
    if (!mock) {
      auto registry = config.registry ? ModelRegistry::load(*config.registry) : ModelRegistry::defaults();
      auto fixtures = config.mock_fixtures ? JudgeFixtures::load(*config.mock_fixtures) : JudgeFixtures{};
      mock = std::make_shared<MockBackend>(config.seed, std::move(registry), std::move(fixtures));
    }
    return mock;
  };
  auto fallback = build(config.backends.at("default"));
  std::map<std::string, std::shared_ptr<Backend>> routes;
  for (const auto& [name, b] : config.backends) {
    if (name != "default") routes[name] = build(b);
  }
  std::shared_ptr<Backend> backend =
      routes.empty() ? fallback : std::make_shared<RoutingBackend>(fallback, std::move(routes));
  if (trace) backend = std::make_shared<TracingBackend>(backend, std::move(trace));
  return backend;
}

std::vector<TimeWindow> SpeechTiming::time_windows() const {
  std::vector<TimeWindow> out;
  for (const auto& w : windows) {
    out.push_back({static_cast<double>(w.offset_samples) / sample_rate,
                   static_cast<double>(w.offset_samples + w.length_samples) / sample_rate});
  }
  return out;
}

std::vector<double> SpeechTiming::offsets() const {
  std::vector<double> out;
  for (const auto& w : windows) out.push_back(static_cast<double>(w.offset_samples) / sample_rate);
  return out;
}

json SpeechTiming::to_json() const {
  json ws = json::array();
  for (const auto& w : windows) {
    ws.push_back({{"index", w.index},
                  {"model_id", w.model_id},
                  {"mode", w.mode},
                  {"rationale", w.rationale},
                  {"offset_samples", w.offset_samples},
                  {"length_samples", w.length_samples},
                  {"text", w.text}});
  }
  return {{"schema_version", 1},
          {"sample_rate", sample_rate},
          {"gap", gap},
          {"total_samples", total_samples},
          {"windows", std::move(ws)}};
}

SpeechTiming SpeechTiming::from_json(const json& j) {
  try {
    SpeechTiming t;
    t.sample_rate = j.at("sample_rate").get<int>();
    t.gap = j.at("gap").get<double>();
    t.total_samples = j.at("total_samples").get<std::size_t>();
    for (const auto& w : j.at("windows")) {
      SynthesizedWindow s;
      s.index = w.at("index").get<int>();
      s.model_id = w.at("model_id").get<std::string>();
      s.mode = w.at("mode").get<std::string>();
      s.rationale = w.at("rationale").get<std::vector<std::string>>();
      s.offset_samples = w.at("offset_samples").get<std::size_t>();
      s.length_samples = w.at("length_samples").get<std::size_t>();
      s.text = w.at("text").get<std::string>();
      t.windows.push_back(std::move(s));
    }
    return t;
  } catch (const json::exception& e) {
    throw SchemaViolation("speech_timing.json", e.what());
  }
}

Manifest Manifest::load_or_empty(const fs::path& dir) {
  Manifest m;
  const auto path = dir / kManifestFile;
  if (!fs::exists(path)) return m;
  auto j = read_json(path);
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("stages")) {
      m.stages_.push_back({s.at("stage").get<std::string>(),
                           s.at("inputs").get<std::map<std::string, std::string>>(),
                           s.at("outputs").get<std::map<std::string, std::string>>(), s.at("prev").get<std::string>(),
                           s.at("digest").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw SchemaViolation(path.string(), e.what());
  }
  return m;
}

void Manifest::append(std::string stage, std::map<std::string, std::string> inputs,
                      const std::vector<std::string>& outputs, const fs::path& dir) {
  ManifestStage s;
  s.stage = std::move(stage);
  s.inputs = std::move(inputs);
  for (const auto& name : outputs) s.outputs[name] = sha256_file(dir / name);
  s.prev = stages_.empty() ? std::string() : stages_.back().digest;
  s.digest = stage_digest(s.prev, s);
  stages_.push_back(std::move(s));
}

json Manifest::to_json() const {
  json st = json::array();
  for (const auto& s : stages_) {
    st.push_back({{"stage", s.stage}, {"inputs", s.inputs}, {"outputs", s.outputs}, {"prev", s.prev}, {"digest", s.digest}});
  }
  return {{"schema_version", kManifestVersion}, {"seed", seed}, {"stages", std::move(st)}};
}

void Manifest::save(const fs::path& dir) const { write_text(dir / kManifestFile, to_json().dump(2) + "\n"); }

std::vector<std::string> verify_manifest(const fs::path& dir) {
  std::vector<std::string> problems;
  Manifest m = Manifest::load_or_empty(dir);
  if (m.stages().empty()) {
    problems.push_back("no manifest stages in " + (dir / kManifestFile).string());
    return problems;
  }
  std::string prev;
  std::map<std::string, std::string> latest;
  for (std::size_t i = 0; i < m.stages().size(); ++i) {
    const auto& s = m.stages()[i];
    const std::string where = "stage " + std::to_string(i) + " (" + s.stage + ")";
    if (s.prev != prev) problems.push_back(where + ": prev digest breaks the chain");
    if (stage_digest(s.prev, s) != s.digest) problems.push_back(where + ": digest does not match its contents");
    prev = s.digest;
    for (const auto& [name, digest] : s.outputs) latest[name] = digest;
  }
  for (const auto& [name, digest] : latest) {
    const auto path = dir / name;
    if (!fs::exists(path)) {
      problems.push_back(name + ": missing");
    } else if (sha256_file(path) != digest) {
      problems.push_back(name + ": content differs from the recorded digest");
    }
  }
  return problems;
}

std::string planner_prompt(const std::string& instruction, const ParalinguisticLibrary& library) {
  std::string tokens;
  for (const auto& t : library.tokens()) tokens += (tokens.empty() ? "" : ", ") + t;
  return "You are the script planner of an audiobook production system.\n"
         "Write a short story for the instruction below, split it into sub-sentences, assign a character and an "
         "emotion description to each, and plan sound effects, ambiance and background music.\n\n"
         "Rules:\n"
         "- Mark sound effects inline as [SFX: description@anchor] right after the anchor word.\n"
         "- Paralinguistic markers may be written inline as [token] using only: " + tokens + ".\n"
         "- Set emotion_shift to true when a sub-sentence needs an emotion different from the character's "
         "neutral reference voice, and give an intensity between 0 and 3 for it.\n"
         "- Ambiance and bgm entries cover inclusive ranges of sub-sentence indices.\n\n"
         "Reply with a single fenced JSON block holding the plan (schema_version 1, see docs/plan-schema.md).\n\n"
         "Instruction:\n" + instruction + "\n";
}

ScriptPlan parse_planner_reply(const std::string& reply, const ParalinguisticLibrary& library) {
  std::string body = reply;
  auto open = reply.find("```");
  if (open != std::string::npos) {
    auto start = reply.find('\n', open);
    auto close = start == std::string::npos ? std::string::npos : reply.find("```", start + 1);
    if (close == std::string::npos) throw SchemaViolation("/", "planner reply has an unterminated fenced block");
    body = reply.substr(start + 1, close - start - 1);
  }
  ScriptPlan plan = parse_plan(body);
  auto report = validate_plan(plan, &library);
  if (!report.empty()) {
    const auto& v = report.front();
    if (v.dangling_reference) throw DanglingReference(v.pointer, v.message);
    throw SchemaViolation(v.pointer, v.message);
  }
  return plan;
}

std::string metric_csv_row(const std::string& id, const ScoreVector& s) {
  std::string row = id;
  for (auto d : kAllDimensions) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ",%.6f", s[d]);
    row += buf;
  }
  return row;
}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<Backend> backend)
    : config_(std::move(config)), backend_(std::move(backend)) {
  config_.validate();
  library_ = config_.paralinguistic_library ? ParalinguisticLibrary::load(*config_.paralinguistic_library)
                                            : ParalinguisticLibrary::defaults();
  if (config_.retrieval_database) database_ = RetrievalDatabase::load(*config_.retrieval_database);
  if (config_.registry) registry_ = ModelRegistry::load(*config_.registry);
  templates_ = config_.templates ? TemplateSet::from_directory(*config_.templates) : TemplateSet::builtin();
  fs::create_directories(config_.output_dir);
}

const ModelRegistry& Pipeline::registry() {
  if (!registry_) {
    auto caps = backend_->capabilities();
    if (caps.protocol_version != kProtocolVersion) {
      throw BackendUnavailable("backend protocol version " + std::to_string(caps.protocol_version));
    }
    registry_ = registry_from(caps);
    if (registry_->empty()) throw NoCapableModel("backend advertises no synthesis models");
  }
  return *registry_;
}

void Pipeline::record(std::string stage, std::map<std::string, std::string> inputs,
                      const std::vector<std::string>& outputs) {
  Manifest m = Manifest::load_or_empty(config_.output_dir);
  m.seed = config_.seed;
  m.append(std::move(stage), std::move(inputs), outputs, config_.output_dir);
  m.save(config_.output_dir);
}

Clip Pipeline::to_engine_rate(Clip clip) const {
  if (clip.sample_rate == config_.sample_rate) return clip;
  return quantize16(resample_linear(clip, config_.sample_rate));
}

ScriptPlan Pipeline::plan(const std::string& instruction) {
  const std::string reply = backend_->judge(planner_prompt(instruction, library_), {}, "planner");
  ScriptPlan p = parse_planner_reply(reply, library_);
  if (p.source_instruction.empty()) p.source_instruction = instruction;
  write_text(out("plan.json"), serialize_plan(p));
  record("plan", {{"instruction", digest_of(instruction)}}, {"plan.json"});
  return p;
}

std::optional<SpeakerEmbedding> Pipeline::emotional_embedding(const SubSentence& s, const CharacterSpec& c,
                                                               const RetrievalEntry& timbre,
                                                               const std::string& model_id) {
  ProsodyQuery q{s.emotion_description, config_.m, config_.mos_threshold, c.language};
  std::vector<EmotionNeutralPair> pairs;
  try {
    pairs = retrieve_prosody_refs(q, *database_, [this](const std::string& t) { return backend_->embed(t); });
  } catch (const InsufficientPairs& e) {
    if (e.found().empty()) {
      spdlog::warn("no emotion/neutral pair for '{}'; falling back to a style description", s.emotion_description);
      return std::nullopt;
    }
    spdlog::warn("{}; using the pairs found", e.what());
    pairs = e.found();
  }

  std::vector<EmotionalDirection> directions;
  for (const auto& p : pairs) {
    auto fe = backend_->speaker_embed(model_id, to_engine_rate(read_wav(p.emotional.audio_uri)));
    auto fn = backend_->speaker_embed(model_id, to_engine_rate(read_wav(p.neutral.audio_uri)));
    directions.push_back(emotional_direction(fe, fn, p.emotional.emotion_label));
  }
  try {
    auto u = unit(average_direction(directions));
    auto f = backend_->speaker_embed(model_id, to_engine_rate(read_wav(timbre.audio_uri)));
    double requested = config_.alpha_mode == "fixed" ? config_.alpha : s.intensity.value_or(config_.alpha);
    auto shifted = apply_emotion(f, u, config_.alpha_policy.resolve(requested));
    return config_.renormalize_embeddings ? renormalize(shifted) : shifted;
  } catch (const ZeroDirection& e) {
    spdlog::warn("emotional direction vanished ({}); falling back to a style description", e.what());
    return std::nullopt;
  }
}

Clip Pipeline::synthesize_one(const ScriptPlan& plan, std::size_t i, SynthesizedWindow& window) {
  const SubSentence& s = plan.sub_sentences[i];
  const CharacterSpec* c = plan.find_character(s.character_id);
  if (!c) throw DanglingReference("/sub_sentences/" + std::to_string(i) + "/character_id", "unknown character");

  const std::string clean = parse_inline_sfx(s.text, config_.cues.lenient_anchors).clean_text;
  const RetrievalEntry* timbre = nullptr;
  if (database_) {
    timbre = retrieve_timbre(backend_->embed(c->timbre_description), *database_, c->language, config_.mos_threshold);
  }

  SelectionRequest sel_req{c->language, s.emotion_description, timbre ? timbre->emotion_label : std::string(),
                           s.emotion_shift, !s.paralinguistic_tokens.empty()};
  Selection sel = select_model(registry(), sel_req);
  const ModelProfile* profile = registry().find(sel.model_id);

  SynthesisRequest req;
  req.model_id = sel.model_id;
  req.language = c->language;
  req.text = synthesis_text(clean, library_, profile->supports_paralinguistics);
  if (profile->supports_paralinguistics) req.paralinguistic_tokens = s.paralinguistic_tokens;

  auto describe = [&] {
    std::string d = c->timbre_description;
    if (!s.emotion_description.empty()) d += (d.empty() ? "" : "; ") + s.emotion_description;
    return d;
  };
  if (s.emotion_shift) {
    std::optional<SpeakerEmbedding> shifted;
    if (timbre && profile->supports_speaker_embedding) {
      shifted = emotional_embedding(s, *c, *timbre, sel.model_id);
    } else {
      spdlog::info("sub-sentence {}: prosody interpolation skipped ({} has no speaker encoder or no timbre match)",
                   i, sel.model_id);
    }
    if (shifted) {
      req.speaker_embedding = std::move(shifted);
      window.mode = "speaker_embedding";
    } else {
      req.description = describe();
      window.mode = "description";
    }
  } else if (timbre) {
    req.reference_audio = timbre->audio_uri;
    window.mode = "reference_audio";
  } else {
    req.description = describe();
    window.mode = "description";
  }

  window.index = static_cast<int>(i);
  window.model_id = sel.model_id;
  window.rationale = sel.rationale;
  window.text = req.text;
  return to_engine_rate(backend_->synthesize(req));
}

SpeechTiming Pipeline::synthesize(const ScriptPlan& plan) {
  const std::size_t n = plan.sub_sentences.size();
  registry();  // resolve once before workers start
  std::vector<Clip> clips(n);
  std::vector<SynthesizedWindow> windows(n);
  parallel_for(n, config_.parallelism, [&](std::size_t i) { clips[i] = synthesize_one(plan, i, windows[i]); });

  SpeechTiming timing;
  timing.sample_rate = config_.sample_rate;
  timing.gap = config_.gap;
  const std::size_t gap = seconds_to_samples(config_.gap, config_.sample_rate);
  Clip speech;
  speech.sample_rate = config_.sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) speech.samples.insert(speech.samples.end(), gap, 0.0);
    windows[i].offset_samples = speech.samples.size();
    windows[i].length_samples = clips[i].samples.size();
    speech.samples.insert(speech.samples.end(), clips[i].samples.begin(), clips[i].samples.end());
  }
  timing.windows = std::move(windows);
  timing.total_samples = speech.samples.size();

  write_wav(out("speech.wav"), speech);
  write_text(out("speech_timing.json"), timing.to_json().dump(2) + "\n");
  record("synthesize", {{"plan", digest_of(serialize_plan(plan))}}, {"speech.wav", "speech_timing.json"});
  return timing;
}

CueSheet Pipeline::compose(const ScriptPlan& plan) {
  const Clip speech = read_wav(out("speech.wav"));
  const SpeechTiming timing = SpeechTiming::from_json(read_json(out("speech_timing.json")));
  if (timing.windows.size() != plan.sub_sentences.size()) {
    throw OffsetCountMismatch("speech_timing.json has " + std::to_string(timing.windows.size()) +
                              " windows for " + std::to_string(plan.sub_sentences.size()) + " sub-sentences");
  }
  if (speech.sample_rate != config_.sample_rate || timing.total_samples != speech.samples.size()) {
    throw RateMismatch("speech.wav does not match speech_timing.json or the engine sample rate");
  }

  const std::size_t n = plan.sub_sentences.size();
  std::vector<AlignmentResult> alignments(n);
  parallel_for(n, config_.parallelism, [&](std::size_t i) {
    const auto& w = timing.windows[i];
    Clip slice;
    slice.sample_rate = speech.sample_rate;
    slice.samples.assign(speech.samples.begin() + static_cast<std::ptrdiff_t>(w.offset_samples),
                         speech.samples.begin() + static_cast<std::ptrdiff_t>(w.offset_samples + w.length_samples));
    const std::string clean = parse_inline_sfx(plan.sub_sentences[i].text, config_.cues.lenient_anchors).clean_text;
    alignments[i] = backend_->align(spoken_words(clean, library_), slice);
  });

  WordTimestampMap map = build_word_map(alignments, timing.offsets());
  map.total_duration = static_cast<double>(speech.samples.size()) / speech.sample_rate;
  const auto windows = timing.time_windows();
  CueOptions opts = config_.cues;
  opts.sample_rate = config_.sample_rate;
  CueSheet sheet = compile_cue_sheet(plan, map, windows, opts);
  const std::string cues_text = serialize_cue_sheet(sheet);
  write_text(out("cues.json"), cues_text);
  // Assets are generated from the canonical file so their lengths match
  // exactly what the mixer will read back.
  sheet = parse_cue_sheet(cues_text);

  const auto cues = sheet.all_cues();
  std::vector<std::string> outputs = {"cues.json", "assets.json"};
  json assets = json::object();
  for (const Cue* c : cues) {
    assets[c->id] = "assets/" + c->id + ".wav";
    outputs.push_back("assets/" + c->id + ".wav");
  }
  fs::create_directories(out("assets"));
  parallel_for(cues.size(), config_.parallelism, [&](std::size_t k) {
    const Cue& c = *cues[k];
    Clip clip = to_engine_rate(backend_->generate_audio(c.prompt, c.end_time - c.start_time, c.kind));
    write_wav(out("assets/" + c.id + ".wav"), clip);
  });
  write_text(out("assets.json"), json{{"schema_version", 1}, {"assets", assets}}.dump(2) + "\n");
  record("compose",
         {{"plan", digest_of(serialize_plan(plan))},
          {"speech.wav", sha256_file(out("speech.wav"))},
          {"speech_timing.json", sha256_file(out("speech_timing.json"))}},
         outputs);
  return sheet;
}

Clip Pipeline::mix() {
  const CueSheet sheet = parse_cue_sheet(read_text(out("cues.json")));
  const Clip speech = read_wav(out("speech.wav"));
  AssetMap assets;
  const auto manifest = read_json(out("assets.json"));
  try {
    for (const auto& [id, rel] : manifest.at("assets").items()) {
      assets[id] = read_wav(out(rel.get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw SchemaViolation("assets.json", e.what());
  }
  Clip master = render(sheet, assets, speech, config_.mix);
  write_wav(out("master.wav"), master);
  std::map<std::string, std::string> inputs = {{"cues.json", sha256_file(out("cues.json"))},
                                                {"speech.wav", sha256_file(out("speech.wav"))},
                                                {"assets.json", sha256_file(out("assets.json"))}};
  record("mix", std::move(inputs), {"master.wav"});
  return master;
}

void Pipeline::generate(const std::string& instruction) {
  fs::remove(out(kManifestFile));
  ScriptPlan p = plan(instruction);
  synthesize(p);
  compose(p);
  mix();
}

EvaluationReport Pipeline::evaluate(const fs::path& audio, const EvaluateOptions& options) {
  if (!fs::exists(audio)) throw IoError("audio " + audio.string() + " not found");
  EvaluationReport report = storycast::evaluate(*backend_, templates_, audio.filename().string(), options);
  write_text(out("report.json"), report.to_json().dump(2) + "\n");
  const auto metric = out("metric.csv");
  std::string rows = fs::exists(metric) ? read_text(metric) : "id,quality,naturalness,expressiveness,immersion,overall\n";
  write_text(metric, rows + metric_csv_row(audio.stem().string(), report.mean) + "\n");
  record("evaluate", {{"audio", sha256_file(audio)}, {"context", digest_of(options.context)}},
         {"report.json", "metric.csv"});
  return report;
}

}  // namespace storycast
