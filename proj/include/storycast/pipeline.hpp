// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Stage orchestration: plan -> synthesize -> compose -> mix, plus
// evaluation, correlation and the run manifest. Every stage reads and
// writes files in one output directory so any stage can be rerun alone.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "storycast/backend.hpp"
#include "storycast/cues.hpp"
#include "storycast/evaluator.hpp"
#include "storycast/mixer.hpp"
#include "storycast/prosody.hpp"
#include "storycast/retrieval.hpp"
#include "storycast/script.hpp"
#include "storycast/trace.hpp"

namespace storycast {

struct EndpointBinding {
  std::string kind = "mock";  // mock | http
  std::string url;
  std::string token;
};

inline constexpr std::array<int, 5> kSupportedSampleRates = {16000, 22050, 24000, 44100, 48000};

struct PipelineConfig {
  // "default" plus optional per-endpoint bindings.
  std::map<std::string, EndpointBinding> backends = {{"default", {}}};
  std::optional<std::filesystem::path> mock_fixtures;
  std::optional<std::filesystem::path> registry;
  std::optional<std::filesystem::path> paralinguistic_library;
  std::optional<std::filesystem::path> retrieval_database;
  std::optional<std::filesystem::path> templates;
  int sample_rate = kDefaultSampleRate;
  double mos_threshold = kDefaultMosThreshold;
  int m = 1;
  std::string alpha_mode = "planner";  // planner | fixed
  double alpha = 1.0;                  // fixed value, and fallback when the planner gives none
  IntensityPolicy alpha_policy;
  bool renormalize_embeddings = false;
  double gap = 0.25;
  CueOptions cues;
  MixOptions mix;
  std::size_t parallelism = kDefaultParallelism;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  bool trace = true;

  // JSON with ${VAR} interpolation in strings, then STORYCAST_<KEY>
  // environment overrides. Relative paths resolve against the file's
  // directory. Throws ConfigError.
  static PipelineConfig load(const std::filesystem::path& path);
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
  void validate() const;
  nlohmann::json to_json() const;
};

// Replaces ${NAME} with the environment value; unset names are ConfigError.
std::string interpolate_env(const std::string& text);

// Builds the backend stack described by `config`: mock or HTTP per binding,
// routed per endpoint and wrapped in tracing when `trace` is non-null.
std::shared_ptr<Backend> make_backend(const PipelineConfig& config, std::shared_ptr<TraceLog> trace = nullptr);

struct SynthesizedWindow {
  int index = 0;
  std::string model_id;
  std::string mode;  // reference_audio | description | speaker_embedding
  std::vector<std::string> rationale;
  std::size_t offset_samples = 0;
  std::size_t length_samples = 0;
  std::string text;
};

struct SpeechTiming {
  int sample_rate = kDefaultSampleRate;
  double gap = 0.25;
  std::vector<SynthesizedWindow> windows;
  std::size_t total_samples = 0;

  std::vector<TimeWindow> time_windows() const;
  std::vector<double> offsets() const;
  nlohmann::json to_json() const;
  static SpeechTiming from_json(const nlohmann::json& j);
};

struct ManifestStage {
  std::string stage;
  std::map<std::string, std::string> inputs;   // name -> sha256
  std::map<std::string, std::string> outputs;  // file name -> sha256
  std::string prev;
  std::string digest;
};

// manifest.json: the ordered stage list with a hash chain
//   digest_k = sha256(digest_{k-1} + "\n" + compact({stage, inputs, outputs})).
class Manifest {
 public:
  static Manifest load_or_empty(const std::filesystem::path& dir);
  void append(std::string stage, std::map<std::string, std::string> inputs,
              const std::vector<std::string>& outputs, const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;
  const std::vector<ManifestStage>& stages() const { return stages_; }
  nlohmann::json to_json() const;

  std::uint64_t seed = 0;

 private:
  std::vector<ManifestStage> stages_;
};

// Empty result means every digest and every output file checks out.
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::shared_ptr<Backend> backend);

  // Each stage writes into config.output_dir and appends to the manifest.
  ScriptPlan plan(const std::string& instruction);
  SpeechTiming synthesize(const ScriptPlan& plan);
  CueSheet compose(const ScriptPlan& plan);
  Clip mix();
  void generate(const std::string& instruction);

  // Writes report.json and appends the mean scores, keyed by the audio file
  // stem, to metric.csv.
  EvaluationReport evaluate(const std::filesystem::path& audio, const EvaluateOptions& options);

  const PipelineConfig& config() const { return config_; }
  const ModelRegistry& registry();
  const ParalinguisticLibrary& library() const { return library_; }
  std::filesystem::path out(const std::string& name) const { return config_.output_dir / name; }

 private:
  Clip synthesize_one(const ScriptPlan& plan, std::size_t i, SynthesizedWindow& window);
  std::optional<SpeakerEmbedding> emotional_embedding(const SubSentence& s, const CharacterSpec& c,
                                                      const RetrievalEntry& timbre, const std::string& model_id);
  Clip to_engine_rate(Clip clip) const;
  void record(std::string stage, std::map<std::string, std::string> inputs, const std::vector<std::string>& outputs);

  PipelineConfig config_;
  std::shared_ptr<Backend> backend_;
  ParalinguisticLibrary library_;
  std::optional<RetrievalDatabase> database_;
  std::optional<ModelRegistry> registry_;
  TemplateSet templates_;
};

// The prompt sent to the planner session and the parser for its reply.
std::string planner_prompt(const std::string& instruction, const ParalinguisticLibrary& library);
ScriptPlan parse_planner_reply(const std::string& reply, const ParalinguisticLibrary& library);

// CSV rows "id,quality,naturalness,expressiveness,immersion,overall".
std::string metric_csv_row(const std::string& id, const ScoreVector& s);

}  // namespace storycast
