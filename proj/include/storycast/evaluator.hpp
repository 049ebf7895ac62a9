// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Judge-driven audio evaluation: prompt templates with emotional stimuli,
// the multi-stage per-run exchange, score aggregation, correlation with
// human ratings and the stimulus ablation sweep.

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "storycast/backend.hpp"

namespace storycast {

enum class Stimulus { kNone, kPraise, kEncouragement, kCriticism, kSarcasm };
enum class Principle { kMotivationDrive, kEmotionRegulation, kSocialEngagement };

class StimulusKind {
 public:
  StimulusKind() = default;  // none
  // Throws InvalidArgument unless (kind == none) == !principle.
  StimulusKind(Stimulus kind, std::optional<Principle> principle);

  // "none" or "<kind>/<principle>", e.g. "encouragement/motivation_drive".
  static StimulusKind parse(std::string_view text);
  static std::vector<StimulusKind> all_cells();  // the 12 non-none kinds

  Stimulus kind() const { return kind_; }
  std::optional<Principle> principle() const { return principle_; }
  bool is_none() const { return kind_ == Stimulus::kNone; }
  std::string to_string() const;
  bool operator==(const StimulusKind&) const = default;

 private:
  Stimulus kind_ = Stimulus::kNone;
  std::optional<Principle> principle_;
};

std::string_view to_string(Stimulus s);
std::string_view to_string(Principle p);

enum class Mode { kZeroShot, kOneShot };
std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view text);

enum class Dimension { kQuality, kNaturalness, kExpressiveness, kImmersion, kOverall };
inline constexpr std::array<Dimension, 5> kAllDimensions = {Dimension::kQuality, Dimension::kNaturalness,
                                                            Dimension::kExpressiveness, Dimension::kImmersion,
                                                            Dimension::kOverall};
std::string_view to_string(Dimension d);
Dimension dimension_from_string(std::string_view text);

inline constexpr double kMinScore = 1.0;
inline constexpr double kMaxScore = 5.0;

struct ScoreVector {
  double quality = 0.0;
  double naturalness = 0.0;
  double expressiveness = 0.0;
  double immersion = 0.0;
  double overall = 0.0;

  double& operator[](Dimension d);
  double operator[](Dimension d) const;
  // Arithmetic mean of the four non-overall dimensions.
  double four_dimension_mean() const;
  nlohmann::json to_json() const;
  bool operator==(const ScoreVector&) const = default;
};

enum class Stage { kInstructions, kSelfUnderstanding, kInitialEvaluation, kSelfCritique, kMetaJudgement, kFinalValidation };
std::string_view to_string(Stage s);

// Human-rated sample shown to the judge in one-shot mode.
struct ReferenceExample {
  std::string audio;
  ScoreVector scores;
};

// Named prompt templates. Placeholders are written {{name}}; see
// docs/templates.md for the names and the placeholder list.
class TemplateSet {
 public:
  static TemplateSet builtin();
  // Files "<name>.txt" in `dir` replace (or, with base = empty, define) templates.
  static TemplateSet from_directory(const std::filesystem::path& dir, TemplateSet base = builtin());

  const std::string& get(const std::string& name) const;  // throws TemplateMissing
  void set(const std::string& name, std::string text) { templates_[name] = std::move(text); }
  void erase(const std::string& name) { templates_.erase(name); }
  std::vector<std::string> names() const;

  static std::string stimulus_name(const StimulusKind& s);  // "stimulus.<kind>.<principle>"

 private:
  std::map<std::string, std::string> templates_;
};

struct PromptInputs {
  std::string audio;    // locator of the clip under evaluation
  std::string context;  // transcript or plan digest
};

// Pure function of its arguments. `reference` must be given exactly when
// mode is one-shot (InvalidArgument otherwise).
std::string assemble_prompt(const TemplateSet& templates, Stage stage, const StimulusKind& stimulus, Mode mode,
                            const ReferenceExample* reference, const PromptInputs& inputs = {});

// Takes the last fenced block holding all five scores. Out-of-range values
// are clamped and reported through `warnings`. Throws MalformedResponse.
ScoreVector parse_scores(std::string_view response, std::vector<std::string>* warnings = nullptr);

struct StageTranscript {
  std::string stage;  // understanding | initial | critique | meta_judgement | final
  std::string prompt;
  std::string response;
  bool skipped = false;
  // Set when the scoring turn had to be asked a second time.
  std::string retry_prompt;
  std::string retry_response;
};

struct EvaluationRun {
  int index = 0;
  std::string session_id;
  std::optional<ScoreVector> scores;
  std::vector<StageTranscript> transcripts;  // always 5 entries, fixed order
  std::vector<std::string> warnings;
  std::string failure;  // non-empty when the run failed
};

struct EvaluationReport {
  std::string audio;
  StimulusKind stimulus;
  Mode mode = Mode::kZeroShot;
  bool icsc = true;
  bool perspective_taking = true;
  std::vector<EvaluationRun> runs;
  ScoreVector mean;
  ScoreVector std;                 // population standard deviation
  double four_dimension_mean = 0;  // mean over runs of each run's four-dimension mean

  std::size_t successful_runs() const;
  nlohmann::json to_json() const;
};

struct EvaluateOptions {
  int runs = 3;
  StimulusKind stimulus;
  Mode mode = Mode::kZeroShot;
  std::optional<ReferenceExample> reference;
  bool icsc = true;
  bool perspective_taking = true;
  std::string context;
  std::string session_prefix;
};

// One fresh judge session per run; runs execute sequentially. Throws
// RunFailure when no run yields scores.
EvaluationReport evaluate(Backend& judge, const TemplateSet& templates, const std::string& audio,
                          const EvaluateOptions& options);

// Product-moment correlation. Throws InvalidArgument on length mismatch or
// fewer than two points, DegenerateVariance when either list is constant.
double pearson(std::span<const double> x, std::span<const double> y);

struct HumanRating {
  std::string id;
  std::string rater;
  ScoreVector scores;
};

class HumanScores {
 public:
  // Columns: id, rater, quality, naturalness, expressiveness, immersion, overall.
  // The rater column may be omitted.
  static HumanScores load_csv(const std::filesystem::path& path);
  static HumanScores parse_csv(std::string_view text);
  explicit HumanScores(std::vector<HumanRating> ratings = {});

  const std::vector<HumanRating>& ratings() const { return ratings_; }
  std::vector<std::string> ids() const;
  // Per-id mean over raters. Throws MisalignedScores for unknown ids.
  const ScoreVector& mean(const std::string& id) const;
  // Per-dimension mode over raters (smallest value wins ties).
  ScoreVector mode(const std::string& id) const;

 private:
  std::vector<HumanRating> ratings_;
  std::map<std::string, ScoreVector> means_;
};

ScoreVector mode_of_scores(std::span<const ScoreVector> scores);

struct CorrelationRow {
  Dimension dimension;
  double r;
};

// Correlates metric means with human means over the ids in `metric`.
// Throws MisalignedScores when a metric id has no human rating.
std::vector<CorrelationRow> correlate(const std::map<std::string, ScoreVector>& metric, const HumanScores& human,
                                      std::span<const Dimension> dims = kAllDimensions);

struct SweepRow {
  StimulusKind stimulus;
  std::map<Dimension, double> delta;
  double mean_delta = 0.0;
};

// Per-stimulus correlation minus the baseline correlation, per dimension,
// plus the mean across dimensions.
std::vector<SweepRow> sweep_deltas(const std::map<std::string, ScoreVector>& baseline,
                                   const std::vector<std::pair<StimulusKind, std::map<std::string, ScoreVector>>>& arms,
                                   const HumanScores& human, std::span<const Dimension> dims = kAllDimensions);

struct SweepInput {
  std::vector<std::pair<std::string, std::string>> audio_set;  // (id, locator)
  std::vector<StimulusKind> stimuli = StimulusKind::all_cells();
  EvaluateOptions options;
};

// Evaluates every clip under the baseline and each stimulus, then computes
// the delta table.
std::vector<SweepRow> stimuli_sweep(Backend& judge, const TemplateSet& templates, const SweepInput& input,
                                    const HumanScores& human, std::span<const Dimension> dims = kAllDimensions);

std::string correlation_csv(const std::vector<CorrelationRow>& rows);
std::string sweep_csv(const std::vector<SweepRow>& rows, std::span<const Dimension> dims = kAllDimensions);
std::string correlation_summary(const std::vector<CorrelationRow>& rows, std::size_t n);

}  // namespace storycast
