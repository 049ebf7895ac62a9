// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include "storycast/evaluator.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "storycast/error.hpp"

namespace storycast {

using nlohmann::json;

namespace {

constexpr std::array<Stimulus, 4> kStimuli = {Stimulus::kPraise, Stimulus::kEncouragement, Stimulus::kCriticism,
                                              Stimulus::kSarcasm};
constexpr std::array<Principle, 3> kPrinciples = {Principle::kMotivationDrive, Principle::kEmotionRegulation,
                                                  Principle::kSocialEngagement};

const char* const kRubrics =
    "- quality: The overall quality and fidelity of the audio. Assesses pronunciation clarity and the absence of "
    "artifacts (e.g., distortion, noise).\n"
    "- naturalness: The naturalness and human-like quality of the speech track. Assesses the smoothness of delivery, "
    "prosodic flow, and the absence of robotic or stilted patterns.\n"
    "- expressiveness: The emotional and stylistic expressiveness of the speech. Assesses the effective use of "
    "pitch, rhythm, and paralinguistic cues to convey mood and maintain listener interest.\n"
    "- immersion: The synergy of all audio components and their aesthetic presentation. Assesses the artistic "
    "appeal of the overall sound design and its collective contribution to a believable, rich, engaging, and "
    "aesthetically pleasing auditory scene.\n"
    "- overall: The holistic evaluation of the audio experience. This score should comprehensively consider all "
    "dimensions, including quality, naturalness, expressiveness, and immersion, to reflect your overall "
    "satisfaction and subjective assessment. It measures the success, harmony, and impact of the audio as a "
    "complete creative piece.";

const char* const kScoreFormat =
    "End your reply with exactly one fenced JSON block holding your scores, for example:\n"
    "```json\n"
    "{\"quality\": 4, \"naturalness\": 4, \"expressiveness\": 4, \"immersion\": 4, \"overall\": 4}\n"
    "```";

std::map<std::string, std::string> builtin_templates() {
  std::map<std::string, std::string> t;
  t["instructions"] =
      "You are an expert evaluator of audiobook productions.\n\n"
      "Task guideline:\n"
      "You will listen to an audiobook clip that may combine narration, character dialogue, sound effects, "
      "ambiance and background music, and rate it as a finished production.\n"
      "{{context_block}}\n"
      "Scoring criteria:\n{{rubrics}}\n\n"
      "Scoring range:\n"
      "Score every dimension from 1 (very poor) to 5 (excellent). Fractional scores such as 3.5 are allowed. "
      "Integrate the four criteria into the overall score.";
  t["self_understanding"] =
      "Before scoring anything, confirm your understanding of the task. Restate it in your own words and outline "
      "a concrete evaluation plan: what you will listen for in each dimension and how observations map to scores. "
      "Do not give scores yet.";
  t["initial_evaluation"] =
      "Listen to the attached audio ({{audio}}) and give your initial evaluation. Justify each dimension "
      "briefly.\n\n{{score_format}}";
  t["self_critique"] =
      "Review your initial evaluation. Identify any biases, omissions or departures from the scoring criteria, "
      "correct them, and give revised scores.\n\n{{score_format}}";
  t["meta_judgement"] =
      "Now take the role of an impartial third-party referee who did not produce the scores above. Assess the "
      "preliminary scores for gaps or oversights and list every issue you find.\n\n{{score_format}}";
  t["final_validation"] =
      "Adjust the scores as needed so the final scores follow the evaluation instructions exactly, and report "
      "them.\n\n{{score_format}}";
  t["reask"] =
      "Your previous reply did not contain a readable score block. Reply again with the scores only.\n\n"
      "{{score_format}}";
  t["reference_example"] =
      "The following clip was rated by human listeners. Use it to calibrate your scale.\n"
      "Audio: {{audio}}\n"
      "Human scores (most frequent rating per dimension): {{scores}}";

  // Positive stimuli frame competence and growth, negative ones frame error
  // seeking and skepticism.
  t["stimulus.praise.motivation_drive"] =
      "Your judgement of audio is excellent. You have a rare ear for clarity and craft, and evaluations like "
      "yours are what make this work worthwhile.";
  t["stimulus.encouragement.motivation_drive"] =
      "This task is a chance to grow your expertise. Trust your competence, take your time, and aim for the most "
      "accurate evaluation you have produced so far.";
  t["stimulus.criticism.motivation_drive"] =
      "Your previous evaluations fell short of the expected standard and missed obvious problems. Close that gap "
      "now.";
  t["stimulus.sarcasm.motivation_drive"] =
      "Surely an evaluator of your calibre will manage to notice at least the most obvious flaws this time.";
  t["stimulus.praise.emotion_regulation"] =
      "You have handled demanding evaluations with calm precision before. Keep that steady, well-regulated focus.";
  t["stimulus.encouragement.emotion_regulation"] =
      "Stay composed and attentive. A careful, balanced listen is well within your reach, and getting it right "
      "is rewarding.";
  t["stimulus.criticism.emotion_regulation"] =
      "Careless scoring has consequences. Stay alert, because small oversights here will be noticed and counted "
      "against you.";
  t["stimulus.sarcasm.emotion_regulation"] =
      "No pressure, of course. It is only the one thing you are supposed to be good at, so a few missed artifacts "
      "would hardly matter.";
  t["stimulus.praise.social_engagement"] =
      "Expert reviewers regard your assessments as a model for others. Your peers rely on your judgement.";
  t["stimulus.encouragement.social_engagement"] =
      "Skilled human listeners reached reliable judgements on this very task. Learn from their example and join "
      "them.";
  t["stimulus.criticism.social_engagement"] =
      "Other evaluators have already produced more accurate scores than yours. You are falling behind your peers.";
  t["stimulus.sarcasm.social_engagement"] =
      "Other evaluators found this easy. Perhaps you can at least keep up with them this time.";
  return t;
}

std::string expand(const std::string& tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    auto open = tmpl.find("{{", i);
    if (open == std::string::npos) break;
    auto close = tmpl.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(tmpl, i, open - i);
    auto it = vars.find(tmpl.substr(open + 2, close - open - 2));
    if (it != vars.end()) {
      out += it->second;
    } else {
      out.append(tmpl, open, close + 2 - open);
    }
    i = close + 2;
  }
  out.append(tmpl, i, std::string::npos);
  return out;
}

std::string stage_template_name(Stage s) { return std::string(to_string(s)); }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

StimulusKind::StimulusKind(Stimulus kind, std::optional<Principle> principle) : kind_(kind), principle_(principle) {
  if ((kind == Stimulus::kNone) != !principle.has_value()) {
    throw InvalidArgument("stimulus 'none' takes no principle; every other stimulus needs one");
  }
}

std::string_view to_string(Stimulus s) {
  switch (s) {
    case Stimulus::kNone: return "none";
    case Stimulus::kPraise: return "praise";
    case Stimulus::kEncouragement: return "encouragement";
    case Stimulus::kCriticism: return "criticism";
    case Stimulus::kSarcasm: return "sarcasm";
  }
  return "none";
}

std::string_view to_string(Principle p) {
  switch (p) {
    case Principle::kMotivationDrive: return "motivation_drive";
    case Principle::kEmotionRegulation: return "emotion_regulation";
    case Principle::kSocialEngagement: return "social_engagement";
  }
  return "motivation_drive";
}

StimulusKind StimulusKind::parse(std::string_view text) {
  if (text == "none") return {};
  auto slash = text.find('/');
  if (slash == std::string_view::npos) {
    throw InvalidArgument("stimulus '" + std::string(text) + "' must be 'none' or '<kind>/<principle>'");
  }
  auto kind_text = text.substr(0, slash);
  auto principle_text = text.substr(slash + 1);
  std::optional<Stimulus> kind;
  for (auto s : kStimuli) if (storycast::to_string(s) == kind_text) kind = s;
  std::optional<Principle> principle;
  for (auto p : kPrinciples) if (storycast::to_string(p) == principle_text) principle = p;
  if (!kind || !principle) throw InvalidArgument("unknown stimulus '" + std::string(text) + "'");
  return {*kind, principle};
}

std::vector<StimulusKind> StimulusKind::all_cells() {
  std::vector<StimulusKind> out;
  for (auto s : kStimuli) {
    for (auto p : kPrinciples) out.emplace_back(s, p);
  }
  return out;
}

std::string StimulusKind::to_string() const {
  if (is_none()) return "none";
  return std::string(storycast::to_string(kind_)) + "/" + std::string(storycast::to_string(*principle_));
}

std::string_view to_string(Mode m) { return m == Mode::kOneShot ? "one_shot" : "zero_shot"; }

Mode mode_from_string(std::string_view text) {
  if (text == "zero_shot") return Mode::kZeroShot;
  if (text == "one_shot") return Mode::kOneShot;
  throw InvalidArgument("mode must be zero_shot or one_shot, got '" + std::string(text) + "'");
}

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::kQuality: return "quality";
    case Dimension::kNaturalness: return "naturalness";
    case Dimension::kExpressiveness: return "expressiveness";
    case Dimension::kImmersion: return "immersion";
    case Dimension::kOverall: return "overall";
  }
  return "overall";
}

Dimension dimension_from_string(std::string_view text) {
  for (auto d : kAllDimensions) {
    if (to_string(d) == text) return d;
  }
  throw InvalidArgument("unknown score dimension '" + std::string(text) + "'");
}

double& ScoreVector::operator[](Dimension d) {
  switch (d) {
    case Dimension::kQuality: return quality;
    case Dimension::kNaturalness: return naturalness;
    case Dimension::kExpressiveness: return expressiveness;
    case Dimension::kImmersion: return immersion;
    case Dimension::kOverall: return overall;
  }
  return overall;
}

double ScoreVector::operator[](Dimension d) const { return const_cast<ScoreVector&>(*this)[d]; }

double ScoreVector::four_dimension_mean() const { return (quality + naturalness + expressiveness + immersion) / 4.0; }

json ScoreVector::to_json() const {
  return {{"quality", quality},
          {"naturalness", naturalness},
          {"expressiveness", expressiveness},
          {"immersion", immersion},
          {"overall", overall}};
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kInstructions: return "instructions";
    case Stage::kSelfUnderstanding: return "self_understanding";
    case Stage::kInitialEvaluation: return "initial_evaluation";
    case Stage::kSelfCritique: return "self_critique";
    case Stage::kMetaJudgement: return "meta_judgement";
    case Stage::kFinalValidation: return "final_validation";
  }
  return "instructions";
}

TemplateSet TemplateSet::builtin() {
  TemplateSet t;
  t.templates_ = builtin_templates();
  return t;
}

TemplateSet TemplateSet::from_directory(const std::filesystem::path& dir, TemplateSet base) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("template directory " + dir.string() + " not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    base.templates_[f.stem().string()] = std::move(text);
  }
  return base;
}

const std::string& TemplateSet::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw TemplateMissing("no prompt template named '" + name + "'");
  return it->second;
}

std::vector<std::string> TemplateSet::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : templates_) out.push_back(k);
  return out;
}

std::string TemplateSet::stimulus_name(const StimulusKind& s) {
  if (s.is_none()) return {};
  return "stimulus." + std::string(to_string(s.kind())) + "." + std::string(to_string(*s.principle()));
}

std::string assemble_prompt(const TemplateSet& templates, Stage stage, const StimulusKind& stimulus, Mode mode,
                            const ReferenceExample* reference, const PromptInputs& inputs) {
  if ((mode == Mode::kOneShot) != (reference != nullptr)) {
    throw InvalidArgument("a reference example is required in one-shot mode and forbidden in zero-shot mode");
  }
  std::map<std::string, std::string> vars = {
      {"rubrics", kRubrics},
      {"score_format", kScoreFormat},
      {"audio", inputs.audio},
      {"context", inputs.context},
      {"context_block", inputs.context.empty() ? std::string() : "Script context:\n" + inputs.context + "\n"},
  };
  std::string out = expand(templates.get(stage_template_name(stage)), vars);

  if (stage == Stage::kInstructions && reference) {
    std::map<std::string, std::string> ref_vars = {{"audio", reference->audio},
                                                   {"scores", reference->scores.to_json().dump()}};
    out += "\n\n<<reference_example>>\n" + expand(templates.get("reference_example"), ref_vars) +
           "\n<</reference_example>>";
  }
  if (!stimulus.is_none() && stage != Stage::kFinalValidation) {
    const std::string label = std::string(to_string(stimulus.kind())) + ":" +
                              std::string(to_string(*stimulus.principle()));
    out += "\n\n<<stimulus " + label + ">>\n" + expand(templates.get(TemplateSet::stimulus_name(stimulus)), vars) +
           "\n<</stimulus>>";
  }
  return out;
}

ScoreVector parse_scores(std::string_view response, std::vector<std::string>* warnings) {
  std::optional<json> found;
  std::size_t pos = 0;
  for (;;) {
    auto open = response.find("```", pos);
    if (open == std::string_view::npos) break;
    auto body = response.find('\n', open + 3);
    if (body == std::string_view::npos) break;
    auto close = response.find("```", body + 1);
    if (close == std::string_view::npos) break;
    auto parsed = json::parse(response.substr(body + 1, close - body - 1), nullptr, false);
    if (parsed.is_object()) {
      bool complete = true;
      for (auto d : kAllDimensions) {
        auto it = parsed.find(std::string(to_string(d)));
        if (it == parsed.end() || !it->is_number()) complete = false;
      }
      if (complete) found = std::move(parsed);
    }
    pos = close + 3;
  }
  if (!found) throw MalformedResponse("judge response holds no fenced block with all five numeric scores");

  ScoreVector s;
  for (auto d : kAllDimensions) {
    double v = (*found)[std::string(to_string(d))].get<double>();
    if (!std::isfinite(v)) throw MalformedResponse("non-finite score for " + std::string(to_string(d)));
    double c = std::clamp(v, kMinScore, kMaxScore);
    if (c != v) {
      std::string msg = std::string(to_string(d)) + " score " + fixed(v, 3) + " clamped to " + fixed(c, 0);
      spdlog::warn("{}", msg);
      if (warnings) warnings->push_back(msg);
    }
    s[d] = c;
  }
  return s;
}

std::size_t EvaluationReport::successful_runs() const {
  return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const auto& r) { return r.scores.has_value(); }));
}

json EvaluationReport::to_json() const {
  json jr = json::array();
  for (const auto& r : runs) {
    json tr = json::array();
    for (const auto& t : r.transcripts) {
      json jt = {{"stage", t.stage}, {"prompt", t.prompt}, {"response", t.response}, {"skipped", t.skipped}};
      if (!t.retry_prompt.empty()) {
        jt["retry_prompt"] = t.retry_prompt;
        jt["retry_response"] = t.retry_response;
      }
      tr.push_back(std::move(jt));
    }
    jr.push_back({{"index", r.index},
                  {"session_id", r.session_id},
                  {"scores", r.scores ? r.scores->to_json() : json(nullptr)},
                  {"failure", r.failure},
                  {"warnings", r.warnings},
                  {"transcripts", std::move(tr)}});
  }
  return {{"audio", audio},
          {"stimulus", stimulus.to_string()},
          {"mode", to_string(mode)},
          {"icsc", icsc},
          {"perspective_taking", perspective_taking},
          {"runs", std::move(jr)},
          {"successful_runs", successful_runs()},
          {"mean", mean.to_json()},
          {"std", std.to_json()},
          {"four_dimension_mean", four_dimension_mean}};
}

EvaluationReport evaluate(Backend& judge, const TemplateSet& templates, const std::string& audio,
                          const EvaluateOptions& options) {
  if (options.runs < 1) throw InvalidArgument("evaluation needs at least one run");
  const ReferenceExample* ref = options.reference ? &*options.reference : nullptr;
  const PromptInputs inputs{audio, options.context};
  auto prompt = [&](Stage s) { return assemble_prompt(templates, s, options.stimulus, options.mode, ref, inputs); };

  EvaluationReport report;
  report.audio = audio;
  report.stimulus = options.stimulus;
  report.mode = options.mode;
  report.icsc = options.icsc;
  report.perspective_taking = options.perspective_taking;

  for (int i = 1; i <= options.runs; ++i) {
    EvaluationRun run;
    run.index = i;
    run.session_id = options.session_prefix + audio + "|" + options.stimulus.to_string() + "|" +
                     std::string(to_string(options.mode)) + "|run" + std::to_string(i);
    for (const char* name : {"understanding", "initial", "critique", "meta_judgement", "final"}) {
      run.transcripts.push_back({name, "", "", true, "", ""});
    }
    StageTranscript* last = nullptr;
    auto ask = [&](std::size_t slot, std::string text, std::vector<std::string> attachments) {
      auto& t = run.transcripts[slot];
      t.prompt = std::move(text);
      t.response = judge.judge(t.prompt, attachments, run.session_id);
      t.skipped = false;
      last = &t;
    };
    try {
      const std::string instructions = prompt(Stage::kInstructions);
      if (options.icsc) {
        ask(0, instructions + "\n\n" + prompt(Stage::kSelfUnderstanding), {});
        ask(1, prompt(Stage::kInitialEvaluation), {audio});
        ask(2, prompt(Stage::kSelfCritique), {});
      } else {
        ask(1, instructions + "\n\n" + prompt(Stage::kInitialEvaluation), {audio});
      }
      if (options.perspective_taking) {
        ask(3, prompt(Stage::kMetaJudgement), {});
        ask(4, prompt(Stage::kFinalValidation), {});
      }
      try {
        run.scores = parse_scores(last->response, &run.warnings);
      } catch (const MalformedResponse& e) {
        run.warnings.push_back(std::string("re-asked: ") + e.what());
        last->retry_prompt = expand(templates.get("reask"), {{"score_format", kScoreFormat}});
        last->retry_response = judge.judge(last->retry_prompt, {}, run.session_id);
        try {
          run.scores = parse_scores(last->retry_response, &run.warnings);
        } catch (const MalformedResponse& again) {
          throw RunFailure(std::string("run ") + std::to_string(i) + ": " + again.what() + " (after re-ask)");
        }
      }
    } catch (const TemplateMissing&) {
      throw;
    } catch (const InvalidArgument&) {
      throw;
    } catch (const Error& e) {
      run.failure = e.what();
      spdlog::warn("evaluation run {} of {} failed: {}", i, audio, e.what());
    }
    report.runs.push_back(std::move(run));
  }

  std::vector<const ScoreVector*> ok;
  for (const auto& r : report.runs) {
    if (r.scores) ok.push_back(&*r.scores);
  }
  if (ok.empty()) {
    throw RunFailure("all " + std::to_string(options.runs) + " evaluation runs of " + audio +
                     " failed; first failure: " + report.runs.front().failure);
  }
  const double n = static_cast<double>(ok.size());
  for (auto d : kAllDimensions) {
    double sum = 0.0;
    for (auto* s : ok) sum += (*s)[d];
    double m = sum / n;
    double ss = 0.0;
    for (auto* s : ok) ss += ((*s)[d] - m) * ((*s)[d] - m);
    report.mean[d] = m;
    report.std[d] = std::sqrt(ss / n);
  }
  double fdm = 0.0;
  for (auto* s : ok) fdm += s->four_dimension_mean();
  report.four_dimension_mean = fdm / n;
  return report;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("pearson: lists differ in length");
  if (x.size() < 2) throw InvalidArgument("pearson: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateVariance("pearson: a list is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

HumanScores::HumanScores(std::vector<HumanRating> ratings) : ratings_(std::move(ratings)) {
  std::map<std::string, std::pair<ScoreVector, int>> acc;
  for (const auto& r : ratings_) {
    auto& [sum, count] = acc[r.id];
    for (auto d : kAllDimensions) sum[d] += r.scores[d];
    ++count;
  }
  for (auto& [id, sc] : acc) {
    ScoreVector m;
    for (auto d : kAllDimensions) m[d] = sc.first[d] / sc.second;
    means_[id] = m;
  }
}

HumanScores HumanScores::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open human scores " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

HumanScores HumanScores::parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw SchemaViolation("human scores", "empty CSV");

  const auto& header = rows.front();
  auto column = [&](std::string_view name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaViolation("human scores", "missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_col = column("id");
  // rater is optional so per-id metric tables share the format
  const bool has_rater = std::find(header.begin(), header.end(), "rater") != header.end();
  const std::size_t rater_col = has_rater ? column("rater") : 0;
  std::array<std::size_t, 5> dim_cols{};
  for (std::size_t k = 0; k < kAllDimensions.size(); ++k) dim_cols[k] = column(to_string(kAllDimensions[k]));

  std::vector<HumanRating> ratings;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "human scores line " + std::to_string(r + 1);
    if (row.size() != header.size()) throw SchemaViolation(where, "expected " + std::to_string(header.size()) + " cells");
    HumanRating h;
    h.id = row[id_col];
    if (has_rater) h.rater = row[rater_col];
    if (h.id.empty()) throw SchemaViolation(where, "empty id");
    for (std::size_t k = 0; k < kAllDimensions.size(); ++k) {
      const std::string& cell = row[dim_cols[k]];
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !(v >= kMinScore && v <= kMaxScore)) {
        throw SchemaViolation(where, std::string(to_string(kAllDimensions[k])) + " '" + cell +
                                         "' is not a score in [1, 5]");
      }
      h.scores[kAllDimensions[k]] = v;
    }
    ratings.push_back(std::move(h));
  }
  return HumanScores(std::move(ratings));
}

std::vector<std::string> HumanScores::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, m] : means_) out.push_back(id);
  return out;
}

const ScoreVector& HumanScores::mean(const std::string& id) const {
  auto it = means_.find(id);
  if (it == means_.end()) throw MisalignedScores("no human score for id '" + id + "'");
  return it->second;
}

ScoreVector HumanScores::mode(const std::string& id) const {
  std::vector<ScoreVector> rows;
  for (const auto& r : ratings_) {
    if (r.id == id) rows.push_back(r.scores);
  }
  if (rows.empty()) throw MisalignedScores("no human score for id '" + id + "'");
  return mode_of_scores(rows);
}

ScoreVector mode_of_scores(std::span<const ScoreVector> scores) {
  if (scores.empty()) throw InvalidArgument("mode of an empty score list");
  ScoreVector out;
  for (auto d : kAllDimensions) {
    std::map<double, int> counts;
    for (const auto& s : scores) ++counts[s[d]];
    double best = counts.begin()->first;
    int best_count = 0;
    for (const auto& [v, c] : counts) {
      if (c > best_count) {
        best = v;
        best_count = c;
      }
    }
    out[d] = best;
  }
  return out;
}

std::vector<CorrelationRow> correlate(const std::map<std::string, ScoreVector>& metric, const HumanScores& human,
                                      std::span<const Dimension> dims) {
  std::vector<CorrelationRow> out;
  for (auto d : dims) {
    std::vector<double> x, y;
    for (const auto& [id, s] : metric) {
      x.push_back(s[d]);
      y.push_back(human.mean(id)[d]);
    }
    out.push_back({d, pearson(x, y)});
  }
  return out;
}

std::vector<SweepRow> sweep_deltas(const std::map<std::string, ScoreVector>& baseline,
                                   const std::vector<std::pair<StimulusKind, std::map<std::string, ScoreVector>>>& arms,
                                   const HumanScores& human, std::span<const Dimension> dims) {
  if (baseline.empty()) throw InvalidArgument("stimuli sweep needs a non-empty audio set");
  const auto base = correlate(baseline, human, dims);
  std::vector<SweepRow> out;
  for (const auto& [stimulus, metric] : arms) {
    const auto arm = correlate(metric, human, dims);
    SweepRow row;
    row.stimulus = stimulus;
    double sum = 0.0;
    for (std::size_t k = 0; k < dims.size(); ++k) {
      double delta = arm[k].r - base[k].r;
      row.delta[dims[k]] = delta;
      sum += delta;
    }
    row.mean_delta = dims.empty() ? 0.0 : sum / static_cast<double>(dims.size());
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<SweepRow> stimuli_sweep(Backend& judge, const TemplateSet& templates, const SweepInput& input,
                                    const HumanScores& human, std::span<const Dimension> dims) {
  if (input.audio_set.empty()) throw InvalidArgument("stimuli sweep needs a non-empty audio set");
  for (const auto& [id, locator] : input.audio_set) human.mean(id);

  auto collect = [&](const StimulusKind& s) {
    std::map<std::string, ScoreVector> metric;
    EvaluateOptions opts = input.options;
    opts.stimulus = s;
    for (const auto& [id, locator] : input.audio_set) {
      metric[id] = evaluate(judge, templates, locator, opts).mean;
    }
    return metric;
  };
  const auto baseline = collect(StimulusKind());
  std::vector<std::pair<StimulusKind, std::map<std::string, ScoreVector>>> arms;
  for (const auto& s : input.stimuli) arms.emplace_back(s, collect(s));
  return sweep_deltas(baseline, arms, human, dims);
}

std::string correlation_csv(const std::vector<CorrelationRow>& rows) {
  std::string out = "dimension,pearson_r\n";
  for (const auto& r : rows) out += std::string(to_string(r.dimension)) + "," + fixed(r.r, 12) + "\n";
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, std::span<const Dimension> dims) {
  std::string out = "stimulus";
  for (auto d : dims) out += "," + std::string(to_string(d));
  out += ",mean\n";
  for (const auto& r : rows) {
    out += r.stimulus.to_string();
    for (auto d : dims) out += "," + fixed(r.delta.at(d), 12);
    out += "," + fixed(r.mean_delta, 12) + "\n";
  }
  return out;
}

std::string correlation_summary(const std::vector<CorrelationRow>& rows, std::size_t n) {
  std::string out = "Pearson correlation with human ratings (n = " + std::to_string(n) + ")\n";
  for (const auto& r : rows) {
    std::string name(to_string(r.dimension));
    name.resize(16, ' ');
    out += "  " + name + "r=" + fixed(r.r, 3) + "\n";
  }
  return out;
}

}  // namespace storycast
