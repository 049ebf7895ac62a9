// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "oracles.hpp"
#include "storycast/error.hpp"
#include "storycast/evaluator.hpp"
#include "storycast/mock_backend.hpp"
#include "support.hpp"

namespace storycast {
namespace {

std::string block(double q, double n = 4, double e = 4, double i = 3.5, double o = 4) {
  nlohmann::json j = {{"quality", q}, {"naturalness", n}, {"expressiveness", e}, {"immersion", i}, {"overall", o}};
  return "Scores:\n```json\n" + j.dump() + "\n```\n";
}

// Judge-only backend driven by a callback; records every turn.
class ScriptedJudge : public Backend {
 public:
  struct Turn {
    std::string prompt;
    std::vector<std::string> attachments;
    std::string session_id;
  };
  using Reply = std::function<std::string(const Turn&, std::size_t index_in_session)>;

  explicit ScriptedJudge(Reply reply) : reply_(std::move(reply)) {}

  std::string id() const override { return "scripted"; }
  Capabilities capabilities() override { return {}; }
  Clip synthesize(const SynthesisRequest&) override { throw BackendUnavailable("judge only"); }
  Clip generate_audio(const std::string&, double, CueKind) override { throw BackendUnavailable("judge only"); }
  std::vector<double> embed(const std::string&) override { throw BackendUnavailable("judge only"); }
  AlignmentResult align(const std::vector<std::string>&, const Clip&) override { throw BackendUnavailable("judge only"); }
  double predict_mos(const Clip&) override { throw BackendUnavailable("judge only"); }
  SpeakerEmbedding speaker_embed(const std::string&, const Clip&) override { throw BackendUnavailable("judge only"); }
  std::string judge(const std::string& prompt, const std::vector<std::string>& attachments,
                    const std::string& session_id) override {
    Turn t{prompt, attachments, session_id};
    turns.push_back(t);
    return reply_(t, per_session_[session_id]++);
  }

  std::vector<Turn> turns;

 private:
  Reply reply_;
  std::map<std::string, std::size_t> per_session_;
};

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

TEST(Pearson, Examples) {
  std::vector<double> x = {1, 2, 3, 4}, y = {1, 3, 2, 4};
  EXPECT_NEAR(pearson(x, y), 0.8, 1e-12);
  EXPECT_NEAR(pearson(x, x), 1.0, 1e-15);
  std::vector<double> neg = {-1, -2, -3, -4};
  EXPECT_NEAR(pearson(x, neg), -1.0, 1e-15);
  std::vector<double> flat = {2, 2, 2, 2};
  EXPECT_THROW(pearson(x, flat), DegenerateVariance);
  EXPECT_THROW(pearson(flat, x), DegenerateVariance);
  std::vector<double> three = {1, 2, 3}, one = {1};
  EXPECT_THROW(pearson(x, three), InvalidArgument);
  EXPECT_THROW(pearson(one, one), InvalidArgument);
}

TEST(PearsonProperty, OracleSymmetryBoundsAffineInvariance) {
  testing::Gen g(12);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = static_cast<std::size_t>(g.integer(2, 60));
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = trial % 2 ? static_cast<double>(g.integer(1, 5)) : g.real(1, 5);
      y[i] = trial % 2 ? static_cast<double>(g.integer(1, 5)) : g.real(1, 5);
    }
    auto constant = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [&](double a) { return a == v[0]; });
    };
    if (constant(x) || constant(y)) {
      EXPECT_THROW(pearson(x, y), DegenerateVariance);
      continue;
    }
    double want = testing::oracle_pearson(x, y);
    double r = pearson(x, y);
    EXPECT_NEAR(r, want, 1e-12);
    EXPECT_NEAR(pearson(y, x), r, 1e-15);
    EXPECT_LE(std::abs(r), 1.0 + 1e-12);
    double a = g.real(0.1, 10), b = g.real(-10, 10);
    std::vector<double> ax(n), nx(n);
    for (std::size_t i = 0; i < n; ++i) {
      ax[i] = a * x[i] + b;
      nx[i] = -a * x[i] + b;
    }
    EXPECT_NEAR(pearson(ax, y), r, 1e-9);
    EXPECT_NEAR(pearson(nx, y), -r, 1e-9);
  }
}

TEST(ParseScores, LastCompleteBlockWins) {
  std::string text = block(2) + "On reflection:\n" + block(4) + "```json\n{\"quality\": 1}\n```\n";
  auto s = parse_scores(text);
  EXPECT_EQ(s.quality, 4.0);
  EXPECT_EQ(s.immersion, 3.5);
  EXPECT_DOUBLE_EQ(s.four_dimension_mean(), (4 + 4 + 4 + 3.5) / 4);
}

TEST(ParseScores, ClampsWithWarnings) {
  std::vector<std::string> w;
  auto s = parse_scores(block(7, 0.2), &w);
  EXPECT_EQ(s.quality, 5.0);
  EXPECT_EQ(s.naturalness, 1.0);
  EXPECT_EQ(w.size(), 2u);
}

TEST(ParseScores, Malformed) {
  EXPECT_THROW(parse_scores("I liked it. Quality 4."), MalformedResponse);
  EXPECT_THROW(parse_scores("```json\n{\"quality\": 4}\n```"), MalformedResponse);
  EXPECT_THROW(parse_scores("```json\n{\"quality\": \"4\", \"naturalness\": 4, \"expressiveness\": 4, "
                            "\"immersion\": 4, \"overall\": 4}\n```"),
               MalformedResponse);
  EXPECT_THROW(parse_scores("```json\nnot json\n```"), MalformedResponse);
  EXPECT_THROW(parse_scores("```json\n{\"quality\": 4"), MalformedResponse);
}

TEST(StimulusKind, ParseAndCells) {
  auto cells = StimulusKind::all_cells();
  EXPECT_EQ(cells.size(), 12u);
  std::set<std::string> names;
  for (const auto& c : cells) {
    EXPECT_FALSE(c.is_none());
    EXPECT_EQ(StimulusKind::parse(c.to_string()), c);
    names.insert(c.to_string());
  }
  EXPECT_EQ(names.size(), 12u);
  EXPECT_TRUE(StimulusKind::parse("none").is_none());
  EXPECT_EQ(StimulusKind::parse("encouragement/motivation_drive"),
            StimulusKind(Stimulus::kEncouragement, Principle::kMotivationDrive));
  EXPECT_THROW(StimulusKind::parse("praise"), InvalidArgument);
  EXPECT_THROW(StimulusKind::parse("flattery/motivation_drive"), InvalidArgument);
  EXPECT_THROW(StimulusKind(Stimulus::kNone, Principle::kSocialEngagement), InvalidArgument);
  EXPECT_THROW(StimulusKind(Stimulus::kPraise, std::nullopt), InvalidArgument);
  EXPECT_EQ(mode_from_string("one_shot"), Mode::kOneShot);
  EXPECT_THROW(mode_from_string("few_shot"), InvalidArgument);
  for (auto d : kAllDimensions) EXPECT_EQ(dimension_from_string(to_string(d)), d);
}

TEST(Prompts, ReferenceExampleOnlyInOneShotInstructions) {
  auto t = TemplateSet::builtin();
  ReferenceExample ref{"ref.wav", {4, 4, 4, 4, 4}};
  const Stage stages[] = {Stage::kInstructions,  Stage::kSelfUnderstanding, Stage::kInitialEvaluation,
                          Stage::kSelfCritique,  Stage::kMetaJudgement,     Stage::kFinalValidation};
  for (auto stage : stages) {
    auto zero = assemble_prompt(t, stage, {}, Mode::kZeroShot, nullptr, {"a.wav", ""});
    EXPECT_EQ(count_of(zero, "<<reference_example>>"), 0u);
    auto one = assemble_prompt(t, stage, {}, Mode::kOneShot, &ref, {"a.wav", ""});
    EXPECT_EQ(count_of(one, "<<reference_example>>"), stage == Stage::kInstructions ? 1u : 0u);
    EXPECT_EQ(one, assemble_prompt(t, stage, {}, Mode::kOneShot, &ref, {"a.wav", ""}));
  }
  EXPECT_THROW(assemble_prompt(t, Stage::kInstructions, {}, Mode::kOneShot, nullptr), InvalidArgument);
  EXPECT_THROW(assemble_prompt(t, Stage::kInstructions, {}, Mode::kZeroShot, &ref), InvalidArgument);
}

TEST(Prompts, StimulusBlockOnEveryStageButFinal) {
  auto t = TemplateSet::builtin();
  for (const auto& s : StimulusKind::all_cells()) {
    const std::string marker = "<<stimulus " + std::string(to_string(s.kind())) + ":" +
                               std::string(to_string(*s.principle())) + ">>";
    for (auto stage : {Stage::kInstructions, Stage::kInitialEvaluation, Stage::kMetaJudgement}) {
      auto p = assemble_prompt(t, stage, s, Mode::kZeroShot, nullptr);
      EXPECT_EQ(count_of(p, marker), 1u);
      EXPECT_NE(p.find(t.get(TemplateSet::stimulus_name(s))), std::string::npos);
    }
    EXPECT_EQ(count_of(assemble_prompt(t, Stage::kFinalValidation, s, Mode::kZeroShot, nullptr), "<<stimulus"), 0u);
  }
  EXPECT_EQ(count_of(assemble_prompt(t, Stage::kInstructions, {}, Mode::kZeroShot, nullptr), "<<stimulus"), 0u);
  auto with_ctx = assemble_prompt(t, Stage::kInstructions, {}, Mode::kZeroShot, nullptr, {"x.wav", "ctx-line"});
  EXPECT_NE(with_ctx.find("ctx-line"), std::string::npos);
  EXPECT_EQ(with_ctx.find("{{"), std::string::npos);
}

TEST(Templates, MissingAndOverrides) {
  auto t = TemplateSet::builtin();
  EXPECT_THROW(t.get("nope"), TemplateMissing);
  auto s = StimulusKind::parse("sarcasm/social_engagement");
  t.erase(TemplateSet::stimulus_name(s));
  EXPECT_THROW(assemble_prompt(t, Stage::kInstructions, s, Mode::kZeroShot, nullptr), TemplateMissing);

  testing::TempDir dir;
  testing::spit(dir / "initial_evaluation.txt", "CUSTOM {{audio}}");
  auto custom = TemplateSet::from_directory(dir.path());
  EXPECT_EQ(assemble_prompt(custom, Stage::kInitialEvaluation, {}, Mode::kZeroShot, nullptr, {"z.wav", ""}),
            "CUSTOM z.wav");
  auto bare = TemplateSet::from_directory(dir.path(), TemplateSet{});
  EXPECT_EQ(bare.names(), (std::vector<std::string>{"initial_evaluation"}));

  ScriptedJudge judge([](const auto&, std::size_t) { return block(4); });
  EvaluateOptions o;
  o.stimulus = s;
  EXPECT_THROW(evaluate(judge, t, "a.wav", o), TemplateMissing);
}

TEST(Evaluate, MockFixturesAggregate) {
  JudgeFixtures f;
  for (int run = 1; run <= 3; ++run) {
    f.sessions["a.wav|none|zero_shot|run" + std::to_string(run)] = {"I understand.", block(4), block(4), block(4),
                                                                    block(2 + run)};
  }
  MockBackend mock(0, ModelRegistry::defaults(), f);
  auto r = evaluate(mock, TemplateSet::builtin(), "a.wav", {});
  ASSERT_EQ(r.runs.size(), 3u);
  EXPECT_EQ(r.successful_runs(), 3u);
  EXPECT_DOUBLE_EQ(r.mean.quality, 4.0);
  EXPECT_NEAR(r.std.quality, std::sqrt(2.0 / 3.0), 1e-12);
  EXPECT_EQ(r.std.naturalness, 0.0);
  EXPECT_DOUBLE_EQ(r.four_dimension_mean, 3.875);
  for (const auto& run : r.runs) {
    ASSERT_EQ(run.transcripts.size(), 5u);
    for (const auto& t : run.transcripts) EXPECT_FALSE(t.skipped);
  }
  auto j = r.to_json();
  EXPECT_EQ(j["runs"].size(), 3u);
  EXPECT_EQ(j["stimulus"], "none");
}

TEST(Evaluate, SessionsTurnsAndAttachments) {
  ScriptedJudge judge([](const auto&, std::size_t) { return block(4); });
  EvaluateOptions o;
  o.runs = 2;
  o.session_prefix = "p:";
  auto r = evaluate(judge, TemplateSet::builtin(), "clip.wav", o);
  ASSERT_EQ(judge.turns.size(), 10u);
  EXPECT_EQ(r.runs[0].session_id, "p:clip.wav|none|zero_shot|run1");
  EXPECT_NE(r.runs[0].session_id, r.runs[1].session_id);
  for (std::size_t i = 0; i < judge.turns.size(); ++i) {
    EXPECT_EQ(judge.turns[i].session_id, r.runs[i / 5].session_id);
    EXPECT_EQ(judge.turns[i].attachments.size(), i % 5 == 1 ? 1u : 0u);
  }
  EXPECT_EQ(judge.turns[1].attachments[0], "clip.wav");
  const std::vector<std::string> names = {"understanding", "initial", "critique", "meta_judgement", "final"};
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(r.runs[0].transcripts[k].stage, names[k]);
}

TEST(Evaluate, AblationFlagsSkipStages) {
  ScriptedJudge judge([](const auto&, std::size_t i) { return block(static_cast<double>(i + 1)); });
  EvaluateOptions o;
  o.runs = 1;
  o.icsc = false;
  auto r = evaluate(judge, TemplateSet::builtin(), "a.wav", o);
  const auto& t = r.runs[0].transcripts;
  EXPECT_TRUE(t[0].skipped);
  EXPECT_FALSE(t[1].skipped);
  EXPECT_TRUE(t[2].skipped);
  EXPECT_FALSE(t[4].skipped);
  EXPECT_EQ(r.mean.quality, 3.0);

  o.perspective_taking = false;
  ScriptedJudge j2([](const auto&, std::size_t i) { return block(static_cast<double>(i + 1)); });
  auto r2 = evaluate(j2, TemplateSet::builtin(), "a.wav", o);
  EXPECT_EQ(j2.turns.size(), 1u);
  EXPECT_TRUE(r2.runs[0].transcripts[3].skipped);
  EXPECT_TRUE(r2.runs[0].transcripts[4].skipped);
  EXPECT_EQ(r2.mean.quality, 1.0);
}

TEST(Evaluate, ReasksOnceThenFailsRun) {
  ScriptedJudge judge([](const ScriptedJudge::Turn& t, std::size_t i) -> std::string {
    if (t.session_id.ends_with("run1")) return i == 5 ? block(5) : "no scores here";
    if (t.session_id.ends_with("run2")) return "still nothing";
    return block(3);
  });
  auto r = evaluate(judge, TemplateSet::builtin(), "a.wav", {});
  ASSERT_EQ(r.runs.size(), 3u);
  EXPECT_TRUE(r.runs[0].scores.has_value());
  EXPECT_FALSE(r.runs[0].transcripts[4].retry_prompt.empty());
  EXPECT_EQ(r.runs[0].transcripts[4].retry_response, block(5));
  EXPECT_FALSE(r.runs[0].warnings.empty());
  EXPECT_FALSE(r.runs[1].scores.has_value());
  EXPECT_FALSE(r.runs[1].failure.empty());
  EXPECT_EQ(r.successful_runs(), 2u);
  EXPECT_DOUBLE_EQ(r.mean.quality, 4.0);
  EXPECT_EQ(judge.turns.size(), 17u);
}

TEST(Evaluate, AllRunsFailing) {
  ScriptedJudge judge([](const auto&, std::size_t) { return "no"; });
  EXPECT_THROW(evaluate(judge, TemplateSet::builtin(), "a.wav", {}), RunFailure);
  ScriptedJudge down([](const auto&, std::size_t) -> std::string { throw BackendUnavailable("offline"); });
  EXPECT_THROW(evaluate(down, TemplateSet::builtin(), "a.wav", {}), RunFailure);
  EvaluateOptions zero;
  zero.runs = 0;
  EXPECT_THROW(evaluate(down, TemplateSet::builtin(), "a.wav", zero), InvalidArgument);
}

TEST(HumanScores, CsvParsingMeanAndMode) {
  auto h = HumanScores::parse_csv(
      "id,rater,quality,naturalness,expressiveness,immersion,overall\n"
      "a,r1,4,4,3,5,4\n"
      "a,r2,2,4,5,5,4\n"
      "a,r3,2,3,5,1,4\n"
      "b,r1,1,1,1,1,1\n");
  EXPECT_EQ(h.ids(), (std::vector<std::string>{"a", "b"}));
  EXPECT_NEAR(h.mean("a").quality, 8.0 / 3.0, 1e-12);
  EXPECT_EQ(h.mean("b").overall, 1.0);
  auto m = h.mode("a");
  EXPECT_EQ(m.quality, 2.0);
  EXPECT_EQ(m.naturalness, 4.0);
  EXPECT_EQ(m.immersion, 5.0);
  EXPECT_THROW(h.mean("c"), MisalignedScores);

  auto no_rater = HumanScores::parse_csv("id,quality,naturalness,expressiveness,immersion,overall\nx,1,2,3,4,5\n");
  EXPECT_EQ(no_rater.mean("x").immersion, 4.0);

  EXPECT_THROW(HumanScores::parse_csv(""), SchemaViolation);
  EXPECT_THROW(HumanScores::parse_csv("id,quality\nx,1\n"), SchemaViolation);
  EXPECT_THROW(HumanScores::parse_csv("id,quality,naturalness,expressiveness,immersion,overall\nx,1,2,3\n"),
               SchemaViolation);
  EXPECT_THROW(HumanScores::parse_csv("id,quality,naturalness,expressiveness,immersion,overall\nx,1,2,3,4,high\n"),
               SchemaViolation);
}

TEST(ModeOfScores, SmallestWinsTies) {
  std::vector<ScoreVector> s = {{1, 2, 3, 4, 5}, {2, 2, 3, 4, 1}, {2, 3, 4, 5, 1}, {1, 3, 4, 5, 5}};
  auto m = mode_of_scores(s);
  EXPECT_EQ(m, (ScoreVector{1, 2, 3, 4, 1}));
  EXPECT_THROW(mode_of_scores(std::vector<ScoreVector>{}), InvalidArgument);
}

std::map<std::string, ScoreVector> metric_from(const HumanScores& h) {
  std::map<std::string, ScoreVector> m;
  for (const auto& id : h.ids()) m[id] = h.mean(id);
  return m;
}

HumanScores varied_humans() {
  std::vector<HumanRating> rs;
  for (int i = 0; i < 6; ++i) {
    double v = 1.0 + (i * 7 % 5);
    rs.push_back({"clip" + std::to_string(i), "r", {v, 6 - v, v, 1.0 + i % 3, v}});
  }
  return HumanScores(rs);
}

TEST(Correlate, IdenticalScoresGiveOne) {
  auto h = varied_humans();
  auto rows = correlate(metric_from(h), h);
  ASSERT_EQ(rows.size(), 5u);
  for (const auto& r : rows) EXPECT_NEAR(r.r, 1.0, 1e-12);
  auto summary = correlation_summary(rows, 6);
  EXPECT_EQ(count_of(summary, "r=1.000"), 5u);
  EXPECT_NE(summary.find("n = 6"), std::string::npos);
  EXPECT_EQ(correlation_csv(rows).substr(0, 19), "dimension,pearson_r");

  auto extra = metric_from(h);
  extra["ghost"] = {3, 3, 3, 3, 3};
  EXPECT_THROW(correlate(extra, h), MisalignedScores);
}

TEST(Sweep, IdenticalArmsGiveZeroDeltas) {
  auto h = varied_humans();
  auto base = metric_from(h);
  std::vector<std::pair<StimulusKind, std::map<std::string, ScoreVector>>> arms;
  for (const auto& s : StimulusKind::all_cells()) arms.emplace_back(s, base);
  auto rows = sweep_deltas(base, arms, h);
  ASSERT_EQ(rows.size(), 12u);
  for (const auto& r : rows) {
    for (const auto& [d, v] : r.delta) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(r.mean_delta, 0.0);
  }
  auto csv = sweep_csv(rows);
  EXPECT_EQ(count_of(csv, "\n"), 13u);
}

TEST(Sweep, EndToEndWithJudgeAndMisalignment) {
  auto h = varied_humans();
  // Every turn answers with the human scores of the clip named in the session id.
  ScriptedJudge judge([&](const ScriptedJudge::Turn& t, std::size_t) {
    auto id = t.session_id.substr(0, t.session_id.find('|'));
    const auto& s = h.mean(id);
    return block(s.quality, s.naturalness, s.expressiveness, s.immersion, s.overall);
  });
  SweepInput in;
  for (const auto& id : h.ids()) in.audio_set.emplace_back(id, id);
  in.stimuli = {StimulusKind::parse("praise/emotion_regulation"), StimulusKind::parse("criticism/social_engagement")};
  in.options.runs = 1;
  auto rows = stimuli_sweep(judge, TemplateSet::builtin(), in, h);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) EXPECT_NEAR(r.mean_delta, 0.0, 1e-12);
  EXPECT_EQ(judge.turns.size(), 6u * 3u * 5u);

  in.audio_set.emplace_back("missing", "missing");
  EXPECT_THROW(stimuli_sweep(judge, TemplateSet::builtin(), in, h), MisalignedScores);
}

}  // namespace
}  // namespace storycast
