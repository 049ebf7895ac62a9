// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "storycast/acms.hpp"
#include "storycast/error.hpp"
#include "support.hpp"

namespace storycast {
namespace {

std::vector<std::string> ids(const std::vector<ModelProfile>& ps) {
  std::vector<std::string> out;
  for (const auto& p : ps) out.push_back(p.model_id);
  return out;
}

TEST(FilterByLanguage, DialectOnlyCosyVoice2) {
  EXPECT_EQ(ids(filter_by_language(ModelRegistry::defaults(), "zh-dialect")), (std::vector<std::string>{"cosyvoice2"}));
}

TEST(FilterByLanguage, EnglishKeepsRegistryOrder) {
  auto r = ModelRegistry::defaults();
  std::vector<std::string> expected;
  for (const auto& p : r.profiles()) {
    if (p.languages.count("en")) expected.push_back(p.model_id);
  }
  EXPECT_EQ(ids(filter_by_language(r, "en")), expected);
  EXPECT_EQ(expected.size(), 5u);
}

TEST(FilterByLanguage, UnknownLanguageAndEmptyRegistry) {
  EXPECT_THROW(filter_by_language(ModelRegistry::defaults(), "xx"), NoCapableModel);
  EXPECT_THROW(filter_by_language(ModelRegistry{}, "en"), NoCapableModel);
}

TEST(SelectModel, AlignedEmotionPicksBestCloner) {
  auto s = select_model(ModelRegistry::defaults(), {"en", "calm", "calm", false, false});
  EXPECT_EQ(s.model_id, "f5-tts");
  EXPECT_EQ(s.rationale, (std::vector<std::string>{"language_filter", "cloning_rank"}));
}

TEST(SelectModel, EmotionShiftPicksMostControllable) {
  auto s = select_model(ModelRegistry::defaults(), {"en", "angry", "calm", true, false});
  EXPECT_EQ(s.model_id, "voxinstruct");
  EXPECT_EQ(s.rationale.back(), "controllability_rank");
}

TEST(SelectModel, EmotionCloneSpecialistWithTopCloningRank) {
  ModelRegistry r;
  r = r.with_profile({"metavoice", {"en"}, 1, 4, false, true, {"en"}});
  r = r.with_profile({"f5-tts", {"en", "zh"}, 2, 5, false, false, {}});
  r = r.with_profile({"voxinstruct", {"en", "zh"}, 5, 1, false, false, {}});
  EXPECT_EQ(select_model(r, {"en", "sad", "sad", false, false}).model_id, "metavoice");
}

TEST(SelectModel, DialectAndParalinguistics) {
  EXPECT_EQ(select_model(ModelRegistry::defaults(), {"zh-dialect", "happy", "calm", true, false}).model_id,
            "cosyvoice2");
  auto s = select_model(ModelRegistry::defaults(), {"en", "happy", "calm", true, true});
  EXPECT_EQ(s.model_id, "cosyvoice2");
  EXPECT_EQ(s.rationale, (std::vector<std::string>{"language_filter", "paralinguistic_filter", "controllability_rank"}));
  EXPECT_THROW(select_model(ModelRegistry::defaults(), {"yue", "x", "x", false, true}), NoCapableModel);
}

TEST(Register, ValueSemanticsAndDuplicates) {
  auto base = ModelRegistry::defaults();
  auto bigger = register_profile(base, {"newtts", {"fr"}, 10, 10, false, false, {}});
  EXPECT_EQ(base.profiles().size(), 5u);
  EXPECT_EQ(bigger.profiles().size(), 6u);
  EXPECT_NE(bigger.find("newtts"), nullptr);
  EXPECT_THROW(register_profile(base, {"f5-tts", {"fr"}, 11, 11, false, false, {}}), DuplicateModelId);
  EXPECT_THROW(register_profile(base, {"other", {"fr"}, 1, 12, false, false, {}}), DuplicateRank);
  EXPECT_THROW(register_profile(base, {"other", {"fr"}, 12, 1, false, false, {}}), DuplicateRank);
}

TEST(Registry, JsonRoundTrip) {
  auto r = ModelRegistry::defaults();
  auto back = ModelRegistry::from_json(r.to_json());
  EXPECT_EQ(back.profiles(), r.profiles());
  testing::TempDir dir;
  testing::spit(dir / "reg.json", r.to_json().dump());
  EXPECT_EQ(ModelRegistry::load(dir / "reg.json").profiles(), r.profiles());
  auto bad = r.to_json();
  bad["profiles"][1]["cloning_rank"] = 1;
  EXPECT_THROW(ModelRegistry::from_json(bad), DuplicateRank);
}

TEST(SelectModelProperty, MatchesOracleSafetyAndMonotonicity) {
  testing::Gen g(3);
  const std::vector<std::string> langs = {"en", "zh", "ja"};
  for (int trial = 0; trial < 300; ++trial) {
    auto reg = testing::random_registry(g, langs);
    SelectionRequest req{g.pick(langs), "a", "b", g.coin(), g.coin()};
    auto expected = testing::oracle_select(reg, req);
    if (expected.empty()) {
      EXPECT_THROW(select_model(reg, req), NoCapableModel);
      continue;
    }
    auto s = select_model(reg, req);
    ASSERT_EQ(s.model_id, expected);
    EXPECT_EQ(select_model(reg, req), s);
    const auto* winner = reg.find(s.model_id);
    EXPECT_TRUE(winner->languages.count(req.language));
    if (req.needs_paralinguistics) {
      EXPECT_TRUE(winner->supports_paralinguistics);
    }

    // Lowering the winner's relevant rank to a fresh smaller value keeps it winning.
    ModelRegistry improved;
    for (auto p : reg.profiles()) {
      if (p.model_id == s.model_id) (req.emotion_shift ? p.controllability_rank : p.cloning_rank) -= 1;
      improved = improved.with_profile(p);
    }
    EXPECT_EQ(select_model(improved, req).model_id, s.model_id);

    // Improving any loser never makes the previous winner lose to a third model.
    const auto& loser = g.pick(reg.profiles());
    if (loser.model_id == s.model_id) continue;
    ModelRegistry boosted;
    for (auto p : reg.profiles()) {
      if (p.model_id == loser.model_id) (req.emotion_shift ? p.controllability_rank : p.cloning_rank) = 2;
      boosted = boosted.with_profile(p);
    }
    auto after = select_model(boosted, req).model_id;
    EXPECT_TRUE(after == s.model_id || after == loser.model_id);
  }
}

}  // namespace
}  // namespace storycast
