// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>

#include "storycast/audio.hpp"
#include "storycast/error.hpp"
#include "storycast/mixer.hpp"
#include "support.hpp"

namespace storycast {
namespace {

using testing::constant;
using testing::Gen;
using testing::impulse;

std::vector<std::uint8_t> wav_header(int channels, int rate, int bits, int format, std::uint32_t data_bytes) {
  std::vector<std::uint8_t> b;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto u16 = [&](std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  auto tag = [&](const char* t) { b.insert(b.end(), t, t + 4); };
  tag("RIFF");
  u32(36 + data_bytes);
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(static_cast<std::uint16_t>(format));
  u16(static_cast<std::uint16_t>(channels));
  u32(static_cast<std::uint32_t>(rate));
  u32(static_cast<std::uint32_t>(rate * channels * bits / 8));
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(static_cast<std::uint16_t>(bits));
  tag("data");
  u32(data_bytes);
  return b;
}

TEST(Wav, SixteenBitRoundTrip) {
  Gen g(1);
  Clip c;
  c.sample_rate = 22050;
  for (int i = 0; i < 100; ++i) c.samples.push_back(g.integer(-32768, 32767) / 32768.0);
  EXPECT_EQ(decode_wav(encode_wav(c)), c);
  EXPECT_EQ(quantize16(c), c);
}

TEST(Wav, StereoAveragedAndFloatDecoded) {
  auto b = wav_header(2, 24000, 16, 1, 8);
  for (int i = 0; i < 2; ++i) {
    std::int16_t l = 16384, r = -16384;
    b.push_back(static_cast<std::uint8_t>(l));
    b.push_back(static_cast<std::uint8_t>(l >> 8));
    b.push_back(static_cast<std::uint8_t>(r));
    b.push_back(static_cast<std::uint8_t>(r >> 8));
  }
  auto c = decode_wav(b);
  EXPECT_EQ(c.samples, (std::vector<double>{0.0, 0.0}));

  auto f = wav_header(1, 16000, 32, 3, 8);
  for (float v : {0.25f, -0.75f}) {
    std::uint8_t raw[4];
    std::memcpy(raw, &v, 4);
    f.insert(f.end(), raw, raw + 4);
  }
  auto fc = decode_wav(f);
  EXPECT_EQ(fc.sample_rate, 16000);
  EXPECT_EQ(fc.samples, (std::vector<double>{0.25, -0.75}));
}

TEST(Wav, CorruptAndUnsupported) {
  auto good = encode_wav(constant(0.5, 10));
  std::vector<std::uint8_t> truncated(good.begin(), good.begin() + 20);
  EXPECT_THROW(decode_wav(truncated), CorruptHeader);
  auto b = wav_header(1, 24000, 24, 1, 3);
  b.insert(b.end(), {0, 0, 0});
  EXPECT_THROW(decode_wav(b), UnsupportedFormat);
  std::vector<std::uint8_t> junk(64, 'x');
  EXPECT_THROW(decode_wav(junk), CorruptHeader);
}

TEST(Resample, IdentityAndLength) {
  auto c = constant(0.25, 24000);
  EXPECT_EQ(resample_linear(c, 24000), c);
  auto r = resample_linear(c, 48000);
  EXPECT_EQ(r.sample_rate, 48000);
  EXPECT_NEAR(static_cast<double>(r.samples.size()), 48000.0, 1.0);
  for (double x : r.samples) EXPECT_NEAR(x, 0.25, 1e-15);
}

TEST(Place, ImpulseSilenceAndSuperposition) {
  Timeline t(48000, 24000);
  place(t, impulse(), {1.0, 1.0});
  for (std::size_t i = 0; i < t.length(); ++i) EXPECT_EQ(t.samples()[i], i == 24000 ? 1.0 : 0.0);

  Timeline s(1000, 24000);
  place(s, constant(0.0, 500), {0.01, 1.0});
  for (double x : s.samples()) EXPECT_EQ(x, 0.0);

  Gen g(2);
  Clip clip;
  for (int i = 0; i < 700; ++i) clip.samples.push_back(g.real(-1, 1));
  Timeline a(1000, 24000), b(1000, 24000);
  place(a, clip, {0, 0.3});
  place(a, clip, {0, 0.7});
  place(b, clip, {0, 1.0});
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_NEAR(a.samples()[i], b.samples()[i], 1e-12);

  Timeline r(10, 16000);
  EXPECT_THROW(place(r, clip, {}), RateMismatch);
}

TEST(Place, FadesAndTruncation) {
  Timeline t(100, 1000);
  place(t, constant(1.0, 50, 1000), {0.08, 1.0, 0.01, 0.01});
  EXPECT_EQ(t.samples()[80], 0.0);
  EXPECT_NEAR(t.samples()[85], 0.5, 1e-12);
  EXPECT_EQ(t.samples()[90], 1.0);
  EXPECT_EQ(t.samples()[99], 1.0);
}

TEST(PeakNormalize, Cases) {
  auto quiet = constant(0.5, 10);
  EXPECT_EQ(peak_normalize(quiet, 0.999), quiet);
  Clip loud{{2.0, -1.0, 0.5}, 24000};
  EXPECT_EQ(peak_normalize(loud, 1.0).samples, (std::vector<double>{1.0, -0.5, 0.25}));
  auto zero = constant(0.0, 5);
  EXPECT_EQ(peak_normalize(zero, 0.999), zero);
}

CueSheet sheet_over(double total) {
  CueSheet s;
  s.total_duration = total;
  return s;
}

TEST(Render, EmptySheetIsSpeech) {
  Gen g(3);
  Clip speech;
  for (int i = 0; i < 24000; ++i) speech.samples.push_back(g.integer(-20000, 20000) / 32768.0);
  auto out = render(sheet_over(1.0), {}, speech);
  EXPECT_EQ(out, speech);
  EXPECT_EQ(encode_wav(out), encode_wav(speech));
}

TEST(Render, AmbiancePlateau) {
  auto s = sheet_over(4.0);
  s.ambiance_cues = {{"ambiance-001", CueKind::kAmbiance, "hum", 1.0, 3.0, 2.0, 0.5, std::nullopt}};
  AssetMap assets = {{"ambiance-001", constant(0.2, 12000)}};
  auto out = render(s, assets, constant(0.0, 96000));
  const auto& x = out.samples;
  for (std::size_t i = 0; i < 24000; ++i) ASSERT_EQ(x[i], 0.0);
  for (std::size_t i = 24000 + 1200; i < 72000 - 1200; ++i) ASSERT_NEAR(x[i], 0.1, 1e-6) << i;
  for (std::size_t i = 72000; i < 96000; ++i) ASSERT_EQ(x[i], 0.0);
}

TEST(Render, ErrorsAndPeakCeiling) {
  auto s = sheet_over(1.0);
  s.sfx_cues = {{"sfx-001", CueKind::kSfx, "bang", 0.1, 0.5, 0.4, 1.0, std::nullopt}};
  EXPECT_THROW(render(s, {}, constant(0.0, 24000)), MissingAsset);
  AssetMap wrong = {{"sfx-001", constant(1.0, 100, 16000)}};
  EXPECT_THROW(render(s, wrong, constant(0.0, 24000)), RateMismatch);
  AssetMap loud = {{"sfx-001", constant(1.0, 24000)}};
  auto out = render(s, loud, constant(0.9, 24000));
  EXPECT_LE(peak(out), 0.999);
  EXPECT_NEAR(peak(out), 0.999, 1e-15);
  EXPECT_THROW(render(s, loud, constant(0.0, 30000)), SchemaViolation);
}

TEST(Render, DuckingLowersBgmUnderSpeech) {
  auto s = sheet_over(1.0);
  s.bgm_cues = {{"bgm-001", CueKind::kBgm, "m", 0.0, 1.0, 1.0, 1.0, std::nullopt}};
  AssetMap assets = {{"bgm-001", constant(0.1, 24000)}};
  Clip speech = constant(0.0, 24000);
  for (std::size_t i = 0; i < 12000; ++i) speech.samples[i] = 0.01;
  MixOptions duck;
  duck.duck_bgm = true;
  auto plain = mix(s, assets, speech).samples();
  auto ducked = mix(s, assets, speech, duck).samples();
  EXPECT_NEAR(ducked[6000] - 0.01, (plain[6000] - 0.01) * 0.5011872336272722, 1e-12);
  EXPECT_EQ(ducked[18000], plain[18000]);
}

TEST(FitToLength, LoopKeepsConstantLevel) {
  auto looped = fit_to_length(constant(0.3, 1000), 3500, CueKind::kAmbiance, 0.005);
  ASSERT_EQ(looped.samples.size(), 3500u);
  for (double x : looped.samples) EXPECT_NEAR(x, 0.3, 1e-12);
  EXPECT_EQ(fit_to_length(constant(0.3, 1000), 300, CueKind::kSfx, 0.05).samples.size(), 300u);
  EXPECT_EQ(fit_to_length(constant(0.3, 100), 300, CueKind::kSfx, 0.05).samples.size(), 100u);
}

TEST(MixerProperty, PlacementSuperpositionShuffle) {
  Gen g(99);
  for (int trial = 0; trial < 100; ++trial) {
    const double total = 2.0;
    auto s = sheet_over(total);
    double t = g.real(0.0, 1.9);
    s.sfx_cues = {{"sfx-001", CueKind::kSfx, "click", t, total, total - t, 1.0, std::nullopt}};
    AssetMap assets = {{"sfx-001", impulse()}};
    auto out = mix(s, assets, constant(0.0, 48000)).samples();
    auto expected = static_cast<std::size_t>(std::llround(t * 24000));
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out[i] != 0.0, i == expected) << t;
  }

  for (int trial = 0; trial < 20; ++trial) {
    auto a = sheet_over(1.0), b = sheet_over(1.0), both = sheet_over(1.0), none = sheet_over(1.0);
    AssetMap assets;
    for (int i = 0; i < 8; ++i) {
      double st = g.real(0.0, 0.8);
      double en = g.real(st + 0.01, 1.0);
      CueKind kind = std::vector<CueKind>{CueKind::kSfx, CueKind::kAmbiance, CueKind::kBgm}[i % 3];
      Cue c{"c" + std::to_string(i), kind, "p", st, en, en - st, g.real(0.05, 1.0), std::nullopt};
      Clip asset;
      for (int k = g.integer(1, 9000); k > 0; --k) asset.samples.push_back(g.real(-0.5, 0.5));
      assets[c.id] = asset;
      auto& target = (i % 2 ? a : b);
      auto push = [&](CueSheet& sh) {
        (kind == CueKind::kSfx ? sh.sfx_cues : kind == CueKind::kAmbiance ? sh.ambiance_cues : sh.bgm_cues).push_back(c);
      };
      push(target);
      push(both);
    }
    Clip speech;
    for (int k = 0; k < 24000; ++k) speech.samples.push_back(g.real(-0.3, 0.3));
    auto ma = mix(a, assets, speech).samples(), mb = mix(b, assets, speech).samples();
    auto mboth = mix(both, assets, speech).samples(), mnone = mix(none, assets, speech).samples();
    for (std::size_t i = 0; i < mboth.size(); ++i) ASSERT_NEAR(mboth[i] + mnone[i], ma[i] + mb[i], 1e-12);

    auto shuffled = both;
    g.shuffle(shuffled.sfx_cues);
    g.shuffle(shuffled.ambiance_cues);
    g.shuffle(shuffled.bgm_cues);
    auto r1 = render(both, assets, speech).samples, r2 = render(shuffled, assets, speech).samples;
    for (std::size_t i = 0; i < r1.size(); ++i) ASSERT_NEAR(r1[i], r2[i], 1e-12);
    EXPECT_LE(peak(render(both, assets, speech)), 0.999);
  }
}

}  // namespace
}  // namespace storycast
