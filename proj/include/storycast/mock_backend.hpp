// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic offline backend. Every output is a pure function of the
// request and the seed, computed with integer hashing and basic IEEE
// arithmetic only (see docs/mock-backend.md for the exact recipes).

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "storycast/backend.hpp"

namespace storycast {

// Scripted judge replies keyed by session id; turn n of a session gets
// entry n. A "*" session, when present, serves sessions with no script.
struct JudgeFixtures {
  std::map<std::string, std::vector<std::string>> sessions;

  static JudgeFixtures load(const std::filesystem::path& path);
  static JudgeFixtures from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

class MockBackend : public Backend {
 public:
  static constexpr std::size_t kEmbedDimension = 64;
  static constexpr std::size_t kSpeakerDimension = 32;
  static constexpr double kSecondsPerWord = 0.08;
  static constexpr double kToneAmplitude = 0.25;

  explicit MockBackend(std::uint64_t seed = 0, ModelRegistry registry = ModelRegistry::defaults(),
                       JudgeFixtures fixtures = {});

  std::string id() const override { return "mock"; }
  Capabilities capabilities() override;

  // Sine tone at 200 + (fnv1a64(text) mod 400) Hz, 0.08 s per word, 24 kHz.
  Clip synthesize(const SynthesisRequest& request) override;
  // sfx: seeded uniform noise; ambiance/bgm: low sine tone. Exact duration.
  Clip generate_audio(const std::string& prompt, double duration, CueKind kind) override;
  // Normalized sum of per-word hash vectors (D = 64).
  std::vector<double> embed(const std::string& text) override;
  // Words partition the clip uniformly.
  AlignmentResult align(const std::vector<std::string>& words, const Clip& clip) override;
  // 1 + 4 * clamp(rms, 0, 1).
  double predict_mos(const Clip& clip) override;
  std::string judge(const std::string& prompt, const std::vector<std::string>& attachments,
                    const std::string& session_id) override;
  SpeakerEmbedding speaker_embed(const std::string& model_id, const Clip& clip) override;

  void set_fixtures(JudgeFixtures fixtures);

 private:
  std::uint64_t seed_;
  ModelRegistry registry_;
  std::mutex judge_mutex_;
  JudgeFixtures fixtures_;
  std::map<std::string, std::size_t> turns_;
};

// sin/cos from fixed-term Taylor series after reduction to [-pi, pi]; used
// instead of <cmath> so mock audio is identical on every platform.
double portable_sin(double x);
double portable_cos(double x);

// A sine of `frequency` Hz generated with the recurrence
//   y[0] = 0, y[1] = A sin(w), y[n] = 2 cos(w) y[n-1] - y[n-2],  w = 2 pi f / rate
// and snapped onto the 16-bit grid.
Clip sine_tone(double frequency, double amplitude, std::size_t samples, int sample_rate);

}  // namespace storycast
