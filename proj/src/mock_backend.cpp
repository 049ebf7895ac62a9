// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include "storycast/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "storycast/digest.hpp"
#include "storycast/error.hpp"
#include "storycast/script.hpp"

namespace storycast {

using nlohmann::json;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoPi = 2.0 * kPi;
constexpr int kMockRate = 24000;
constexpr int kTaylorTerms = 24;

double reduce_angle(double x) { return x - kTwoPi * std::nearbyint(x / kTwoPi); }

std::vector<std::string> whitespace_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

// Uniform in [-1, 1) from the top 53 bits.
double unit_from_bits(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * (1.0 / 9007199254740992.0) * 2.0 - 1.0;
}

std::vector<double> hash_vector(std::uint64_t seed, std::size_t dim) {
  std::vector<double> v(dim);
  std::uint64_t state = seed;
  for (auto& x : v) x = unit_from_bits(splitmix64(state));
  return v;
}

}  // namespace

double portable_sin(double x) {
  x = reduce_angle(x);
  double term = x;
  double sum = x;
  const double x2 = x * x;
  for (int k = 1; k < kTaylorTerms; ++k) {
    term *= -x2 / static_cast<double>((2 * k) * (2 * k + 1));
    sum += term;
  }
  return sum;
}

double portable_cos(double x) {
  x = reduce_angle(x);
  double term = 1.0;
  double sum = 1.0;
  const double x2 = x * x;
  for (int k = 1; k < kTaylorTerms; ++k) {
    term *= -x2 / static_cast<double>((2 * k - 1) * (2 * k));
    sum += term;
  }
  return sum;
}

Clip sine_tone(double frequency, double amplitude, std::size_t samples, int sample_rate) {
  Clip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(samples);
  const double w = kTwoPi * frequency / sample_rate;
  const double c2 = 2.0 * portable_cos(w);
  double prev2 = 0.0;
  double prev1 = amplitude * portable_sin(w);
  if (samples > 0) clip.samples[0] = 0.0;
  if (samples > 1) clip.samples[1] = prev1;
  for (std::size_t n = 2; n < samples; ++n) {
    double y = c2 * prev1 - prev2;
    clip.samples[n] = y;
    prev2 = prev1;
    prev1 = y;
  }
  return quantize16(std::move(clip));
}

JudgeFixtures JudgeFixtures::from_json(const json& j) {
  JudgeFixtures f;
  if (!j.is_object() || !j.contains("sessions") || !j["sessions"].is_object()) {
    throw ConfigError("judge fixtures: expected {\"sessions\": {...}}");
  }
  try {
    for (const auto& [sid, turns] : j["sessions"].items()) f.sessions[sid] = turns.get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("judge fixtures: ") + e.what());
  }
  return f;
}

JudgeFixtures JudgeFixtures::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open judge fixtures " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("judge fixtures " + path.string() + ": " + e.what());
  }
}

json JudgeFixtures::to_json() const { return {{"sessions", sessions}}; }

MockBackend::MockBackend(std::uint64_t seed, ModelRegistry registry, JudgeFixtures fixtures)
    : seed_(seed), registry_(std::move(registry)), fixtures_(std::move(fixtures)) {}

void MockBackend::set_fixtures(JudgeFixtures fixtures) {
  std::lock_guard lock(judge_mutex_);
  fixtures_ = std::move(fixtures);
  turns_.clear();
}

Capabilities MockBackend::capabilities() {
  Capabilities caps;
  caps.backend_id = id();
  caps.endpoints = {endpoint::kSynthesize, endpoint::kGenerateAudio, endpoint::kEmbed, endpoint::kAlign,
                    endpoint::kMos,        endpoint::kJudge,         endpoint::kSpeakerEmbed};
  caps.embed_dimension = kEmbedDimension;
  caps.sample_rate = kMockRate;
  caps.models = registry_.profiles();
  return caps;
}

Clip MockBackend::synthesize(const SynthesisRequest& request) {
  const ModelProfile* profile = registry_.find(request.model_id);
  if (!profile) throw BackendUnavailable("model '" + request.model_id + "' is not served by the mock backend");
  int modes = static_cast<int>(request.reference_audio.has_value()) +
              static_cast<int>(request.description.has_value()) +
              static_cast<int>(request.speaker_embedding.has_value());
  if (modes != 1) throw ModeUnsupported("synthesis request must set exactly one conditioning mode");
  if (request.speaker_embedding) {
    if (!profile->supports_speaker_embedding) {
      throw ModeUnsupported("model '" + request.model_id + "' does not accept speaker embeddings");
    }
    if (request.speaker_embedding->source_model != request.model_id) {
      throw ModeUnsupported("speaker embedding from '" + request.speaker_embedding->source_model +
                            "' given to '" + request.model_id + "'");
    }
  }

  const double frequency = 200.0 + static_cast<double>(fnv1a64(request.text) % 400);
  const std::size_t words = whitespace_words(request.text).size();
  const std::size_t samples = words * seconds_to_samples(kSecondsPerWord, kMockRate);
  return sine_tone(frequency, kToneAmplitude, samples, kMockRate);
}

Clip MockBackend::generate_audio(const std::string& prompt, double duration, CueKind kind) {
  if (!(duration >= 0.0) || !std::isfinite(duration)) throw InvalidArgument("audio duration must be non-negative");
  const std::size_t n = seconds_to_samples(duration, kMockRate);
  const std::uint64_t h = fnv1a64(prompt, fnv1a64(to_string(kind)));
  switch (kind) {
    case CueKind::kSfx: {
      Clip clip;
      clip.sample_rate = kMockRate;
      clip.samples.resize(n);
      std::uint64_t state = h ^ (seed_ * 0x9e3779b97f4a7c15ULL);
      for (auto& x : clip.samples) x = 0.4 * unit_from_bits(splitmix64(state));
      return quantize16(std::move(clip));
    }
    case CueKind::kAmbiance:
      return sine_tone(40.0 + static_cast<double>(h % 80), 0.2, n, kMockRate);
    case CueKind::kBgm:
      return sine_tone(110.0 + static_cast<double>(h % 220), 0.2, n, kMockRate);
  }
  return {};
}

std::vector<double> MockBackend::embed(const std::string& text) {
  std::vector<double> sum(kEmbedDimension, 0.0);
  bool any = false;
  for (const auto& w : whitespace_words(text)) {
    auto token = normalize_word(w);
    if (token.empty()) continue;
    auto v = hash_vector(fnv1a64(token), kEmbedDimension);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v[i];
    any = true;
  }
  if (!any) sum = hash_vector(fnv1a64(text), kEmbedDimension);
  double norm = 0.0;
  for (double x : sum) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    sum = hash_vector(fnv1a64(text), kEmbedDimension);
    norm = 0.0;
    for (double x : sum) norm += x * x;
    norm = std::sqrt(norm);
  }
  for (auto& x : sum) x /= norm;
  return sum;
}

AlignmentResult MockBackend::align(const std::vector<std::string>& words, const Clip& clip) {
  AlignmentResult result;
  result.clip_duration = clip.duration();
  if (words.empty()) return result;
  if (clip.samples.empty()) throw InvalidArgument("cannot align words to an empty clip");
  const double n = static_cast<double>(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    double start = result.clip_duration * static_cast<double>(i) / n;
    double end = i + 1 == words.size() ? result.clip_duration : result.clip_duration * static_cast<double>(i + 1) / n;
    result.words.push_back({words[i], start, end});
  }
  return result;
}

double MockBackend::predict_mos(const Clip& clip) { return 1.0 + 4.0 * std::clamp(rms(clip), 0.0, 1.0); }

std::string MockBackend::judge(const std::string& /*prompt*/, const std::vector<std::string>& /*attachments*/,
                               const std::string& session_id) {
  std::lock_guard lock(judge_mutex_);
  auto it = fixtures_.sessions.find(session_id);
  if (it == fixtures_.sessions.end()) it = fixtures_.sessions.find("*");
  if (it == fixtures_.sessions.end()) throw BackendUnavailable("no judge fixture for session '" + session_id + "'");
  std::size_t turn = turns_[session_id]++;
  if (turn >= it->second.size()) {
    throw BackendUnavailable("judge fixture for session '" + session_id + "' has no turn " + std::to_string(turn));
  }
  return it->second[turn];
}

SpeakerEmbedding MockBackend::speaker_embed(const std::string& model_id, const Clip& clip) {
  const ModelProfile* profile = registry_.find(model_id);
  if (!profile) throw BackendUnavailable("model '" + model_id + "' is not served by the mock backend");
  if (!profile->supports_speaker_embedding) {
    throw ModeUnsupported("model '" + model_id + "' exposes no speaker encoder");
  }
  auto bytes = encode_wav(quantize16(clip));
  std::string_view view(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  return {hash_vector(fnv1a64(view, fnv1a64(model_id)), kSpeakerDimension), model_id};
}

bool Capabilities::has_endpoint(std::string_view name) const {
  return std::find(endpoints.begin(), endpoints.end(), name) != endpoints.end();
}

ModelRegistry registry_from(const Capabilities& caps) {
  ModelRegistry r;
  for (const auto& p : caps.models) r = r.with_profile(p);
  return r;
}

}  // namespace storycast
