// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include "storycast/prosody.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "storycast/error.hpp"

namespace storycast {

namespace {

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + " contains a non-finite value");
  }
}

void check_same_space(const std::string& a_model, std::size_t a_dim, const std::string& b_model, std::size_t b_dim) {
  if (a_model != b_model) throw SpaceMismatch("embedding spaces differ: '" + a_model + "' vs '" + b_model + "'");
  if (a_dim != b_dim) {
    throw DimensionMismatch("dimensions differ: " + std::to_string(a_dim) + " vs " + std::to_string(b_dim));
  }
}

}  // namespace

Intensity::Intensity(double alpha) : alpha_(alpha) {
  if (!std::isfinite(alpha)) throw InvalidArgument("intensity must be finite");
}

Intensity IntensityPolicy::resolve(double alpha) const {
  Intensity checked(alpha);
  double a = checked.alpha();
  if (std::abs(a) > warn_above) spdlog::warn("prosody intensity {} is above {}", a, warn_above);
  if (a > alpha_max) a = alpha_max;
  if (a < -alpha_max) a = -alpha_max;
  return Intensity(a);
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

EmotionalDirection emotional_direction(const SpeakerEmbedding& emotional, const SpeakerEmbedding& neutral,
                                       std::string emotion_label) {
  check_same_space(emotional.source_model, emotional.values.size(), neutral.source_model, neutral.values.size());
  check_finite(emotional.values, "emotional embedding");
  check_finite(neutral.values, "neutral embedding");

  EmotionalDirection g;
  g.values.resize(emotional.values.size());
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = emotional.values[i] - neutral.values[i];
  g.emotion_label = std::move(emotion_label);
  g.source_model = emotional.source_model;
  return g;
}

EmotionalDirection average_direction(std::span<const EmotionalDirection> directions) {
  if (directions.empty()) throw InvalidArgument("average_direction needs at least one direction");
  const auto& first = directions.front();
  for (const auto& g : directions) {
    check_same_space(first.source_model, first.values.size(), g.source_model, g.values.size());
    if (g.emotion_label != first.emotion_label) {
      throw InvalidArgument("cannot average directions of emotions '" + first.emotion_label + "' and '" +
                            g.emotion_label + "'");
    }
  }

  std::vector<double> sum(first.values.size(), 0.0);
  for (const auto& g : directions) {
    double n = l2_norm(g.values);
    if (n == 0.0) throw ZeroDirection("emotional direction has zero norm");
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g.values[i] / n;
  }
  const double m = static_cast<double>(directions.size());
  for (auto& x : sum) x /= m;

  return {std::move(sum), first.emotion_label, false, first.source_model};
}

EmotionalDirection unit(const EmotionalDirection& direction) {
  double n = l2_norm(direction.values);
  if (n == 0.0 || !std::isfinite(n)) throw ZeroDirection("cannot normalize a zero direction");
  EmotionalDirection u = direction;
  for (auto& x : u.values) x /= n;
  u.unit = true;
  return u;
}

SpeakerEmbedding apply_emotion(const SpeakerEmbedding& speaker, const EmotionalDirection& direction,
                               Intensity alpha) {
  if (!direction.unit) throw NotUnit("apply_emotion needs a unit direction");
  check_same_space(speaker.source_model, speaker.values.size(), direction.source_model, direction.values.size());

  SpeakerEmbedding out = speaker;
  const double a = alpha.alpha();
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += a * direction.values[i];
  return out;
}

SpeakerEmbedding renormalize(const SpeakerEmbedding& embedding) {
  double n = l2_norm(embedding.values);
  if (n == 0.0) return embedding;
  SpeakerEmbedding out = embedding;
  for (auto& x : out.values) x /= n;
  return out;
}

}  // namespace storycast
