// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Emotion steering in a TTS model's speaker-embedding space.
//
//   direction   g_i = f_emotional_i - f_neutral_i
//   average     g   = (1/m) * sum_i g_i / |g_i|
//   unit        u   = g / |g|
//   apply       f'  = f + alpha * u
//
// Vectors are tagged with the embedding space (source model) they came from;
// mixing spaces is an error. All arithmetic is double precision.

#pragma once

#include <span>
#include <string>
#include <vector>

namespace storycast {

struct SpeakerEmbedding {
  std::vector<double> values;
  std::string source_model;

  bool operator==(const SpeakerEmbedding&) const = default;
};

struct EmotionalDirection {
  std::vector<double> values;
  std::string emotion_label;
  bool unit = false;
  std::string source_model;

  bool operator==(const EmotionalDirection&) const = default;
};

// Prosody strength. Construction rejects non-finite values.
class Intensity {
 public:
  explicit Intensity(double alpha);
  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

struct IntensityPolicy {
  double alpha_max = 3.0;
  double warn_above = 1.5;

  // Clamps |alpha| to alpha_max, logging a warning above warn_above.
  Intensity resolve(double alpha) const;
};

double l2_norm(std::span<const double> v);

EmotionalDirection emotional_direction(const SpeakerEmbedding& emotional, const SpeakerEmbedding& neutral,
                                       std::string emotion_label = {});
EmotionalDirection average_direction(std::span<const EmotionalDirection> directions);
EmotionalDirection unit(const EmotionalDirection& direction);
SpeakerEmbedding apply_emotion(const SpeakerEmbedding& speaker, const EmotionalDirection& direction,
                               Intensity alpha);

// Scales to unit L2 norm; for backends whose decoder expects normalized
// speaker vectors. Zero vectors are returned unchanged.
SpeakerEmbedding renormalize(const SpeakerEmbedding& embedding);

}  // namespace storycast
