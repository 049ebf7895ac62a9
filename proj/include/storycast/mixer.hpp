// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Sample-accurate rendering of a cue sheet over the speech track.

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "storycast/audio.hpp"
#include "storycast/cues.hpp"

namespace storycast {

// 64-bit accumulation buffer at a single sample rate.
class Timeline {
 public:
  Timeline(std::size_t length, int sample_rate);
  // length = ceil(duration * rate), ignoring sub-microsample rounding noise.
  static Timeline for_duration(double duration, int sample_rate);

  std::size_t length() const { return samples_.size(); }
  int sample_rate() const { return sample_rate_; }
  const std::vector<double>& samples() const { return samples_; }
  std::vector<double>& samples() { return samples_; }

  Clip to_clip() const { return {samples_, sample_rate_}; }

 private:
  std::vector<double> samples_;
  int sample_rate_;
};

struct Placement {
  double start = 0.0;
  double gain = 1.0;
  double fade_in = 0.0;
  double fade_out = 0.0;
};

// Sums clip * gain into the timeline starting at sample round(start * rate),
// with linear fade ramps; whatever runs past the end is dropped.
void place(Timeline& timeline, const Clip& clip, const Placement& placement);

// Scales uniformly so the peak equals `ceiling` when it exceeds it.
Clip peak_normalize(Clip clip, double ceiling);

struct MixOptions {
  double bed_fade = 0.05;     // fade in/out of ambiance and bgm cues, seconds
  double loop_crossfade = 0.05;
  double ceiling = 0.999;
  // Side-chain: bgm drops 6 dB wherever the speech track is voiced.
  bool duck_bgm = false;
};

using AssetMap = std::map<std::string, Clip>;

// Fits an asset to a cue length: sfx are truncated, beds are looped with an
// equal-gain crossfade.
Clip fit_to_length(const Clip& asset, std::size_t length, CueKind kind, double crossfade_seconds);

// Speech plus every cue, before peak normalization.
Timeline mix(const CueSheet& sheet, const AssetMap& assets, const Clip& speech, const MixOptions& options = {});

// mix() followed by peak_normalize(ceiling) when the peak exceeds it.
Clip render(const CueSheet& sheet, const AssetMap& assets, const Clip& speech, const MixOptions& options = {});

}  // namespace storycast
