// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include "storycast/mixer.hpp"

#include <algorithm>
#include <cmath>

#include "storycast/error.hpp"

namespace storycast {

namespace {

constexpr double kDuckGain = 0.50118723362727224;  // -6 dB
constexpr double kVoicedRms = 1e-4;

long long start_index(double seconds, int rate) { return std::llround(seconds * rate); }

}  // namespace

Timeline::Timeline(std::size_t length, int sample_rate) : samples_(length, 0.0), sample_rate_(sample_rate) {
  if (sample_rate <= 0) throw InvalidArgument("sample rate must be positive");
}

Timeline Timeline::for_duration(double duration, int sample_rate) {
  if (duration < 0.0) throw InvalidArgument("negative timeline duration");
  auto length = static_cast<std::size_t>(std::ceil(duration * sample_rate - 1e-6));
  return Timeline(length, sample_rate);
}

void place(Timeline& timeline, const Clip& clip, const Placement& p) {
  if (clip.sample_rate != timeline.sample_rate()) {
    throw RateMismatch("clip at " + std::to_string(clip.sample_rate) + " Hz placed on a " +
                       std::to_string(timeline.sample_rate()) + " Hz timeline");
  }
  const std::size_t len = clip.samples.size();
  if (len == 0) return;
  const int rate = timeline.sample_rate();
  const std::size_t n_in = std::min(seconds_to_samples(p.fade_in, rate), len);
  const std::size_t n_out = std::min(seconds_to_samples(p.fade_out, rate), len);

  auto& out = timeline.samples();
  const long long first = start_index(p.start, rate);
  for (std::size_t i = 0; i < len; ++i) {
    long long idx = first + static_cast<long long>(i);
    if (idx < 0) continue;
    if (static_cast<std::size_t>(idx) >= out.size()) break;
    double g = p.gain;
    if (i < n_in) g *= static_cast<double>(i) / static_cast<double>(n_in);
    if (i + n_out >= len) g *= static_cast<double>(len - 1 - i) / static_cast<double>(n_out);
    out[static_cast<std::size_t>(idx)] += clip.samples[i] * g;
  }
}

Clip peak_normalize(Clip clip, double ceiling) {
  if (!(ceiling > 0.0 && ceiling <= 1.0)) throw InvalidArgument("ceiling must lie in (0, 1]");
  double pk = peak(clip);
  if (pk <= ceiling) return clip;
  const double scale = ceiling / pk;
  for (auto& x : clip.samples) x = std::clamp(x * scale, -ceiling, ceiling);
  return clip;
}

Clip fit_to_length(const Clip& asset, std::size_t length, CueKind kind, double crossfade_seconds) {
  Clip out;
  out.sample_rate = asset.sample_rate;
  const std::size_t src = asset.samples.size();
  if (kind == CueKind::kSfx || src >= length || src == 0) {
    const std::size_t n = std::min(src, length);
    out.samples.assign(asset.samples.begin(), asset.samples.begin() + static_cast<std::ptrdiff_t>(n));
    if (kind != CueKind::kSfx) out.samples.resize(length, 0.0);
    return out;
  }

  const std::size_t xfade = std::min(seconds_to_samples(crossfade_seconds, asset.sample_rate), src / 2);
  const std::size_t stride = src - xfade;
  out.samples.assign(length, 0.0);
  for (std::size_t pos = 0, copy = 0; pos < length; pos += stride, ++copy) {
    const bool has_next = pos + stride < length;
    for (std::size_t j = 0; j < src && pos + j < length; ++j) {
      double w = 1.0;
      if (copy > 0 && j < xfade) w = static_cast<double>(j) / static_cast<double>(xfade);
      if (has_next && j >= stride) w *= 1.0 - static_cast<double>(j - stride) / static_cast<double>(xfade);
      out.samples[pos + j] += asset.samples[j] * w;
    }
  }
  return out;
}

namespace {

std::vector<bool> voiced_frames(const Clip& speech, std::size_t frame) {
  std::vector<bool> voiced((speech.samples.size() + frame - 1) / frame, false);
  for (std::size_t f = 0; f < voiced.size(); ++f) {
    double s = 0.0;
    std::size_t end = std::min(speech.samples.size(), (f + 1) * frame);
    for (std::size_t i = f * frame; i < end; ++i) s += speech.samples[i] * speech.samples[i];
    voiced[f] = std::sqrt(s / static_cast<double>(end - f * frame)) > kVoicedRms;
  }
  return voiced;
}

}  // namespace

Timeline mix(const CueSheet& sheet, const AssetMap& assets, const Clip& speech, const MixOptions& options) {
  const int rate = sheet.sample_rate;
  if (speech.sample_rate != rate) {
    throw RateMismatch("speech at " + std::to_string(speech.sample_rate) + " Hz, cue sheet at " +
                       std::to_string(rate) + " Hz");
  }
  const double expected = sheet.total_duration * rate;
  if (std::abs(expected - static_cast<double>(speech.samples.size())) > 1.0) {
    throw SchemaViolation("/total_duration", "speech track length disagrees with total_duration by more than one sample");
  }

  Timeline timeline(speech.samples.size(), rate);
  place(timeline, speech, {});

  Timeline bgm_bus(options.duck_bgm ? speech.samples.size() : 0, rate);
  for (const Cue* cue : sheet.all_cues()) {
    auto it = assets.find(cue->id);
    if (it == assets.end()) throw MissingAsset("no asset for cue '" + cue->id + "'");
    if (it->second.sample_rate != rate) {
      throw RateMismatch("asset for cue '" + cue->id + "' is at " + std::to_string(it->second.sample_rate) + " Hz");
    }
    const auto first = start_index(cue->start_time, rate);
    const auto last = start_index(cue->end_time, rate);
    const auto length = static_cast<std::size_t>(std::max<long long>(0, last - first));
    Clip fitted = fit_to_length(it->second, length, cue->kind, options.loop_crossfade);

    Placement p{cue->start_time, cue->volume, 0.0, 0.0};
    if (cue->kind != CueKind::kSfx) {
      double fade = std::min(options.bed_fade, fitted.duration() / 2.0);
      p.fade_in = p.fade_out = fade;
    }
    place(cue->kind == CueKind::kBgm && options.duck_bgm ? bgm_bus : timeline, fitted, p);
  }

  if (options.duck_bgm) {
    const std::size_t frame = std::max<std::size_t>(1, static_cast<std::size_t>(rate / 100));
    auto voiced = voiced_frames(speech, frame);
    auto& out = timeline.samples();
    const auto& bus = bgm_bus.samples();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bus[i] * (voiced[i / frame] ? kDuckGain : 1.0);
  }
  return timeline;
}

Clip render(const CueSheet& sheet, const AssetMap& assets, const Clip& speech, const MixOptions& options) {
  return peak_normalize(mix(sheet, assets, speech, options).to_clip(), options.ceiling);
}

}  // namespace storycast
