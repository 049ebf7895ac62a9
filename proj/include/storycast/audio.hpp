// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace storycast {

inline constexpr int kDefaultSampleRate = 24000;

// Mono audio, nominally in [-1, 1].
struct Clip {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  bool operator==(const Clip&) const = default;
};

// Number of samples covering `seconds`, rounded to nearest.
std::size_t seconds_to_samples(double seconds, int sample_rate);

// RIFF/WAVE, PCM 16-bit or IEEE float 32-bit, mono or stereo (averaged to
// mono). Throws CorruptHeader or UnsupportedFormat.
Clip decode_wav(std::span<const std::uint8_t> bytes);
// PCM 16-bit little-endian mono. Samples map to round(x * 32768) clamped to
// the int16 range, so decode(encode(c)) == c for clips on the 16-bit grid.
std::vector<std::uint8_t> encode_wav(const Clip& clip);

Clip read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Clip& clip);

// Snaps every sample onto the 16-bit grid encode_wav uses.
Clip quantize16(Clip clip);

// Linear-interpolation resampling; identity when rates already match.
Clip resample_linear(const Clip& clip, int target_rate);

double peak(const Clip& clip);
double rms(const Clip& clip);

}  // namespace storycast
