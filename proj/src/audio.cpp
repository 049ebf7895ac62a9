// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#include "storycast/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "storycast/error.hpp"

namespace storycast {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

std::int16_t to_int16(double x) {
  double v = std::nearbyint(x * 32768.0);
  v = std::clamp(v, -32768.0, 32767.0);
  return static_cast<std::int16_t>(v);
}

}  // namespace

std::size_t seconds_to_samples(double seconds, int sample_rate) {
  if (seconds <= 0.0) return 0;
  return static_cast<std::size_t>(std::llround(seconds * sample_rate));
}

Clip decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw CorruptHeader("WAV data shorter than the RIFF header");
  if (!tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) throw CorruptHeader("not a RIFF/WAVE stream");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    std::uint32_t size = read_u32(bytes, pos + 4);
    std::size_t body = pos + 8;
    if (tag_is(bytes, pos, "fmt ")) {
      if (size < 16 || body + size > bytes.size()) throw CorruptHeader("truncated fmt chunk");
      format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      if (format == kFormatExtensible) {
        if (size < 26) throw CorruptHeader("truncated extensible fmt chunk");
        format = read_u16(bytes, body + 24);
      }
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      // Streamed writers sometimes leave the size unset; take what is there.
      std::size_t avail = bytes.size() - body;
      data = bytes.subspan(body, std::min<std::size_t>(size, avail));
      have_data = true;
      break;
    }
    std::size_t next = body + size + (size & 1u);
    if (next <= pos) throw CorruptHeader("chunk size overflow");
    pos = next;
  }

  if (!have_fmt) throw CorruptHeader("missing fmt chunk");
  if (!have_data) throw CorruptHeader("missing data chunk");
  if (channels != 1 && channels != 2) throw UnsupportedFormat(std::to_string(channels) + " channels");
  if (rate == 0) throw CorruptHeader("zero sample rate");

  std::size_t width = 0;
  if (format == kFormatPcm && bits == 16) {
    width = 2;
  } else if (format == kFormatFloat && bits == 32) {
    width = 4;
  } else {
    throw UnsupportedFormat("format " + std::to_string(format) + " with " + std::to_string(bits) + " bits");
  }

  const std::size_t frame = width * channels;
  const std::size_t frames = data.size() / frame;
  Clip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      std::size_t at = f * frame + c * width;
      if (width == 2) {
        acc += static_cast<std::int16_t>(read_u16(data, at)) / 32768.0;
      } else {
        std::uint32_t raw = read_u32(data, at);
        float v;
        std::memcpy(&v, &raw, sizeof v);
        acc += static_cast<double>(v);
      }
    }
    clip.samples[f] = channels == 2 ? acc * 0.5 : acc;
  }
  return clip;
}

std::vector<std::uint8_t> encode_wav(const Clip& clip) {
  if (clip.sample_rate <= 0) throw InvalidArgument("sample rate must be positive");
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_bytes = n * 2;
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double x : clip.samples) put_u16(out, static_cast<std::uint16_t>(to_int16(x)));
  return out;
}

Clip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

void write_wav(const std::filesystem::path& path, const Clip& clip) {
  auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Clip quantize16(Clip clip) {
  for (auto& x : clip.samples) x = to_int16(x) / 32768.0;
  return clip;
}

Clip resample_linear(const Clip& clip, int target_rate) {
  if (target_rate <= 0) throw InvalidArgument("target sample rate must be positive");
  if (clip.sample_rate == target_rate || clip.samples.empty()) {
    Clip out = clip;
    out.sample_rate = target_rate;
    return out;
  }
  const std::size_t n_in = clip.samples.size();
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_in) * target_rate / clip.sample_rate));
  Clip out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  const double step = static_cast<double>(clip.sample_rate) / target_rate;
  for (std::size_t i = 0; i < n_out; ++i) {
    double src = i * step;
    auto i0 = static_cast<std::size_t>(src);
    if (i0 >= n_in - 1) {
      out.samples[i] = clip.samples[n_in - 1];
      continue;
    }
    double frac = src - static_cast<double>(i0);
    out.samples[i] = clip.samples[i0] * (1.0 - frac) + clip.samples[i0 + 1] * frac;
  }
  return out;
}

double peak(const Clip& clip) {
  double p = 0.0;
  for (double x : clip.samples) p = std::max(p, std::abs(x));
  return p;
}

double rms(const Clip& clip) {
  if (clip.samples.empty()) return 0.0;
  double s = 0.0;
  for (double x : clip.samples) s += x * x;
  return std::sqrt(s / static_cast<double>(clip.samples.size()));
}

}  // namespace storycast
