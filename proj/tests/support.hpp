// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Shared helpers for the test binaries: a seeded generator with the draws the
// property tests need, temporary directories and small plan builders.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "storycast/audio.hpp"
#include "storycast/retrieval.hpp"
#include "storycast/script.hpp"

namespace storycast::testing {

inline const std::filesystem::path kSourceDir = STORYCAST_SOURCE_DIR;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  // Uniform in [lo, hi].
  int integer(int lo, int hi) { return lo + static_cast<int>(bits() % static_cast<std::uint64_t>(hi - lo + 1)); }
  // Uniform in [lo, hi).
  double real(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(bits() >> 11) * (1.0 / 9007199254740992.0));
  }
  bool coin() { return (bits() & 1) != 0; }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  std::vector<double> vector(std::size_t dim, double scale = 1.0) {
    std::vector<double> v(dim);
    for (auto& x : v) x = scale * normal();
    return v;
  }
  template <class T>
  const T& pick(const std::vector<T>& items) {
    return items[bits() % items.size()];
  }
  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[bits() % i]);
  }
  std::string word(int min_len = 2, int max_len = 8) {
    std::string w;
    int n = integer(min_len, max_len);
    for (int i = 0; i < n; ++i) w.push_back(static_cast<char>('a' + integer(0, 25)));
    return w;
  }

 private:
  std::mt19937_64 engine_;
};

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("storycast-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline CharacterSpec character(std::string id, std::string timbre = "calm voice", std::string language = "en") {
  return {id, id, std::move(timbre), std::move(language)};
}

inline SubSentence line(std::string character_id, std::string text, int order_index) {
  SubSentence s;
  s.character_id = std::move(character_id);
  s.text = std::move(text);
  s.emotion_description = "neutral";
  s.order_index = order_index;
  return s;
}

// Two characters, three lines, one inline tag, one ambiance and one bgm bed.
inline ScriptPlan small_plan() {
  ScriptPlan p;
  p.characters = {character("narrator", "deep calm narrator"), character("ada", "bright young voice")};
  p.sub_sentences = {line("narrator", "The door creaked [SFX: creaking wooden door@creaked] open.", 0),
                     line("ada", "Who is there?", 1), line("narrator", "Nobody answered.", 2)};
  p.sub_sentences[1].emotion_description = "fearful";
  p.sub_sentences[1].emotion_shift = true;
  p.sub_sentences[1].intensity = 0.75;
  p.ambiance = {{"night wind", 0, 2, 0.35}};
  p.bgm = {{"low strings", 1, 2, 0.5}};
  p.source_instruction = "A door opens at night.";
  return p;
}

inline RetrievalEntry entry(std::string id, std::string speaker, std::string emotion, std::vector<double> embedding,
                            double mos, std::string language = "en") {
  RetrievalEntry e;
  e.entry_id = std::move(id);
  e.speaker_id = std::move(speaker);
  e.transcript = "transcript of " + e.entry_id;
  e.emotion_label = std::move(emotion);
  e.language = std::move(language);
  e.embedding = std::move(embedding);
  e.mos = mos;
  e.audio_uri = e.entry_id + ".wav";
  return e;
}

inline Clip impulse(std::size_t length = 1, int rate = kDefaultSampleRate) {
  Clip c;
  c.sample_rate = rate;
  c.samples.assign(length, 0.0);
  if (length > 0) c.samples[0] = 1.0;
  return c;
}

inline Clip constant(double value, std::size_t length, int rate = kDefaultSampleRate) {
  Clip c;
  c.sample_rate = rate;
  c.samples.assign(length, value);
  return c;
}

}  // namespace storycast::testing
