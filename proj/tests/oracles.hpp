// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations and case generators. Nothing here
// calls the code under test; the property suites compare against these.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "storycast/acms.hpp"
#include "storycast/retrieval.hpp"
#include "storycast/script.hpp"
#include "support.hpp"

namespace storycast::testing {

// Lower-case, strip leading and trailing ASCII punctuation.
inline std::string oracle_normalize(const std::string& word) {
  std::size_t b = 0, e = word.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(word[b]))) ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(word[e - 1]))) --e;
  std::string out = word.substr(b, e - b);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct TagCase {
  std::string text;
  std::string clean;
  std::vector<InlineSfx> cues;
};

// Tag-free text of 1..20 words from a small vocabulary (so anchors repeat),
// with k well-formed tags inserted at word boundaries. Expected occurrence:
// number of matches of the anchor among the words before the tag, at least 1.
inline TagCase make_tag_case(Gen& g, int k) {
  static const std::vector<std::string> vocab = {"door", "Door,", "knock", "knocked", "wind.", "the", "The",
                                                 "rain", "creaked", "night!", "and", "harbor", "storm?"};
  std::vector<std::string> words;
  int n = g.integer(1, 20);
  for (int i = 0; i < n; ++i) words.push_back(g.coin() ? g.pick(vocab) : g.word());

  std::vector<std::vector<InlineSfx>> at(words.size() + 1);
  std::vector<std::pair<int, InlineSfx>> inserted;
  for (int t = 0; t < k; ++t) {
    int pos = g.integer(0, n);
    std::string anchor;
    if (pos > 0 && g.integer(0, 4) != 0) {
      anchor = oracle_normalize(words[g.integer(0, pos - 1)]);
      if (anchor.empty()) anchor = "x";
      if (g.coin()) anchor[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(anchor[0])));
    } else {
      anchor = g.word();
    }
    int prior = 0;
    for (int i = 0; i < pos; ++i) prior += oracle_normalize(words[i]) == oracle_normalize(anchor) ? 1 : 0;
    InlineSfx cue{"effect " + g.word() + (g.coin() ? " " + g.word() : ""), anchor, std::max(prior, 1)};
    at[pos].push_back(cue);
  }

  TagCase c;
  auto tag = [&](const InlineSfx& s) {
    return std::string("[SFX:") + (g.coin() ? " " : "") + s.description + "@" + s.anchor_word + "]";
  };
  for (std::size_t i = 0; i <= words.size(); ++i) {
    for (const auto& s : at[i]) {
      if (!c.text.empty()) c.text += g.coin() ? " " : "  ";
      c.text += tag(s);
      c.cues.push_back(s);
    }
    if (i < words.size()) {
      if (!c.text.empty()) c.text += " ";
      c.text += words[i];
      if (!c.clean.empty()) c.clean += " ";
      c.clean += words[i];
    }
  }
  return c;
}

inline double oracle_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return oracle_dot(a, b) / (std::sqrt(oracle_dot(a, a)) * std::sqrt(oracle_dot(b, b)));
}

struct RankedId {
  std::string id;
  double similarity;
};

// Sort everything, then cut.
inline std::vector<RankedId> oracle_top_k(const std::vector<double>& query, const std::vector<RetrievalEntry>& db,
                                          std::size_t k) {
  std::vector<RankedId> all;
  for (const auto& e : db) all.push_back({e.entry_id, oracle_cosine(query, e.embedding)});
  std::sort(all.begin(), all.end(), [](const RankedId& a, const RankedId& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

// Raw-sum product-moment formula:
//   r = (n Sxy - Sx Sy) / sqrt((n Sxx - Sx^2) (n Syy - Sy^2))
// computed in long double.
inline double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  long double n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  long double num = n * sxy - sx * sy;
  long double den = std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  return static_cast<double>(num / den);
}

// Random registry with unique ids and ranks per axis.
inline ModelRegistry random_registry(Gen& g, const std::vector<std::string>& languages) {
  int n = g.integer(1, 8);
  std::vector<int> clone(n), control(n);
  for (int i = 0; i < n; ++i) clone[i] = control[i] = i + 1;
  g.shuffle(clone);
  g.shuffle(control);
  ModelRegistry r;
  for (int i = 0; i < n; ++i) {
    ModelProfile p;
    p.model_id = "model-" + std::to_string(i);
    for (const auto& l : languages) {
      if (g.integer(0, 2) != 0) p.languages.insert(l);
    }
    if (p.languages.empty()) p.languages.insert(g.pick(languages));
    p.cloning_rank = clone[i] * 3;
    p.controllability_rank = control[i] * 3;
    p.supports_paralinguistics = g.coin();
    p.supports_speaker_embedding = g.coin();
    r = r.with_profile(p);
  }
  return r;
}

// Direct statement of the selection rule over the full profile list.
inline std::string oracle_select(const ModelRegistry& registry, const SelectionRequest& req) {
  const ModelProfile* best = nullptr;
  for (const auto& p : registry.profiles()) {
    if (!p.languages.count(req.language)) continue;
    if (req.needs_paralinguistics && !p.supports_paralinguistics) continue;
    int rank = req.emotion_shift ? p.controllability_rank : p.cloning_rank;
    int best_rank = best ? (req.emotion_shift ? best->controllability_rank : best->cloning_rank) : 0;
    if (!best || rank < best_rank) best = &p;
  }
  return best ? best->model_id : std::string();
}

}  // namespace storycast::testing
