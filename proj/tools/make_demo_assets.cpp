// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// Regenerates the bundled demo data: reference clips and the retrieval
// database under <dir>/retrieval, the canonical plan and the scripted judge
// fixtures. Output is deterministic.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "storycast/error.hpp"
#include "storycast/evaluator.hpp"
#include "storycast/mock_backend.hpp"
#include "storycast/retrieval.hpp"
#include "storycast/script.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace storycast;

namespace {

struct Reference {
  const char* id;
  const char* speaker;
  const char* emotion;
  const char* transcript;
  double frequency;
  double amplitude;
};

// amplitude 0.95 gives a mock MOS near 3.7; 0.3 falls under the 3.5 cut.
constexpr Reference kReferences[] = {
    {"narrator_neutral", "narrator", "neutral", "A deep calm voice reads the harbor story tonight.", 140, 0.95},
    {"narrator_tense", "narrator", "tense", "The tense night held its breath over the harbor.", 150, 0.95},
    {"narrator_frightened_lofi", "narrator", "frightened", "Frightened and breathless, he ran.", 155, 0.3},
    {"mara_neutral", "mara", "neutral", "A young bright voice says hello from the lighthouse.", 260, 0.95},
    {"mara_frightened", "mara", "frightened", "I am frightened and breathless, please help me!", 300, 0.95},
    {"mara_relieved", "mara", "relieved", "I am so relieved, your warm smile is here at last.", 240, 0.95},
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

std::string fenced(const json& j) { return "```json\n" + j.dump() + "\n```"; }

json scores(double q, double n, double e, double i, double o) {
  return {{"quality", q}, {"naturalness", n}, {"expressiveness", e}, {"immersion", i}, {"overall", o}};
}

std::vector<std::string> judge_turns(double quality) {
  return {
      "I will rate clarity and artifacts, delivery, emotional range and the blend of speech with effects and "
      "music, each on the 1 to 5 scale.",
      "Initial impression: clear narration with a readable scene.\n" + fenced(scores(quality, 4, 4, 4, 4)),
      "On review the ambiance is slightly loud under the dialogue.\n" + fenced(scores(quality, 4, 4, 3.5, 4)),
      "As a referee: the critique is fair; no further gaps.\n" + fenced(scores(quality, 4, 4, 3.5, 4)),
      "Final scores:\n" + fenced(scores(quality, 4, 4, 3.5, 4)),
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regenerate the bundled demo data"};
  std::string dir = "demo";
  app.add_option("--dir", dir, "Demo directory holding plan.json and instruction.txt");
  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path root(dir);
    const fs::path retrieval = root / "retrieval";
    fs::create_directories(retrieval);
    MockBackend mock;

    std::vector<RetrievalEntry> entries;
    for (const auto& r : kReferences) {
      Clip clip = sine_tone(r.frequency, r.amplitude, seconds_to_samples(0.5, kDefaultSampleRate), kDefaultSampleRate);
      const std::string file = std::string(r.id) + ".wav";
      write_wav(retrieval / file, clip);
      RetrievalEntry e;
      e.entry_id = r.id;
      e.speaker_id = r.speaker;
      e.transcript = r.transcript;
      e.emotion_label = r.emotion;
      e.language = "en";
      e.embedding = mock.embed(r.transcript);
      e.mos = mock.predict_mos(clip);
      e.audio_uri = file;
      entries.push_back(std::move(e));
    }
    RetrievalDatabase db(MockBackend::kEmbedDimension, std::move(entries));
    write_file(retrieval / "db.jsonl", db.to_jsonl());

    ScriptPlan plan = parse_plan(read_file(root / "plan.json"));
    std::string instruction = read_file(root / "instruction.txt");
    while (!instruction.empty() && instruction.back() == '\n') instruction.pop_back();
    plan.source_instruction = instruction;
    const std::string canonical = serialize_plan(plan);
    write_file(root / "plan.json", canonical);

    JudgeFixtures fixtures;
    fixtures.sessions["planner"] = {"Here is the plan.\n```json\n" + canonical + "```"};
    const double qualities[] = {3, 4, 5};
    for (int run = 1; run <= 3; ++run) {
      fixtures.sessions["master.wav|none|zero_shot|run" + std::to_string(run)] = judge_turns(qualities[run - 1]);
    }
    fixtures.sessions["*"] = judge_turns(4);
    write_file(root / "mock_fixtures.json", fixtures.to_json().dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "make_demo_assets: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
