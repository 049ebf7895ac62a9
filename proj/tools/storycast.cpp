// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

// storycast: command-line driver for the production and evaluation stages.

#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "storycast/error.hpp"
#include "storycast/evaluator.hpp"
#include "storycast/http.hpp"
#include "storycast/mock_backend.hpp"
#include "storycast/pipeline.hpp"
#include "storycast/trace.hpp"
#include "storycast/wire.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace storycast;

namespace {

enum ExitCode { kOk = 0, kGeneral = 1, kConfig = 2, kBackend = 3, kSchema = 4, kAlignment = 5 };

int exit_code_for(const Error& e) {
  switch (e.error_class()) {
    case ErrorClass::kConfig: return kConfig;
    case ErrorClass::kBackend: return kBackend;
    case ErrorClass::kSchema: return kSchema;
    case ErrorClass::kAlignment: return kAlignment;
    case ErrorClass::kGeneral: return kGeneral;
  }
  return kGeneral;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> parallelism;
  bool lenient_anchors = false;
  std::string log_level = "warn";
};

PipelineConfig load_config(const Globals& g) {
  PipelineConfig c = g.config.empty() ? PipelineConfig::from_json(json::object(), fs::current_path())
                                      : PipelineConfig::load(g.config);
  if (!g.out.empty()) c.output_dir = g.out;
  if (g.seed) c.seed = *g.seed;
  if (g.parallelism) c.parallelism = *g.parallelism;
  if (g.lenient_anchors) c.cues.lenient_anchors = true;
  c.validate();
  return c;
}

Pipeline make_pipeline(const PipelineConfig& c) {
  std::shared_ptr<TraceLog> trace;
  if (c.trace) {
    fs::create_directories(c.output_dir);
    trace = std::make_shared<TraceLog>();
    trace->open(c.output_dir / "trace.jsonl");
  }
  return Pipeline(c, make_backend(c, trace));
}

ScriptPlan read_plan(const fs::path& path) { return parse_plan(read_file(path)); }

std::atomic<ProtocolServer*> g_server{nullptr};

void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"storycast: audiobook production and evaluation engine"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Pipeline config JSON")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory (overrides the config)");
  app.add_option("--seed", g.seed, "Mock backend seed");
  app.add_option("--parallelism", g.parallelism, "Bound on concurrent backend calls")->check(CLI::PositiveNumber);
  app.add_flag("--lenient-anchors", g.lenient_anchors, "Drop sfx cues whose anchor cannot be found");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off");

  std::string instruction_path, plan_path;
  auto* plan_cmd = app.add_subcommand("plan", "Plan a script from an instruction file");
  plan_cmd->add_option("--instruction", instruction_path, "Instruction text file")->required()->check(CLI::ExistingFile);

  auto* synth_cmd = app.add_subcommand("synthesize", "Synthesize the speech track of a plan");
  synth_cmd->add_option("--plan", plan_path, "Plan JSON (default: <out>/plan.json)");

  auto* compose_cmd = app.add_subcommand("compose", "Align speech and compile the cue sheet and assets");
  compose_cmd->add_option("--plan", plan_path, "Plan JSON (default: <out>/plan.json)");

  auto* mix_cmd = app.add_subcommand("mix", "Render master.wav from cues, assets and speech");

  auto* gen_cmd = app.add_subcommand("generate", "Run plan, synthesize, compose and mix");
  gen_cmd->add_option("--instruction", instruction_path, "Instruction text file")->required()->check(CLI::ExistingFile);

  std::string audio_path, context_path, stimulus = "none", mode = "zero_shot", reference_audio, reference_id, human_path;
  int runs = 3;
  bool no_icsc = false, no_pt = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score an audio file with the judge backend");
  eval_cmd->add_option("--audio", audio_path, "Audio file to evaluate")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--context", context_path, "Transcript or plan file given to the judge")->check(CLI::ExistingFile);
  eval_cmd->add_option("--runs", runs, "Independent judge runs")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--stimulus", stimulus, "none or <kind>/<principle>");
  eval_cmd->add_option("--mode", mode, "zero_shot or one_shot");
  eval_cmd->add_option("--reference-audio", reference_audio, "One-shot reference clip locator");
  eval_cmd->add_option("--reference-id", reference_id, "Id of the reference clip in --human");
  eval_cmd->add_option("--human", human_path, "Human score CSV (one-shot reference scores)");
  eval_cmd->add_flag("--no-icsc", no_icsc, "Skip self-understanding and self-critique");
  eval_cmd->add_flag("--no-pt", no_pt, "Skip meta-judgement and final validation");

  std::string metric_path;
  auto* corr_cmd = app.add_subcommand("correlate", "Correlate metric scores with human scores");
  corr_cmd->add_option("--metric", metric_path, "Metric CSV: id and the five dimensions")->required()->check(CLI::ExistingFile);
  corr_cmd->add_option("--human", human_path, "Human CSV: id, rater and the five dimensions")->required()->check(CLI::ExistingFile);

  std::string audio_set_path;
  auto* sweep_cmd = app.add_subcommand("sweep", "Stimulus ablation: correlation deltas against the no-stimulus baseline");
  sweep_cmd->add_option("--audio-set", audio_set_path, "CSV with columns id,audio")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--human", human_path, "Human score CSV")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--runs", runs, "Judge runs per clip")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--mode", mode, "zero_shot or one_shot");

  auto* check_cmd = app.add_subcommand("backends-check", "Query and validate backend capabilities");

  auto* verify_cmd = app.add_subcommand("verify-manifest", "Check the manifest digest chain of the output directory");

  std::string trace_path;
  auto* replay_cmd = app.add_subcommand("replay-trace", "Re-issue a recorded trace and compare response digests");
  replay_cmd->add_option("--trace", trace_path, "trace.jsonl")->required()->check(CLI::ExistingFile);

  std::string host = "127.0.0.1", token;
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve-mock", "Serve the mock backend over HTTP");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port (0 picks a free one)");
  serve_cmd->add_option("--token", token, "Required bearer token");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    PipelineConfig config = load_config(g);

    if (*plan_cmd) {
      auto p = make_pipeline(config);
      p.plan(read_file(instruction_path));
      std::cout << p.out("plan.json").string() << "\n";
    } else if (*synth_cmd) {
      auto p = make_pipeline(config);
      p.synthesize(read_plan(plan_path.empty() ? p.out("plan.json") : fs::path(plan_path)));
      std::cout << p.out("speech.wav").string() << "\n";
    } else if (*compose_cmd) {
      auto p = make_pipeline(config);
      auto sheet = p.compose(read_plan(plan_path.empty() ? p.out("plan.json") : fs::path(plan_path)));
      std::cout << p.out("cues.json").string() << " (" << sheet.all_cues().size() << " cues)\n";
    } else if (*mix_cmd) {
      auto p = make_pipeline(config);
      p.mix();
      std::cout << p.out("master.wav").string() << "\n";
    } else if (*gen_cmd) {
      auto p = make_pipeline(config);
      p.generate(read_file(instruction_path));
      for (const char* f : {"plan.json", "speech.wav", "cues.json", "master.wav", "manifest.json"}) {
        std::cout << p.out(f).string() << "\n";
      }
    } else if (*eval_cmd) {
      auto p = make_pipeline(config);
      EvaluateOptions opts;
      opts.runs = runs;
      opts.stimulus = StimulusKind::parse(stimulus);
      opts.mode = mode_from_string(mode);
      opts.icsc = !no_icsc;
      opts.perspective_taking = !no_pt;
      if (!context_path.empty()) opts.context = read_file(context_path);
      if (opts.mode == Mode::kOneShot) {
        if (reference_audio.empty() || reference_id.empty() || human_path.empty()) {
          throw ConfigError("one_shot mode needs --reference-audio, --reference-id and --human");
        }
        opts.reference = ReferenceExample{reference_audio, HumanScores::load_csv(human_path).mode(reference_id)};
      }
      auto report = p.evaluate(audio_path, opts);
      std::cout << "runs ok " << report.successful_runs() << "/" << report.runs.size() << "\n";
      for (auto d : kAllDimensions) {
        std::printf("  %-16s mean=%.3f std=%.3f\n", std::string(to_string(d)).c_str(), report.mean[d], report.std[d]);
      }
      std::printf("  %-16s %.3f\n", "four_dim_mean", report.four_dimension_mean);
    } else if (*corr_cmd) {
      auto metric_scores = HumanScores::load_csv(metric_path);
      auto human = HumanScores::load_csv(human_path);
      std::map<std::string, ScoreVector> metric;
      for (const auto& id : metric_scores.ids()) metric[id] = metric_scores.mean(id);
      auto rows = correlate(metric, human);
      fs::create_directories(config.output_dir);
      write_file(config.output_dir / "correlation.csv", correlation_csv(rows));
      const std::string summary = correlation_summary(rows, metric.size());
      write_file(config.output_dir / "correlation.txt", summary);
      std::cout << summary;
    } else if (*sweep_cmd) {
      auto p = make_pipeline(config);
      auto human = HumanScores::load_csv(human_path);
      SweepInput input;
      std::istringstream lines(read_file(audio_set_path));
      std::string line;
      bool header = true;
      while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
          header = false;
          continue;
        }
        auto comma = line.find(',');
        if (comma == std::string::npos) throw SchemaViolation(audio_set_path, "expected id,audio rows");
        input.audio_set.emplace_back(line.substr(0, comma), line.substr(comma + 1));
      }
      input.options.runs = runs;
      input.options.mode = mode_from_string(mode);
      auto backend = make_backend(config);
      auto templates = config.templates ? TemplateSet::from_directory(*config.templates) : TemplateSet::builtin();
      auto rows = stimuli_sweep(*backend, templates, input, human);
      fs::create_directories(config.output_dir);
      const std::string csv = sweep_csv(rows);
      write_file(config.output_dir / "sweep.csv", csv);
      std::cout << csv;
    } else if (*check_cmd) {
      auto backend = make_backend(config);
      auto caps_json = wire::capabilities(backend->capabilities());
      auto problems = wire::validate_response(endpoint::kCapabilities, caps_json);
      std::cout << caps_json.dump(2) << "\n";
      for (const auto& p : problems) std::cerr << "schema: " << p << "\n";
      if (!problems.empty()) return kBackend;
    } else if (*verify_cmd) {
      auto problems = verify_manifest(config.output_dir);
      for (const auto& p : problems) std::cerr << p << "\n";
      if (!problems.empty()) return kSchema;
      std::cout << "manifest ok\n";
    } else if (*replay_cmd) {
      auto backend = make_backend(config);
      auto mismatches = replay_trace(TraceLog::load(trace_path), *backend);
      for (const auto& m : mismatches) {
        std::cerr << "seq " << m.seq << " " << m.endpoint << ": expected " << m.expected << " got " << m.actual << "\n";
      }
      if (!mismatches.empty()) return kBackend;
      std::cout << "trace replay ok\n";
    } else if (*serve_cmd) {
      auto backend = make_backend(config);
      ProtocolServer server(*backend, token);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      spdlog::set_level(spdlog::level::info);
      spdlog::info("serving {} on {}:{}", backend->id(), host, port);
      if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
      g_server = nullptr;
    }
  } catch (const Error& e) {
    std::cerr << "storycast: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "storycast: " << e.what() << "\n";
    return kGeneral;
  }
  return kOk;
}
