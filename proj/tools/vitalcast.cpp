// vitalcast: config-driven pipeline from workout-stream video to correlation reports.

#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vitalcast/vitalcast.hpp"

namespace vc = vitalcast;

namespace {

struct StageArgs {
  std::string config;
  std::vector<std::string> overrides;
  long jobs = -1;
};

void add_stage_options(CLI::App* cmd, StageArgs& args) {
  cmd->add_option("-c,--config", args.config, "pipeline config (JSON)")->required();
  cmd->add_option("-s,--set", args.overrides, "override a config key, e.g. clean.z_threshold=2.5")->take_all();
  cmd->add_option("-j,--jobs", args.jobs, "worker threads for frame-parallel stages (0 = all cores)");
}

vc::PipelineConfig load(const StageArgs& args) {
  auto overrides = args.overrides;
  if (args.jobs >= 0) overrides.push_back("jobs=" + std::to_string(args.jobs));
  return vc::load_config_file(args.config, overrides);
}

void report(const vc::StageResult& r, const vc::PipelineConfig& cfg) {
  std::cout << r.stage << ": ";
  if (r.manifest.value("skipped", false)) {
    std::cout << "skipped (" << r.manifest.value("reason", std::string()) << ")\n";
    return;
  }
  std::cout << r.manifest["counts"].dump() << " -> " << cfg.stage_dir(r.stage).string() << "\n";
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const vc::Error& e) {
    std::cerr << "vitalcast: " << e.what() << "\n";
    return vc::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "vitalcast: " << e.what() << "\n";
    return vc::kExitStageFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extract overlay telemetry from workout videos and correlate it with emotion exports"};
  app.set_version_flag("--version", std::string(vc::kVersion));
  app.require_subcommand(1);

  using StageFn = vc::StageResult (*)(const vc::PipelineConfig&);
  struct StageCommand {
    const char* name;
    const char* help;
    StageFn fn;
  };
  const std::vector<StageCommand> stages = {
      {"prep", "trim, normalise, concatenate and crop videos, then sample frames", vc::run_prep},
      {"extract", "OCR the metric ROIs of every frame into telemetry.csv", vc::run_extract},
      {"clean", "z-score outlier removal and EMA smoothing", vc::run_clean},
      {"ingest-emotion", "parse the emotion export into canonical emotion.csv", vc::run_ingest_emotion},
      {"analyze", "align, correlate and write the session report", vc::run_analyze},
  };

  std::vector<StageArgs> stage_args(stages.size());
  std::vector<CLI::App*> stage_cmds;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    auto* cmd = app.add_subcommand(stages[i].name, stages[i].help);
    add_stage_options(cmd, stage_args[i]);
    stage_cmds.push_back(cmd);
  }

  StageArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "run every stage in order");
  add_stage_options(run_cmd, run_args);

  std::string fixture_path;
  std::string fixture_out = "fixtures";
  std::vector<std::string> fixture_overrides;
  long fixture_jobs = 0;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic fixture under <out>/<name>/");
  synth_cmd->add_option("-f,--fixture", fixture_path, "fixture layout config (JSON); defaults apply when omitted");
  synth_cmd->add_option("-o,--out", fixture_out, "parent directory for the fixture")->capture_default_str();
  synth_cmd->add_option("-s,--set", fixture_overrides, "override a fixture key, e.g. duration=120")->take_all();
  synth_cmd->add_option("-j,--jobs", fixture_jobs, "render threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : vc::kExitConfig;
  }

  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (!stage_cmds[i]->parsed()) continue;
    return guarded([&] {
      const auto cfg = load(stage_args[i]);
      report(stages[i].fn(cfg), cfg);
      return 0;
    });
  }
  if (run_cmd->parsed()) {
    return guarded([&] {
      const auto cfg = load(run_args);
      for (const auto& r : vc::run_pipeline(cfg)) report(r, cfg);
      return 0;
    });
  }
  return guarded([&] {
    vc::json doc = vc::json::object();
    if (!fixture_path.empty()) {
      doc = vc::json::parse(vc::read_text_file(fixture_path), nullptr, false, true);
      if (doc.is_discarded()) throw vc::Error(vc::Errc::ConfigError, fixture_path + " is not valid JSON");
    }
    const auto fc = vc::load_fixture_config(doc, fixture_overrides);
    if (fixture_jobs < 0) throw vc::Error(vc::Errc::ConfigError, "--jobs must be >= 0");
    const auto out = vc::write_fixture(fc, fixture_out, static_cast<std::size_t>(fixture_jobs));
    std::cout << "synth: " << out.truth.hr.size() << " frames, " << out.spike_times.size() << " spikes -> "
              << out.dir.string() << "\n";
    return 0;
  });
}
