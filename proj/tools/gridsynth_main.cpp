#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "gridsynth/caseio.hpp"
#include "gridsynth/error.hpp"
#include "gridsynth/pipeline.hpp"

using namespace gridsynth;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string checkpoint_dir;
  std::string output_dir;
  std::string stage;
  bool quiet = false;
};

pipeline::RunConfig load_config(const Options& o) {
  auto cfg = pipeline::read_config(o.config);
  if (o.seed) {
    cfg.rng_seed = *o.seed;
    cfg.sizing.rng_seed = *o.seed;
  }
  if (!o.output_dir.empty()) {
    cfg.output_dir = o.output_dir;
    if (o.checkpoint_dir.empty()) cfg.checkpoint_dir = cfg.output_dir / "checkpoints";
  }
  if (!o.checkpoint_dir.empty()) cfg.checkpoint_dir = o.checkpoint_dir;
  return cfg;
}

void run_stages(const Options& o, pipeline::Stage first, pipeline::Stage last) {
  auto cfg = load_config(o);
  auto state = pipeline::run_pipeline(cfg, first, last);
  pipeline::write_outputs(state, cfg);
  std::cout << state.summary.dump(2) << "\n";
}

// Latest checkpoint on disk, or the one named by --stage.
pipeline::Stage export_stage(const Options& o, const pipeline::RunConfig& cfg) {
  if (!o.stage.empty()) return pipeline::parse_stage(o.stage);
  for (int s = static_cast<int>(pipeline::Stage::kEvaluate); s > 0; --s) {
    auto stage = static_cast<pipeline::Stage>(s);
    if (fs::exists(pipeline::checkpoint_path(cfg, stage) / "case.m")) return stage;
  }
  throw ValidationError("no model checkpoint found in " + cfg.checkpoint_dir.string());
}

void run_export(const Options& o) {
  auto cfg = load_config(o);
  pipeline::PipelineState state;
  pipeline::load_inputs(state, cfg);
  auto stage = export_stage(o, cfg);
  pipeline::read_checkpoint(state, cfg, stage);
  caseio::ExportOptions opts;
  opts.case_name = cfg.case_name;
  fs::create_directories(cfg.output_dir);
  caseio::write_case(cfg.output_dir / cfg.case_name, state.model, opts);
  std::cout << "exported " << (cfg.output_dir / cfg.case_name).string() << ".{m,geojson} from stage "
            << pipeline::to_string(stage) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesize a geographic transmission grid test case from infrastructure data."};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Random seed for the sizing heuristic");
    sub->add_option("--checkpoint-dir", o.checkpoint_dir, "Checkpoint directory");
    sub->add_option("--output-dir", o.output_dir, "Output directory");
    sub->add_flag("-q,--quiet", o.quiet, "Only log warnings and errors");
  };

  struct StageCommand {
    const char* name;
    const char* help;
    pipeline::Stage stage;
  };
  const StageCommand stages[] = {
      {"ingest", "Validate the raw inputs", pipeline::Stage::kIngest},
      {"topology", "Build the connected electrical graph", pipeline::Stage::kTopology},
      {"assign", "Assign loads, cost curves and reactive limits", pipeline::Stage::kAssign},
      {"scenarios", "Select hours and build injection scenarios", pipeline::Stage::kScenarios},
      {"size", "Initialize and size line and transformer parameters", pipeline::Stage::kSize},
      {"reactive", "Place and prune synchronous condensers", pipeline::Stage::kReactive},
      {"evaluate", "Run the hourly DC and AC evaluation", pipeline::Stage::kEvaluate},
  };
  std::optional<pipeline::Stage> chosen;
  for (const auto& s : stages) {
    auto* sub = app.add_subcommand(s.name, s.help);
    add_common(sub);
    sub->callback([&chosen, stage = s.stage] { chosen = stage; });
  }
  auto* pipe = app.add_subcommand("pipeline", "Run every stage, optionally resuming at --stage");
  add_common(pipe);
  pipe->add_option("--stage", o.stage, "First stage to run; earlier stages load from checkpoints");
  auto* exp = app.add_subcommand("export", "Write the case from a checkpoint");
  add_common(exp);
  exp->add_option("--stage", o.stage, "Checkpoint to export (default: latest)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spdlog::set_level(o.quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (chosen) {
      run_stages(o, *chosen, *chosen);
    } else if (pipe->parsed()) {
      auto first = o.stage.empty() ? pipeline::Stage::kIngest : pipeline::parse_stage(o.stage);
      run_stages(o, first, pipeline::Stage::kEvaluate);
    } else {
      run_export(o);
    }
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const InfeasibleError& e) {
    spdlog::error("{}", e.what());
    return 4;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("malformed JSON: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
