#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridsynth/assignment.hpp"
#include "gridsynth/geodata.hpp"
#include "gridsynth/lineparams.hpp"
#include "gridsynth/metrics.hpp"
#include "gridsynth/model.hpp"
#include "gridsynth/reactive.hpp"
#include "gridsynth/scenarios.hpp"
#include "gridsynth/sizing.hpp"
#include "gridsynth/topology.hpp"

namespace gridsynth::pipeline {

struct InputPaths {
  std::filesystem::path lines;
  std::filesystem::path substations;
  std::filesystem::path generators;
  std::filesystem::path loads;
  std::filesystem::path renewables;
  std::filesystem::path form1;
  std::filesystem::path cost_catalog;
  std::filesystem::path conductors;
  std::filesystem::path transformer_impedance;
  std::filesystem::path transformer_xr;
  std::optional<std::filesystem::path> edits;
};

struct StackWindow {
  std::string name;
  int first_hour = 0;
  int last_hour = 0;
};

struct RunConfig {
  InputPaths inputs;
  double radius_m = topology::kDefaultRadiusMeters;
  topology::DiagnoseOptions diagnose;
  int k_nearest = 50;
  assignment::CostConfig costs;
  scenarios::CommitmentOptions commitment;
  lineparams::LineConfig lines;
  sizing::SizingConfig sizing;
  std::vector<double> transformer_ladder = lineparams::default_size_ladder();
  reactive::ReactiveConfig reactive;
  int eval_first_hour = 0;
  int eval_hours = 744;
  std::vector<StackWindow> stack_windows;
  std::uint64_t rng_seed = 1;
  std::filesystem::path output_dir = "out";
  std::filesystem::path checkpoint_dir = "out/checkpoints";
  std::string case_name = "gridsynth_case";

  void validate() const;
};

/// Relative paths resolve against `base_dir`.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::ordered_json config_to_json(const RunConfig& config);
RunConfig read_config(const std::filesystem::path& path);

enum class Stage { kIngest, kTopology, kAssign, kScenarios, kSize, kReactive, kEvaluate };

inline constexpr Stage kAllStages[] = {Stage::kIngest,    Stage::kTopology, Stage::kAssign,  Stage::kScenarios,
                                       Stage::kSize,      Stage::kReactive, Stage::kEvaluate};

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

struct PipelineState {
  geo::Dataset data;
  std::shared_ptr<const std::vector<geo::LoadRecord>> loads;
  assignment::RenewableTotals renewables;
  GridModel model;
  std::vector<scenarios::InjectionScenario> scenarios;
  std::vector<topology::TopologyDiagnostic> diagnostics;
  sizing::SizingResult sizing;
  reactive::ReactiveResult reactive;
  metrics::EvaluationReport report;
  /// Evaluations of stack windows that fall outside the main window.
  std::map<std::string, metrics::EvaluationReport> window_reports;
  /// Per-stage summaries, in stage order.
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  std::optional<Stage> last_stage;
};

/// Reads every raw input, failing with a file/line diagnostic on bad data.
void load_inputs(PipelineState& state, const RunConfig& config);

void run_stage(Stage stage, PipelineState& state, const RunConfig& config);

std::filesystem::path checkpoint_path(const RunConfig& config, Stage stage);
void write_checkpoint(const PipelineState& state, const RunConfig& config, Stage stage);
/// Restores the model (and scenarios, once built) saved after `stage`.
void read_checkpoint(PipelineState& state, const RunConfig& config, Stage stage);

/// Runs stages `first` through `last`, resuming from the checkpoint of the
/// stage before `first`, and checkpoints after each. A failing stage rethrows
/// with the stage name and the last checkpoint path.
PipelineState run_pipeline(const RunConfig& config, Stage first = Stage::kIngest, Stage last = Stage::kEvaluate);

/// Writes the case, traces, report and dispatch stacks to the output directory.
void write_outputs(const PipelineState& state, const RunConfig& config);

}  // namespace gridsynth::pipeline
