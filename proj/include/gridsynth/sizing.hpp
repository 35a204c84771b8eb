#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gridsynth/lineparams.hpp"
#include "gridsynth/model.hpp"
#include "gridsynth/scenarios.hpp"

namespace gridsynth::sizing {

struct SizingConfig {
  double lambda = 0.5;
  double batch_frac = 0.05;
  double underutil_frac = 0.30;
  int tau_initial = 0;
  int tau_escalation_start = 50;
  int max_circuits = 8;
  std::uint64_t rng_seed = 1;
  /// A line counts as overloaded when its violation exceeds this (MW).
  double overload_tol_mw = 1e-6;
  int max_iterations = 100000;

  void validate() const;
};

/// Solution of the relaxed limit problem for one injection scenario.
struct ScenarioViolation {
  std::vector<double> delta_mw;       // per branch; zero for transformers
  std::vector<double> flow_mw;        // per branch
  std::vector<double> redispatch_mw;  // per generator, |pg - pg_o|
  double objective = 0.0;
};

/// Branch flow change (MW) per MW injected at a bus and withdrawn at the slack.
struct ShiftFactors {
  int slack = -1;
  std::vector<std::vector<double>> by_bus;  // [bus][branch]; empty for buses without generators
};

ShiftFactors shift_factors(const GridModel& model);

/// Minimizes lambda * sum(redispatch) + (1 - lambda) * sum(violation) over DC
/// flows, with line limits relaxed by the violation and generators moving
/// around the scenario dispatch inside their limits.
ScenarioViolation line_upgrade_lp(const GridModel& model, const scenarios::InjectionScenario& scenario, double lambda);
ScenarioViolation line_upgrade_lp(const GridModel& model, const ShiftFactors& factors,
                                  const scenarios::InjectionScenario& scenario, double lambda);

struct ViolationReport {
  std::vector<double> delta_mw;     // per branch, max over scenarios
  std::vector<double> utilization;  // per branch, max |flow| / rating over scenarios
  std::vector<std::vector<double>> redispatch_mw;  // [scenario][generator]

  int overloaded(double tol) const;
};

ViolationReport aggregate_violations(const GridModel& model, std::span<const ScenarioViolation> results);

struct BatchResult {
  std::vector<std::string> changed;    // branch ids, in the order applied
  std::vector<std::string> saturated;  // newly found at the top option
  int candidates = 0;
};

/// Batch size for `candidates` eligible lines out of `lines`.
int batch_size(int candidates, int lines, double batch_frac);

/// Upgrades a random batch of overloaded lines. Lines with no higher option
/// are marked in `saturated` and skipped from then on.
BatchResult upgrade_batch(GridModel& model, const ViolationReport& report, const SizingConfig& config,
                          const lineparams::LineConfig& line_config, std::mt19937_64& rng,
                          std::vector<bool>& saturated);

/// Downsizes a random batch of lines with utilization strictly below the
/// threshold that still have a lower option.
BatchResult downsize_batch(GridModel& model, const ViolationReport& report, const SizingConfig& config,
                           const lineparams::LineConfig& line_config, std::mt19937_64& rng);

struct IterationRecord {
  int iter = 0;
  int tau = 0;
  int overloaded = 0;
  int underutilized = 0;
  std::vector<std::string> upgraded;
  std::vector<std::string> downsized;
};

struct SizingResult {
  std::vector<IterationRecord> trace;
  ViolationReport final_report;
  int final_tau = 0;
  int final_overloaded = 0;
  int upgrades = 0;
  int downsizes = 0;
};

SizingResult run_sizing(GridModel& model, const std::vector<scenarios::InjectionScenario>& scenarios,
                        const SizingConfig& config, const lineparams::LineConfig& line_config);

/// One line per iteration: {iter, tau, overloaded, underutilized, upgraded, downsized}.
std::string trace_jsonl(const SizingResult& result);

/// Maximum |DC flow| per branch over the scenario dispatches.
std::vector<double> max_abs_flows(const GridModel& model, const std::vector<scenarios::InjectionScenario>& scenarios);

/// Resizes transformers to the ladder size covering their maximum flow.
int size_transformers(GridModel& model, const std::vector<scenarios::InjectionScenario>& scenarios,
                      const lineparams::TransformerTables& tables, std::span<const double> ladder);

}  // namespace gridsynth::sizing
