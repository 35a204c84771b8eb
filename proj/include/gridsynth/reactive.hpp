#pragma once

#include <span>
#include <string>
#include <vector>

#include "gridsynth/model.hpp"
#include "gridsynth/powerflow.hpp"

namespace gridsynth::reactive {

struct ReactiveConfig {
  double condenser_mvar = 200.0;
  double prune_frac = 0.20;
  double coverage_stop = 0.20;
  double restore_threshold = 0.50;
  int max_iterations = 10000;
  powerflow::AcOpfOptions opf;

  void validate() const;
};

/// Line ratings before doubling, indexed by branch.
struct SavedLimits {
  std::vector<double> rate_mva;
  std::vector<bool> doubled;
};

/// Doubles every line rating; transformers and impedances are untouched.
SavedLimits double_limits(GridModel& model);

struct ReactiveIteration {
  int iter = 0;
  int active_condensers = 0;
  bool feasible = false;
  std::vector<std::string> pruned;  // bus ids
  bool rolled_back = false;
};

struct ReactiveResult {
  std::vector<ReactiveIteration> trace;
  powerflow::OPFSolution solution;  // last feasible AC solution
  int active = 0;
  int rollbacks = 0;
  bool coverage_reached = false;
};

/// Installs a condenser at every bus, then repeatedly removes the least-used
/// fraction while the AC surrogate stays feasible, until fewer than
/// `coverage_stop` of buses keep one. Throws InfeasibleError if the grid is
/// infeasible even with full coverage.
ReactiveResult place_and_prune(GridModel& model, std::span<const double> caps, std::span<const double> bus_load_mw,
                               const ReactiveConfig& config);

/// Lines loaded below `threshold` of their doubled rating return to the
/// original rating; the rest stay doubled. Returns the number left doubled.
int restore_limits(GridModel& model, const SavedLimits& saved, std::span<const double> loading, double threshold);

/// One line per iteration: {iter, active_condensers, feasible, pruned, rolled_back}.
std::string trace_jsonl(const ReactiveResult& result);

}  // namespace gridsynth::reactive
