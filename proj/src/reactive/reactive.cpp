#include "gridsynth/reactive.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <numeric>
#include <spdlog/spdlog.h>

#include "gridsynth/error.hpp"

namespace gridsynth::reactive {

void ReactiveConfig::validate() const {
  auto unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!(condenser_mvar > 0.0)) throw ValidationError("reactive: condenser size must be positive");
  if (!unit(prune_frac) || !unit(coverage_stop) || !unit(restore_threshold)) {
    throw ValidationError("reactive: fractions must lie in (0, 1]");
  }
}

SavedLimits double_limits(GridModel& model) {
  SavedLimits saved;
  for (auto& br : model.branches) {
    saved.rate_mva.push_back(br.rate_mva);
    saved.doubled.push_back(br.doubled);
    if (!br.is_line()) continue;
    br.rate_mva *= 2.0;
    br.doubled = true;
  }
  return saved;
}

namespace {

int count_active(const GridModel& model) {
  return static_cast<int>(
      std::count_if(model.condensers.begin(), model.condensers.end(), [](const auto& c) { return c.active; }));
}

}  // namespace

ReactiveResult place_and_prune(GridModel& model, std::span<const double> caps, std::span<const double> bus_load_mw,
                               const ReactiveConfig& config) {
  config.validate();
  model.condensers.clear();
  for (int i = 0; i < model.num_buses(); ++i) model.condensers.push_back({i, config.condenser_mvar, true});

  ReactiveResult result;
  auto sol = powerflow::ac_opf_surrogate(model, caps, bus_load_mw, config.opf);
  if (!sol.feasible) {
    std::string why = sol.violations.empty() ? std::string("no detail") : sol.violations.front();
    throw InfeasibleError(fmt::format("AC infeasible with a condenser at every bus ({} violations; first: {})",
                                      sol.violations.size(), why));
  }
  const double stop = config.coverage_stop * model.num_buses();
  std::vector<bool> pinned(model.condensers.size(), false);
  double frac = config.prune_frac;
  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    int active = count_active(model);
    if (active < stop) {
      result.coverage_reached = true;
      break;
    }
    std::vector<int> candidates;
    for (int c = 0; c < static_cast<int>(model.condensers.size()); ++c) {
      if (model.condensers[c].active && !pinned[c]) candidates.push_back(c);
    }
    if (candidates.empty()) {
      spdlog::warn("reactive: every remaining condenser is required; {} of {} buses keep one", active,
                   model.num_buses());
      break;
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
      return std::abs(sol.condenser_q[a]) < std::abs(sol.condenser_q[b]);
    });
    int k = std::clamp(static_cast<int>(std::lround(frac * active)), 1, static_cast<int>(candidates.size()));
    candidates.resize(k);

    ReactiveIteration rec;
    rec.iter = iter;
    for (int c : candidates) {
      model.condensers[c].active = false;
      rec.pruned.push_back(model.buses[model.condensers[c].bus].id);
    }
    auto trial = powerflow::ac_opf_surrogate(model, caps, bus_load_mw, config.opf);
    rec.feasible = trial.feasible;
    if (trial.feasible) {
      sol = std::move(trial);
      frac = config.prune_frac;
    } else {
      for (int c : candidates) model.condensers[c].active = true;
      rec.rolled_back = true;
      ++result.rollbacks;
      if (k == 1) pinned[candidates.front()] = true;
      frac /= 2.0;
    }
    rec.active_condensers = count_active(model);
    spdlog::info("reactive iteration {}: {} active, pruned {}{}", iter, rec.active_condensers, rec.pruned.size(),
                 rec.rolled_back ? " (rolled back)" : "");
    result.trace.push_back(std::move(rec));
  }
  result.active = count_active(model);
  result.coverage_reached = result.active < stop;
  result.solution = std::move(sol);
  return result;
}

int restore_limits(GridModel& model, const SavedLimits& saved, std::span<const double> loading, double threshold) {
  int kept = 0;
  for (int k = 0; k < model.num_branches(); ++k) {
    auto& br = model.branches[k];
    if (!br.is_line()) continue;
    if (loading[k] < threshold) {
      br.rate_mva = saved.rate_mva[k];
      br.doubled = saved.doubled[k];
    } else {
      br.doubled = true;
      ++kept;
    }
  }
  return kept;
}

std::string trace_jsonl(const ReactiveResult& result) {
  std::string out;
  for (const auto& r : result.trace) {
    nlohmann::ordered_json j{{"iter", r.iter},
                             {"active_condensers", r.active_condensers},
                             {"feasible", r.feasible},
                             {"pruned", r.pruned},
                             {"rolled_back", r.rolled_back}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace gridsynth::reactive
