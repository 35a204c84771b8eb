#include "gridsynth/sizing.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <numeric>
#include <spdlog/spdlog.h>

#include "gridsynth/error.hpp"
#include "gridsynth/powerflow.hpp"
#include "gridsynth/solver.hpp"

namespace gridsynth::sizing {

namespace {

// Keeps the violation minimal when one of the objective weights is zero.
constexpr double kTieBreakWeight = 1e-6;

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

std::vector<int> draw(std::vector<int> candidates, int count, std::mt19937_64& rng) {
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(candidates.size()) - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  candidates.resize(count);
  return candidates;
}

std::mt19937_64 substream(std::uint64_t seed, int iter, int step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iter), static_cast<std::uint32_t>(step)};
  return std::mt19937_64(seq);
}

}  // namespace

void SizingConfig::validate() const {
  if (!in_unit(lambda)) throw ValidationError(fmt::format("sizing: lambda {} outside [0, 1]", lambda));
  if (!in_unit(batch_frac)) throw ValidationError(fmt::format("sizing: batch_frac {} outside [0, 1]", batch_frac));
  if (!in_unit(underutil_frac)) {
    throw ValidationError(fmt::format("sizing: underutil_frac {} outside [0, 1]", underutil_frac));
  }
  if (tau_initial < 0 || tau_escalation_start < 1 || max_circuits < 1) {
    throw ValidationError("sizing: tau and circuit settings must be positive");
  }
}

ShiftFactors shift_factors(const GridModel& model) {
  ShiftFactors f;
  f.slack = powerflow::choose_slack(model);
  f.by_bus.resize(model.num_buses());
  std::vector<double> inj(model.num_buses(), 0.0);
  for (const auto& g : model.generators) {
    auto& column = f.by_bus[g.bus];
    if (!column.empty()) continue;
    if (g.bus == f.slack) {
      column.assign(model.num_branches(), 0.0);
      continue;
    }
    inj[g.bus] = 1.0;
    column = powerflow::dc_powerflow(model, inj, f.slack).p_from_mw;
    inj[g.bus] = 0.0;
  }
  return f;
}

ScenarioViolation line_upgrade_lp(const GridModel& model, const scenarios::InjectionScenario& scenario, double lambda) {
  return line_upgrade_lp(model, shift_factors(model), scenario, lambda);
}

ScenarioViolation line_upgrade_lp(const GridModel& model, const ShiftFactors& factors,
                                  const scenarios::InjectionScenario& scenario, double lambda) {
  const int nb = model.num_branches();
  const int ng = static_cast<int>(model.generators.size());
  const auto& sc = scenario.scenario;
  const auto& base = scenario.dispatch;
  const double w_redispatch = lambda + kTieBreakWeight;
  const double w_violation = 1.0 - lambda + kTieBreakWeight;

  auto inj = powerflow::bus_injections(model, base.pg_mw, sc.bus_load_mw);
  const auto base_flow = powerflow::dc_powerflow(model, inj, factors.slack).p_from_mw;

  // Redispatch enters as pg = pg_o + up - down with a zero net change.
  solver::LinearProgram lp;
  std::vector<int> up(ng), down(ng);
  solver::Constraint balance{{}, {}, solver::Sense::kEqual, 0.0, "redispatch balance"};
  for (int g = 0; g < ng; ++g) {
    const auto& gen = model.generators[g];
    double po = base.pg_mw[g];
    double hi = base.committed[g] ? sc.caps[g] : 0.0;
    double lo = base.committed[g] ? std::min(gen.pmin_mw, hi) : 0.0;
    up[g] = lp.add_variable(w_redispatch, 0.0, std::max(0.0, hi - po));
    down[g] = lp.add_variable(w_redispatch, 0.0, std::max(0.0, po - lo));
    balance.cols.insert(balance.cols.end(), {up[g], down[g]});
    balance.coefs.insert(balance.coefs.end(), {1.0, -1.0});
  }
  lp.add_constraint(std::move(balance));

  std::vector<int> delta(nb, -1);
  for (int k = 0; k < nb; ++k) {
    const auto& br = model.branches[k];
    if (!br.is_line()) continue;
    delta[k] = lp.add_variable(w_violation, 0.0, solver::kInf);
    solver::Constraint row;
    for (int g = 0; g < ng; ++g) {
      double h = factors.by_bus[model.generators[g].bus][k];
      if (h == 0.0) continue;
      row.cols.insert(row.cols.end(), {up[g], down[g]});
      row.coefs.insert(row.coefs.end(), {h, -h});
    }
    auto hi = row, lo = row;
    hi.cols.push_back(delta[k]);
    hi.coefs.push_back(-1.0);
    hi.sense = solver::Sense::kLessEqual;
    hi.rhs = br.rate_mva - base_flow[k];
    hi.name = "limit+ " + br.id;
    lo.cols.push_back(delta[k]);
    lo.coefs.push_back(1.0);
    lo.sense = solver::Sense::kGreaterEqual;
    lo.rhs = -br.rate_mva - base_flow[k];
    lo.name = "limit- " + br.id;
    lp.add_constraint(std::move(hi));
    lp.add_constraint(std::move(lo));
  }

  auto res = solver::solve_lp(lp);
  if (res.status != solver::LpStatus::kOptimal) {
    std::string where = res.worst_row >= 0 ? lp.rows()[res.worst_row].name : std::string("unknown");
    throw NumericalError(fmt::format("line upgrade LP at hour {} is {} ({})", sc.hour,
                                     solver::to_string(res.status), where));
  }
  ScenarioViolation out;
  out.delta_mw.assign(nb, 0.0);
  out.flow_mw = base_flow;
  out.redispatch_mw.resize(ng);
  double total_delta = 0.0, total_redispatch = 0.0;
  for (int g = 0; g < ng; ++g) {
    double shift = res.x[up[g]] - res.x[down[g]];
    out.redispatch_mw[g] = std::abs(shift);
    total_redispatch += out.redispatch_mw[g];
    if (shift == 0.0) continue;
    const auto& column = factors.by_bus[model.generators[g].bus];
    for (int k = 0; k < nb; ++k) out.flow_mw[k] += column[k] * shift;
  }
  for (int k = 0; k < nb; ++k) {
    if (delta[k] >= 0) out.delta_mw[k] = std::max(0.0, std::abs(out.flow_mw[k]) - model.branches[k].rate_mva);
    total_delta += out.delta_mw[k];
  }
  out.objective = lambda * total_redispatch + (1.0 - lambda) * total_delta;
  return out;
}

int ViolationReport::overloaded(double tol) const {
  return static_cast<int>(std::count_if(delta_mw.begin(), delta_mw.end(), [&](double d) { return d > tol; }));
}

ViolationReport aggregate_violations(const GridModel& model, std::span<const ScenarioViolation> results) {
  const int nb = model.num_branches();
  ViolationReport r;
  r.delta_mw.assign(nb, 0.0);
  r.utilization.assign(nb, 0.0);
  for (const auto& s : results) {
    for (int k = 0; k < nb; ++k) {
      r.delta_mw[k] = std::max(r.delta_mw[k], s.delta_mw[k]);
      double rate = model.branches[k].rate_mva;
      if (rate > 0.0) r.utilization[k] = std::max(r.utilization[k], std::abs(s.flow_mw[k]) / rate);
    }
    r.redispatch_mw.push_back(s.redispatch_mw);
  }
  return r;
}

int batch_size(int candidates, int lines, double batch_frac) {
  if (candidates <= 0) return 0;
  long quota = std::lround(batch_frac * lines);
  return static_cast<int>(std::min<long>(candidates, std::max(1L, quota)));
}

BatchResult upgrade_batch(GridModel& model, const ViolationReport& report, const SizingConfig& config,
                          const lineparams::LineConfig& line_config, std::mt19937_64& rng,
                          std::vector<bool>& saturated) {
  saturated.resize(model.num_branches(), false);
  BatchResult out;
  std::vector<int> candidates;
  for (int k = 0; k < model.num_branches(); ++k) {
    auto& br = model.branches[k];
    if (!br.is_line() || saturated[k] || report.delta_mw[k] <= config.overload_tol_mw) continue;
    if (lineparams::upgrade_index(br, config.max_circuits) < 0) {
      saturated[k] = true;
      out.saturated.push_back(br.id);
      spdlog::info("line '{}' is overloaded at its largest option", br.id);
      continue;
    }
    candidates.push_back(k);
  }
  out.candidates = static_cast<int>(candidates.size());
  for (int k : draw(candidates, batch_size(out.candidates, model.num_lines(), config.batch_frac), rng)) {
    auto& br = model.branches[k];
    lineparams::apply_option(br, lineparams::upgrade_index(br, config.max_circuits), line_config);
    out.changed.push_back(br.id);
  }
  return out;
}

BatchResult downsize_batch(GridModel& model, const ViolationReport& report, const SizingConfig& config,
                           const lineparams::LineConfig& line_config, std::mt19937_64& rng) {
  BatchResult out;
  std::vector<int> candidates;
  for (int k = 0; k < model.num_branches(); ++k) {
    const auto& br = model.branches[k];
    if (!br.is_line() || report.utilization[k] >= config.underutil_frac) continue;
    if (lineparams::downsize_index(br) < 0) continue;
    candidates.push_back(k);
  }
  out.candidates = static_cast<int>(candidates.size());
  for (int k : draw(candidates, batch_size(out.candidates, model.num_lines(), config.batch_frac), rng)) {
    auto& br = model.branches[k];
    lineparams::apply_option(br, lineparams::downsize_index(br), line_config);
    out.changed.push_back(br.id);
  }
  return out;
}

SizingResult run_sizing(GridModel& model, const std::vector<scenarios::InjectionScenario>& scenarios,
                        const SizingConfig& config, const lineparams::LineConfig& line_config) {
  config.validate();
  SizingResult result;
  std::vector<bool> saturated(model.num_branches(), false);
  int tau = config.tau_initial;
  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    if (iter >= config.tau_escalation_start) ++tau;
    auto factors = shift_factors(model);
    std::vector<ScenarioViolation> solved;
    solved.reserve(scenarios.size());
    for (const auto& s : scenarios) solved.push_back(line_upgrade_lp(model, factors, s, config.lambda));
    auto report = aggregate_violations(model, solved);

    IterationRecord rec;
    rec.iter = iter;
    rec.tau = tau;
    rec.overloaded = report.overloaded(config.overload_tol_mw);
    for (int k = 0; k < model.num_branches(); ++k) {
      if (model.branches[k].is_line() && report.utilization[k] < config.underutil_frac) ++rec.underutilized;
    }
    result.final_report = std::move(report);
    result.final_tau = tau;
    result.final_overloaded = rec.overloaded;
    spdlog::info("sizing iteration {}: {} overloaded, {} underutilized, tau {}", iter, rec.overloaded,
                 rec.underutilized, tau);
    if (rec.overloaded <= tau) {
      result.trace.push_back(std::move(rec));
      return result;
    }

    auto up_rng = substream(config.rng_seed, iter, 2);
    auto down_rng = substream(config.rng_seed, iter, 3);
    auto up = upgrade_batch(model, result.final_report, config, line_config, up_rng, saturated);
    auto down = downsize_batch(model, result.final_report, config, line_config, down_rng);
    result.upgrades += static_cast<int>(up.changed.size());
    result.downsizes += static_cast<int>(down.changed.size());
    rec.upgraded = std::move(up.changed);
    rec.downsized = std::move(down.changed);
    result.trace.push_back(std::move(rec));
  }
  spdlog::warn("sizing stopped at the iteration cap with {} overloaded lines", result.final_overloaded);
  return result;
}

std::string trace_jsonl(const SizingResult& result) {
  std::string out;
  for (const auto& r : result.trace) {
    nlohmann::ordered_json j{{"iter", r.iter},
                             {"tau", r.tau},
                             {"overloaded", r.overloaded},
                             {"underutilized", r.underutilized},
                             {"upgraded", r.upgraded},
                             {"downsized", r.downsized}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<double> max_abs_flows(const GridModel& model, const std::vector<scenarios::InjectionScenario>& scenarios) {
  std::vector<double> peak(model.num_branches(), 0.0);
  for (const auto& s : scenarios) {
    auto inj = powerflow::bus_injections(model, s.dispatch.pg_mw, s.scenario.bus_load_mw);
    auto pf = powerflow::dc_powerflow(model, inj, powerflow::choose_slack(model, s.dispatch.pg_mw));
    for (int k = 0; k < model.num_branches(); ++k) peak[k] = std::max(peak[k], std::abs(pf.p_from_mw[k]));
  }
  return peak;
}

int size_transformers(GridModel& model, const std::vector<scenarios::InjectionScenario>& scenarios,
                      const lineparams::TransformerTables& tables, std::span<const double> ladder) {
  auto peak = max_abs_flows(model, scenarios);
  return lineparams::resize_transformers(model, peak, tables, ladder);
}

}  // namespace gridsynth::sizing
