#include "gridsynth/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "gridsynth/caseio.hpp"
#include "gridsynth/error.hpp"

namespace gridsynth::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(fmt::format("config: '{}' must be an object", where));
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ValidationError(fmt::format("config: unknown key '{}' in '{}'", key, where));
    }
  }
}

template <typename T>
void take(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(fmt::format("config: '{}.{}' has the wrong type", where, key));
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() || base.empty() ? p : base / p; }

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(fmt::format("cannot write {}", path.string()));
  out << text;
}

std::map<double, double> kv_map(const json& j, const std::string& where) {
  std::map<double, double> out;
  for (const auto& [k, v] : j.items()) {
    try {
      out[std::stod(k)] = v.get<double>();
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("config: bad entry '{}' in '{}'", k, where));
    }
  }
  return out;
}

std::string kv_key(double kv) { return fmt::format("{}", kv); }

double min_reserve_margin(const GridModel& model, const std::vector<scenarios::InjectionScenario>& scen) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& s : scen) {
    double load = s.scenario.total_load();
    if (load <= 0.0) continue;
    double cap = 0.0;
    for (std::size_t g = 0; g < model.generators.size(); ++g) {
      if (s.dispatch.committed[g]) cap += s.scenario.caps[g];
    }
    worst = std::min(worst, cap / load - 1.0);
  }
  return worst;
}

const scenarios::InjectionScenario& peak_scenario(const std::vector<scenarios::InjectionScenario>& scen) {
  const scenarios::InjectionScenario* best = nullptr;
  for (const auto& s : scen) {
    if (s.scenario.kind != scenarios::DispatchKind::kEconomic) continue;
    if (!best || s.scenario.total_load() > best->scenario.total_load()) best = &s;
  }
  if (!best) throw ValidationError("reactive: no economic scenario available");
  return *best;
}

std::string stage_dir_name(Stage stage) {
  return fmt::format("{}_{}", static_cast<int>(stage), to_string(stage));
}

// Lines and transformers need parameters before any flow-based stage.
void require_sized_parameters(const GridModel& model, Stage stage) {
  for (const auto& br : model.branches) {
    if (br.x == 0.0) {
      throw ValidationError(fmt::format("{}: branch {} has no parameters; run the size stage first", to_string(stage),
                                        br.id));
    }
  }
}

}  // namespace

void RunConfig::validate() const {
  if (!(radius_m > 0.0)) throw ValidationError("config: radius_m must be positive");
  if (k_nearest < 1) throw ValidationError("config: k_nearest must be at least 1");
  if (commitment.reserve_frac < 0.0) throw ValidationError("config: reserve_frac must be nonnegative");
  if (eval_hours < 1 || eval_first_hour < 0) throw ValidationError("config: evaluation window is empty");
  if (transformer_ladder.empty() || !std::is_sorted(transformer_ladder.begin(), transformer_ladder.end())) {
    throw ValidationError("config: transformer_ladder must be ascending and non-empty");
  }
  if (lines.max_circuits != sizing.max_circuits) throw ValidationError("config: circuit limits disagree");
  for (const auto& w : stack_windows) {
    if (w.first_hour < 0 || w.last_hour < w.first_hour) {
      throw ValidationError(fmt::format("config: stack window '{}' is empty", w.name));
    }
  }
  sizing.validate();
  reactive.validate();
}

RunConfig config_from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  check_keys(j, "config",
             {"inputs", "topology", "assignment", "scenarios", "lines", "sizing", "transformer_ladder", "reactive",
              "evaluation", "rng_seed", "output_dir", "checkpoint_dir", "case_name"});
  if (!j.contains("inputs")) throw ValidationError("config: missing 'inputs'");
  const auto& in = j["inputs"];
  check_keys(in, "inputs",
             {"lines", "substations", "generators", "loads", "renewables", "form1", "cost_catalog", "conductors",
              "transformer_impedance", "transformer_xr", "edits"});
  auto path = [&](const char* key, fs::path& out) {
    if (!in.contains(key)) throw ValidationError(fmt::format("config: missing 'inputs.{}'", key));
    out = resolve(base_dir, in[key].get<std::string>());
  };
  path("lines", c.inputs.lines);
  path("substations", c.inputs.substations);
  path("generators", c.inputs.generators);
  path("loads", c.inputs.loads);
  path("renewables", c.inputs.renewables);
  path("form1", c.inputs.form1);
  path("cost_catalog", c.inputs.cost_catalog);
  path("conductors", c.inputs.conductors);
  path("transformer_impedance", c.inputs.transformer_impedance);
  path("transformer_xr", c.inputs.transformer_xr);
  if (in.contains("edits")) c.inputs.edits = resolve(base_dir, in["edits"].get<std::string>());

  if (j.contains("topology")) {
    const auto& t = j["topology"];
    check_keys(t, "topology", {"radius_m", "diagnose_radius_m", "diagnose_ratio"});
    take(t, "radius_m", c.radius_m, "topology");
    take(t, "diagnose_radius_m", c.diagnose.radius_m, "topology");
    take(t, "diagnose_ratio", c.diagnose.ratio_threshold, "topology");
  }
  if (j.contains("assignment")) {
    const auto& a = j["assignment"];
    check_keys(a, "assignment", {"k_nearest", "nuclear_per_mwh", "import_per_mwh"});
    take(a, "k_nearest", c.k_nearest, "assignment");
    take(a, "nuclear_per_mwh", c.costs.nuclear_per_mwh, "assignment");
    take(a, "import_per_mwh", c.costs.import_per_mwh, "assignment");
  }
  if (j.contains("scenarios")) {
    const auto& s = j["scenarios"];
    check_keys(s, "scenarios", {"reserve_frac", "exempt_renewables"});
    take(s, "reserve_frac", c.commitment.reserve_frac, "scenarios");
    take(s, "exempt_renewables", c.commitment.exempt_renewables, "scenarios");
  }
  if (j.contains("lines")) {
    const auto& l = j["lines"];
    check_keys(l, "lines", {"gmd_ft", "mva_bands", "max_circuits", "dedup_tol"});
    if (l.contains("gmd_ft")) c.lines.gmd_ft = kv_map(l["gmd_ft"], "lines.gmd_ft");
    if (l.contains("mva_bands")) {
      c.lines.mva_bands.clear();
      for (const auto& [k, v] : l["mva_bands"].items()) {
        if (!v.is_array() || v.size() != 2) throw ValidationError("config: mva band must be [low, high]");
        c.lines.mva_bands[std::stod(k)] = {v[0].get<double>(), v[1].get<double>()};
      }
    }
    take(l, "max_circuits", c.lines.max_circuits, "lines");
    take(l, "dedup_tol", c.lines.dedup_tol, "lines");
    c.sizing.max_circuits = c.lines.max_circuits;
  }
  if (j.contains("sizing")) {
    const auto& s = j["sizing"];
    check_keys(s, "sizing",
               {"lambda", "batch_frac", "underutil_frac", "tau_initial", "tau_escalation_start", "overload_tol_mw",
                "max_iterations"});
    take(s, "lambda", c.sizing.lambda, "sizing");
    take(s, "batch_frac", c.sizing.batch_frac, "sizing");
    take(s, "underutil_frac", c.sizing.underutil_frac, "sizing");
    take(s, "tau_initial", c.sizing.tau_initial, "sizing");
    take(s, "tau_escalation_start", c.sizing.tau_escalation_start, "sizing");
    take(s, "overload_tol_mw", c.sizing.overload_tol_mw, "sizing");
    take(s, "max_iterations", c.sizing.max_iterations, "sizing");
  }
  take(j, "transformer_ladder", c.transformer_ladder, "config");
  if (j.contains("reactive")) {
    const auto& r = j["reactive"];
    check_keys(r, "reactive",
               {"condenser_mvar", "prune_frac", "coverage_stop", "restore_threshold", "max_iterations", "vmin", "vmax"});
    take(r, "condenser_mvar", c.reactive.condenser_mvar, "reactive");
    take(r, "prune_frac", c.reactive.prune_frac, "reactive");
    take(r, "coverage_stop", c.reactive.coverage_stop, "reactive");
    take(r, "restore_threshold", c.reactive.restore_threshold, "reactive");
    take(r, "max_iterations", c.reactive.max_iterations, "reactive");
    take(r, "vmin", c.reactive.opf.vmin, "reactive");
    take(r, "vmax", c.reactive.opf.vmax, "reactive");
  }
  if (j.contains("evaluation")) {
    const auto& e = j["evaluation"];
    check_keys(e, "evaluation", {"first_hour", "hours", "stack_windows"});
    take(e, "first_hour", c.eval_first_hour, "evaluation");
    take(e, "hours", c.eval_hours, "evaluation");
    if (e.contains("stack_windows")) {
      for (const auto& w : e["stack_windows"]) {
        check_keys(w, "evaluation.stack_windows", {"name", "first_hour", "last_hour"});
        StackWindow sw;
        take(w, "name", sw.name, "stack_windows");
        take(w, "first_hour", sw.first_hour, "stack_windows");
        take(w, "last_hour", sw.last_hour, "stack_windows");
        c.stack_windows.push_back(std::move(sw));
      }
    }
  }
  take(j, "rng_seed", c.rng_seed, "config");
  c.sizing.rng_seed = c.rng_seed;
  if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
  else c.output_dir = resolve(base_dir, c.output_dir);
  if (j.contains("checkpoint_dir")) c.checkpoint_dir = resolve(base_dir, j["checkpoint_dir"].get<std::string>());
  else c.checkpoint_dir = c.output_dir / "checkpoints";
  take(j, "case_name", c.case_name, "config");
  c.validate();
  return c;
}

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  auto& in = j["inputs"];
  in["lines"] = c.inputs.lines.string();
  in["substations"] = c.inputs.substations.string();
  in["generators"] = c.inputs.generators.string();
  in["loads"] = c.inputs.loads.string();
  in["renewables"] = c.inputs.renewables.string();
  in["form1"] = c.inputs.form1.string();
  in["cost_catalog"] = c.inputs.cost_catalog.string();
  in["conductors"] = c.inputs.conductors.string();
  in["transformer_impedance"] = c.inputs.transformer_impedance.string();
  in["transformer_xr"] = c.inputs.transformer_xr.string();
  if (c.inputs.edits) in["edits"] = c.inputs.edits->string();
  j["topology"] = {{"radius_m", c.radius_m},
                   {"diagnose_radius_m", c.diagnose.radius_m},
                   {"diagnose_ratio", c.diagnose.ratio_threshold}};
  j["assignment"] = {{"k_nearest", c.k_nearest},
                     {"nuclear_per_mwh", c.costs.nuclear_per_mwh},
                     {"import_per_mwh", c.costs.import_per_mwh}};
  j["scenarios"] = {{"reserve_frac", c.commitment.reserve_frac},
                    {"exempt_renewables", c.commitment.exempt_renewables}};
  auto& l = j["lines"];
  for (const auto& [kv, gmd] : c.lines.gmd_ft) l["gmd_ft"][kv_key(kv)] = gmd;
  for (const auto& [kv, band] : c.lines.mva_bands) l["mva_bands"][kv_key(kv)] = {band.first, band.second};
  l["max_circuits"] = c.lines.max_circuits;
  l["dedup_tol"] = c.lines.dedup_tol;
  j["sizing"] = {{"lambda", c.sizing.lambda},
                 {"batch_frac", c.sizing.batch_frac},
                 {"underutil_frac", c.sizing.underutil_frac},
                 {"tau_initial", c.sizing.tau_initial},
                 {"tau_escalation_start", c.sizing.tau_escalation_start},
                 {"overload_tol_mw", c.sizing.overload_tol_mw},
                 {"max_iterations", c.sizing.max_iterations}};
  j["transformer_ladder"] = c.transformer_ladder;
  j["reactive"] = {{"condenser_mvar", c.reactive.condenser_mvar},
                   {"prune_frac", c.reactive.prune_frac},
                   {"coverage_stop", c.reactive.coverage_stop},
                   {"restore_threshold", c.reactive.restore_threshold},
                   {"max_iterations", c.reactive.max_iterations},
                   {"vmin", c.reactive.opf.vmin},
                   {"vmax", c.reactive.opf.vmax}};
  auto& e = j["evaluation"];
  e["first_hour"] = c.eval_first_hour;
  e["hours"] = c.eval_hours;
  e["stack_windows"] = ordered_json::array();
  for (const auto& w : c.stack_windows) {
    e["stack_windows"].push_back({{"name", w.name}, {"first_hour", w.first_hour}, {"last_hour", w.last_hour}});
  }
  j["rng_seed"] = c.rng_seed;
  j["output_dir"] = c.output_dir.string();
  j["checkpoint_dir"] = c.checkpoint_dir.string();
  j["case_name"] = c.case_name;
  return j;
}

RunConfig read_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return config_from_json(j, path.parent_path());
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kIngest: return "ingest";
    case Stage::kTopology: return "topology";
    case Stage::kAssign: return "assign";
    case Stage::kScenarios: return "scenarios";
    case Stage::kSize: return "size";
    case Stage::kReactive: return "reactive";
    case Stage::kEvaluate: return "evaluate";
  }
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  for (auto s : kAllStages) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError(fmt::format("unknown stage '{}'", name));
}

void load_inputs(PipelineState& state, const RunConfig& config) {
  geo::DatasetPaths paths{config.inputs.lines, config.inputs.substations, config.inputs.generators,
                          config.inputs.loads};
  state.data = geo::load_dataset(paths);
  state.loads = std::make_shared<const std::vector<geo::LoadRecord>>(state.data.loads);
  state.renewables = assignment::read_renewable_totals(config.inputs.renewables);
  if (state.renewables.hours() != state.data.hours()) {
    throw ValidationError(fmt::format("{}: {} hours of renewable totals for {} hours of load",
                                      config.inputs.renewables.string(), state.renewables.hours(), state.data.hours()));
  }
}

void run_stage(Stage stage, PipelineState& state, const RunConfig& config) {
  auto& model = state.model;
  ordered_json info;
  switch (stage) {
    case Stage::kIngest: {
      info["lines"] = state.data.lines.size();
      info["substations"] = state.data.substations.size();
      info["generators"] = state.data.generators.size();
      info["loads"] = state.data.loads.size();
      info["hours"] = state.data.hours();
      break;
    }
    case Stage::kTopology: {
      auto topo = topology::make_state(state.data.lines, state.data.substations);
      int edits = 0;
      if (config.inputs.edits) {
        auto script = topology::read_edit_script(*config.inputs.edits);
        topology::apply_edits(topo, script);
        edits = static_cast<int>(script.size());
      }
      int added = topology::connect_endpoints(topo, config.radius_m);
      int splits = topology::segment_branching_lines(topo, config.radius_m);
      added += topology::connect_endpoints(topo, config.radius_m);
      model = topology::build_model(topo);
      auto loops = topology::drop_self_loops(model);
      topology::attach_generators(model, state.data.generators);
      auto vsplit = topology::split_voltage_levels(model);
      auto kept = topology::largest_component(model);
      model.loads = state.loads;
      model.load_bus.assign(state.loads->size(), -1);
      state.diagnostics = topo.diagnostics;
      auto more = topology::diagnose(model, config.diagnose);
      state.diagnostics.insert(state.diagnostics.end(), more.begin(), more.end());
      info = {{"edits", edits},
              {"added_buses", added},
              {"segment_splits", splits},
              {"self_loops_dropped", loops.size()},
              {"voltage_split_buses", vsplit.buses_split},
              {"transformers", vsplit.transformers_added},
              {"buses", model.num_buses()},
              {"lines", model.num_lines()},
              {"branches", model.num_branches()},
              {"generators", model.generators.size()},
              {"bus_retention", kept.bus_fraction()},
              {"branch_retention", kept.branch_fraction()},
              {"generator_retention", kept.generator_fraction()},
              {"diagnostics", state.diagnostics.size()}};
      break;
    }
    case Stage::kAssign: {
      auto assigned = assignment::assign_model_loads(model, config.k_nearest);
      auto catalog = assignment::read_cost_catalog(config.inputs.cost_catalog);
      assignment::assign_costs(model.generators, catalog, config.costs);
      assignment::derive_q_limits(model.generators);
      std::set<int> served(model.load_bus.begin(), model.load_bus.end());
      info = {{"eligible_buses", assignment::eligible_buses(model).size()},
              {"load_buses", served.size()},
              {"assignment_miles", assigned.total_cost},
              {"integrality_gap", assigned.integrality_gap}};
      break;
    }
    case Stage::kScenarios: {
      state.scenarios = scenarios::build_injection_scenarios(model, state.renewables, config.commitment);
      info = {{"hours", state.scenarios.size() / 2},
              {"scenarios", state.scenarios.size()},
              {"min_reserve_margin", min_reserve_margin(model, state.scenarios)}};
      break;
    }
    case Stage::kSize: {
      auto catalog = lineparams::read_conductor_catalog(config.inputs.conductors);
      auto form1 = lineparams::read_form1(config.inputs.form1);
      auto tables = lineparams::read_transformer_tables(config.inputs.transformer_impedance,
                                                        config.inputs.transformer_xr);
      auto init = lineparams::init_lines(model, catalog, form1, config.lines);
      lineparams::init_transformers(model, tables);
      auto sizing_cfg = config.sizing;
      sizing_cfg.rng_seed = config.rng_seed;
      state.sizing = sizing::run_sizing(model, state.scenarios, sizing_cfg, config.lines);
      int resized = sizing::size_transformers(model, state.scenarios, tables, config.transformer_ladder);
      int max_circuits = 0;
      for (const auto& br : model.branches) {
        if (br.is_line()) max_circuits = std::max(max_circuits, br.circuits);
      }
      info = {{"lines", init.lines},
              {"band_adjusted", init.band_adjusted},
              {"out_of_band", init.out_of_band},
              {"iterations", state.sizing.trace.size()},
              {"final_tau", state.sizing.final_tau},
              {"final_overloaded", state.sizing.final_overloaded},
              {"upgrades", state.sizing.upgrades},
              {"downsizes", state.sizing.downsizes},
              {"max_circuits", max_circuits},
              {"transformers_resized", resized}};
      break;
    }
    case Stage::kReactive: {
      require_sized_parameters(model, stage);
      const auto& peak = peak_scenario(state.scenarios);
      auto cfg = config.reactive;
      cfg.opf.dc.committed = peak.dispatch.committed;
      auto saved = reactive::double_limits(model);
      state.reactive = reactive::place_and_prune(model, peak.scenario.caps, peak.scenario.bus_load_mw, cfg);
      int doubled = reactive::restore_limits(model, saved, state.reactive.solution.loading, cfg.restore_threshold);
      auto check = powerflow::ac_opf_surrogate(model, peak.scenario.caps, peak.scenario.bus_load_mw, cfg.opf);
      info = {{"peak_hour", peak.scenario.hour},
              {"active_condensers", state.reactive.active},
              {"coverage", static_cast<double>(state.reactive.active) / model.num_buses()},
              {"coverage_reached", state.reactive.coverage_reached},
              {"rollbacks", state.reactive.rollbacks},
              {"lines_kept_doubled", doubled},
              {"peak_ac_feasible", check.feasible}};
      if (!check.feasible) {
        spdlog::warn("peak case is not AC feasible after restoring limits: {}",
                     check.violations.empty() ? "unknown" : check.violations.front());
      }
      break;
    }
    case Stage::kEvaluate: {
      require_sized_parameters(model, stage);
      metrics::EvaluationOptions opts;
      opts.first_hour = config.eval_first_hour;
      opts.hours = config.eval_hours;
      opts.commitment = config.commitment;
      opts.opf = config.reactive.opf;
      state.report = metrics::yearly_evaluation(model, state.renewables, opts);
      info = {{"hours", state.report.rows.size()}, {"feasible_fraction", state.report.feasible_fraction}};
      const int last_hour = opts.first_hour + static_cast<int>(state.report.rows.size()) - 1;
      state.window_reports.clear();
      for (const auto& w : config.stack_windows) {
        if (w.first_hour >= opts.first_hour && w.last_hour <= last_hour) continue;
        auto wopts = opts;
        wopts.first_hour = w.first_hour;
        wopts.hours = w.last_hour - w.first_hour + 1;
        auto rep = metrics::yearly_evaluation(model, state.renewables, wopts);
        info["window_" + w.name + "_feasible_fraction"] = rep.feasible_fraction;
        state.window_reports[w.name] = std::move(rep);
      }
      break;
    }
  }
  state.summary[std::string(to_string(stage))] = std::move(info);
  state.last_stage = stage;
}

fs::path checkpoint_path(const RunConfig& config, Stage stage) { return config.checkpoint_dir / stage_dir_name(stage); }

void write_checkpoint(const PipelineState& state, const RunConfig& config, Stage stage) {
  auto dir = checkpoint_path(config, stage);
  fs::create_directories(dir);
  ordered_json j;
  j["stage"] = to_string(stage);
  j["rng_seed"] = config.rng_seed;
  j["summary"] = state.summary;
  j["has_model"] = stage != Stage::kIngest;
  j["has_scenarios"] = !state.scenarios.empty();
  spit(dir / "state.json", j.dump(2) + "\n");
  if (stage == Stage::kIngest) return;
  caseio::ExportOptions opts;
  opts.case_name = config.case_name;
  opts.require_parameters = false;
  caseio::write_case(dir / "case", state.model, opts);
  if (!state.scenarios.empty()) spit(dir / "scenarios.jsonl", scenarios::to_jsonl(state.model, state.scenarios));
  if (stage == Stage::kSize) spit(dir / "sizing_trace.jsonl", sizing::trace_jsonl(state.sizing));
  if (stage == Stage::kReactive) spit(dir / "reactive_trace.jsonl", reactive::trace_jsonl(state.reactive));
}

void read_checkpoint(PipelineState& state, const RunConfig& config, Stage stage) {
  auto dir = checkpoint_path(config, stage);
  if (!fs::exists(dir / "state.json")) {
    throw ValidationError(fmt::format("no checkpoint for stage '{}' at {}", to_string(stage), dir.string()));
  }
  auto j = json::parse(slurp(dir / "state.json"));
  if (j.value("rng_seed", config.rng_seed) != config.rng_seed) {
    spdlog::warn("checkpoint {} was written with seed {}", dir.string(), j["rng_seed"].get<std::uint64_t>());
  }
  state.summary = ordered_json::object();
  for (const auto& [k, v] : j.at("summary").items()) state.summary[k] = v;
  state.last_stage = stage;
  if (stage == Stage::kIngest) return;
  auto text = slurp(dir / "case.m");
  state.model = caseio::import_case(text, slurp(dir / "case.geojson"));
  auto ids = caseio::case_load_ids(text);
  if (ids.size() != state.loads->size()) {
    throw ValidationError(fmt::format("checkpoint {} has {} loads, inputs have {}", dir.string(), ids.size(),
                                      state.loads->size()));
  }
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] != (*state.loads)[k].tract_id) {
      throw ValidationError(fmt::format("checkpoint {} load {} is '{}', inputs have '{}'", dir.string(), k + 1,
                                        ids[k], (*state.loads)[k].tract_id));
    }
  }
  state.model.loads = state.loads;
  state.scenarios.clear();
  if (j.value("has_scenarios", false)) state.scenarios = scenarios::from_jsonl(state.model, slurp(dir / "scenarios.jsonl"));
}

namespace {

template <typename Fn>
void with_stage_context(Stage stage, const fs::path& checkpoint, Fn&& fn) {
  auto context = [&](const std::exception& e) {
    return fmt::format("stage '{}' failed (last checkpoint: {}): {}", to_string(stage),
                       checkpoint.empty() ? "none" : checkpoint.string(), e.what());
  };
  try {
    fn();
  } catch (const ValidationError& e) {
    throw ValidationError(context(e));
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(context(e));
  } catch (const NumericalError& e) {
    throw NumericalError(context(e));
  }
}

}  // namespace

PipelineState run_pipeline(const RunConfig& config, Stage first, Stage last) {
  config.validate();
  PipelineState state;
  fs::path last_checkpoint;
  with_stage_context(Stage::kIngest, last_checkpoint, [&] { load_inputs(state, config); });
  if (first != Stage::kIngest) {
    auto prev = static_cast<Stage>(static_cast<int>(first) - 1);
    with_stage_context(first, last_checkpoint, [&] { read_checkpoint(state, config, prev); });
    last_checkpoint = checkpoint_path(config, prev);
  }
  for (auto stage : kAllStages) {
    if (stage < first || stage > last) continue;
    spdlog::info("stage {}", to_string(stage));
    with_stage_context(stage, last_checkpoint, [&] {
      run_stage(stage, state, config);
      write_checkpoint(state, config, stage);
    });
    last_checkpoint = checkpoint_path(config, stage);
  }
  return state;
}

void write_outputs(const PipelineState& state, const RunConfig& config) {
  const auto& out = config.output_dir;
  fs::create_directories(out);
  ordered_json summary;
  summary["case_name"] = config.case_name;
  summary["rng_seed"] = config.rng_seed;
  summary["stages"] = state.summary;
  spit(out / "summary.json", summary.dump(2) + "\n");
  spit(out / "config.json", config_to_json(config).dump(2) + "\n");
  if (!state.last_stage || *state.last_stage == Stage::kIngest) return;
  caseio::ExportOptions opts;
  opts.case_name = config.case_name;
  opts.require_parameters = *state.last_stage >= Stage::kSize;
  caseio::write_case(out / config.case_name, state.model, opts);
  if (!state.diagnostics.empty()) spit(out / "diagnostics.csv", topology::diagnostics_csv(state.diagnostics));
  if (!state.scenarios.empty()) spit(out / "scenarios.jsonl", scenarios::to_jsonl(state.model, state.scenarios));
  if (!state.sizing.trace.empty()) spit(out / "sizing_trace.jsonl", sizing::trace_jsonl(state.sizing));
  if (!state.reactive.trace.empty()) spit(out / "reactive_trace.jsonl", reactive::trace_jsonl(state.reactive));
  if (!state.report.rows.empty()) {
    spit(out / "report.csv", metrics::report_csv(state.report));
    spit(out / "report.json", metrics::report_json(state.report));
    for (const auto& w : config.stack_windows) {
      auto it = state.window_reports.find(w.name);
      const auto& rep = it == state.window_reports.end() ? state.report : it->second;
      spit(out / fmt::format("dispatch_{}.csv", w.name),
           metrics::dispatch_stack(state.model, rep, w.first_hour, w.last_hour));
    }
  }
}

}  // namespace gridsynth::pipeline
