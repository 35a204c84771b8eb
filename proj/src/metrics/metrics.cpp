#include "gridsynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <spdlog/spdlog.h>

#include "gridsynth/error.hpp"

namespace gridsynth::metrics {

std::map<int, int> degree_distribution(const GridModel& model) {
  std::vector<int> degree(model.num_buses(), 0);
  for (const auto& br : model.branches) {
    if (!br.is_line()) continue;
    ++degree[br.from];
    ++degree[br.to];
  }
  std::map<int, int> hist;
  for (int d : degree) ++hist[d];
  return hist;
}

std::vector<BranchStatsRow> branch_stats(const GridModel& model) {
  std::map<double, BranchStatsRow> by_kv;
  int total = 0;
  for (const auto& br : model.branches) {
    if (!br.is_line()) continue;
    auto& row = by_kv[br.kv_from];
    row.kv = br.kv_from;
    ++row.lines;
    row.miles += br.length_miles;
    row.gva_miles += br.rate_mva / 1000.0 * br.length_miles;
    ++total;
  }
  std::vector<BranchStatsRow> out;
  for (auto it = by_kv.rbegin(); it != by_kv.rend(); ++it) {
    it->second.percent = total > 0 ? 100.0 * it->second.lines / total : 0.0;
    out.push_back(it->second);
  }
  return out;
}

Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return s;
}

EvaluationReport yearly_evaluation(const GridModel& model, const assignment::RenewableTotals& renewables,
                                   const EvaluationOptions& options) {
  const int available = std::min(model.hours(), renewables.hours());
  const int first = options.first_hour;
  const int last = options.hours > 0 ? first + options.hours : available;
  if (first < 0 || last > available || first >= last) {
    throw ValidationError(fmt::format("evaluation window [{}, {}) outside the {} hours of data", first, last, available));
  }
  const int ng = static_cast<int>(model.generators.size());
  EvaluationReport report;
  for (int h = first; h < last; ++h) {
    HourRow row;
    row.hour = h;
    auto sc = scenarios::make_scenario(model, renewables, h, scenarios::DispatchKind::kEconomic,
                                       scenarios::ScenarioTag::kYearlyEval);
    try {
      auto committed = scenarios::unit_commitment(model.generators, sc.caps, sc.total_load(), options.commitment);
      auto opf = options.opf;
      opf.dc.committed = committed;
      auto dc = powerflow::dc_opf(model, sc.caps, sc.bus_load_mw, opf.dc);
      row.dc_feasible = dc.feasible;
      if (dc.feasible) {
        row.dc_cost = dc.objective;
        row.dc_gen_mw = dc.total_pg_mw;
        row.dc_binding = dc.binding_lines;
        for (int g = 0; g < ng; ++g) {
          if (model.generators[g].is_renewable) row.curtailed_mw += std::max(0.0, sc.caps[g] - dc.pg_mw[g]);
        }
      }
      auto ac = powerflow::ac_opf_surrogate(model, sc.caps, sc.bus_load_mw, opf);
      row.ac_feasible = ac.feasible;
      row.ac_cost = ac.objective;
      row.ac_gen_mw = ac.total_pg_mw;
      row.ac_binding = ac.binding_lines;
      row.ac_pg_mw = ac.pg_mw;
      if (!dc.feasible) row.note = dc.violations.empty() ? "dc infeasible" : dc.violations.front();
      if (!ac.feasible && row.note.empty()) row.note = ac.violations.empty() ? "ac infeasible" : ac.violations.front();
    } catch (const std::exception& e) {
      row.note = e.what();
    }
    if (!row.feasible()) spdlog::warn("hour {}: {}", h, row.note);
    report.rows.push_back(std::move(row));
  }
  finalize_report(model, report);
  return report;
}

void finalize_report(const GridModel& model, EvaluationReport& report) {
  std::map<std::string, std::vector<double>> columns;
  int feasible = 0;
  std::map<std::string, double> by_fuel;
  double total = 0.0;
  for (const auto& r : report.rows) {
    if (!r.feasible()) continue;
    ++feasible;
    columns["dc_cost"].push_back(r.dc_cost);
    columns["ac_cost"].push_back(r.ac_cost);
    columns["dc_gen_mw"].push_back(r.dc_gen_mw);
    columns["ac_gen_mw"].push_back(r.ac_gen_mw);
    columns["dc_binding"].push_back(r.dc_binding);
    columns["ac_binding"].push_back(r.ac_binding);
    columns["curtailed_mw"].push_back(r.curtailed_mw);
    for (std::size_t g = 0; g < r.ac_pg_mw.size(); ++g) {
      by_fuel[std::string(geo::to_string(model.generators[g].fuel))] += r.ac_pg_mw[g];
      total += r.ac_pg_mw[g];
    }
  }
  report.summary.clear();
  for (auto& [name, values] : columns) report.summary[name] = summarize(std::move(values));
  report.feasible_fraction = report.rows.empty() ? 0.0 : static_cast<double>(feasible) / report.rows.size();
  report.fuel_mix.clear();
  for (const auto& [fuel, mw] : by_fuel) report.fuel_mix[fuel] = total > 0.0 ? mw / total : 0.0;
  report.degree_histogram = degree_distribution(model);
  report.branch_stats = branch_stats(model);
}

std::string report_csv(const EvaluationReport& report) {
  std::string out = "hour,dc_cost,ac_cost,dc_gen_mw,ac_gen_mw,dc_binding,ac_binding,curtailed_mw,feasible\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{:.17g},{}\n", r.hour, r.dc_cost, r.ac_cost,
                       r.dc_gen_mw, r.ac_gen_mw, r.dc_binding, r.ac_binding, r.curtailed_mw, r.feasible() ? 1 : 0);
  }
  return out;
}

std::string report_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["hours"] = report.rows.size();
  j["feasible_fraction"] = report.feasible_fraction;
  auto& summary = j["summary"] = nlohmann::ordered_json::object();
  for (const auto& [name, s] : report.summary) {
    summary[name] = {{"mean", s.mean}, {"median", s.median}, {"max", s.max}, {"min", s.min}};
  }
  auto& degrees = j["degree_histogram"] = nlohmann::ordered_json::object();
  for (const auto& [d, count] : report.degree_histogram) degrees[std::to_string(d)] = count;
  auto& branches = j["branch_stats"] = nlohmann::ordered_json::array();
  for (const auto& b : report.branch_stats) {
    branches.push_back(
        {{"kv", b.kv}, {"lines", b.lines}, {"percent", b.percent}, {"miles", b.miles}, {"gva_miles", b.gva_miles}});
  }
  j["fuel_mix"] = report.fuel_mix;
  auto& failures = j["infeasible_hours"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    if (!r.feasible()) failures.push_back({{"hour", r.hour}, {"reason", r.note}});
  }
  return j.dump(2) + "\n";
}

std::string dispatch_stack(const GridModel& model, const EvaluationReport& report, int first_hour, int last_hour) {
  std::set<std::string> fuels;
  for (const auto& g : model.generators) fuels.insert(std::string(geo::to_string(g.fuel)));
  std::string out = "hour,fuel,mw\n";
  for (const auto& r : report.rows) {
    if (r.hour < first_hour || r.hour > last_hour || !r.feasible()) continue;
    std::map<std::string, double> mw;
    for (const auto& f : fuels) mw[f] = 0.0;
    for (std::size_t g = 0; g < r.ac_pg_mw.size(); ++g) {
      mw[std::string(geo::to_string(model.generators[g].fuel))] += r.ac_pg_mw[g];
    }
    for (const auto& [fuel, value] : mw) out += fmt::format("{},{},{:.17g}\n", r.hour, fuel, value);
  }
  return out;
}

}  // namespace gridsynth::metrics
