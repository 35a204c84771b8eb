#include "gridsynth/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <spdlog/spdlog.h>

#include "gridsynth/csv.hpp"
#include "gridsynth/error.hpp"
#include "gridsynth/solver.hpp"

namespace gridsynth::assignment {

LoadAssignment solve_assignment(const CandidateCosts& costs, int num_buses) {
  const int nloads = static_cast<int>(costs.size());
  if (nloads < num_buses) {
    throw InfeasibleError(fmt::format("load assignment infeasible: {} loads for {} buses", nloads, num_buses));
  }
  solver::LinearProgram lp;
  std::vector<std::vector<std::pair<int, int>>> vars(nloads);  // (bus, var)
  std::vector<solver::Constraint> bus_rows(num_buses);
  for (int j = 0; j < num_buses; ++j) {
    bus_rows[j].sense = solver::Sense::kGreaterEqual;
    bus_rows[j].rhs = 1.0;
  }
  for (int i = 0; i < nloads; ++i) {
    solver::Constraint row;
    row.sense = solver::Sense::kEqual;
    row.rhs = 1.0;
    for (auto [j, c] : costs[i]) {
      int v = lp.add_variable(c, 0.0, 1.0);
      vars[i].emplace_back(j, v);
      row.cols.push_back(v);
      row.coefs.push_back(1.0);
      bus_rows[j].cols.push_back(v);
      bus_rows[j].coefs.push_back(1.0);
    }
    lp.add_constraint(std::move(row));
  }
  for (auto& r : bus_rows) lp.add_constraint(std::move(r));

  auto res = solver::solve_lp(lp);
  if (res.status != solver::LpStatus::kOptimal) {
    throw InfeasibleError(std::string("load assignment LP: ") + solver::to_string(res.status));
  }
  LoadAssignment out;
  out.target.assign(nloads, -1);
  out.lp_iterations = res.iterations;
  for (int i = 0; i < nloads; ++i) {
    double best = -1.0;
    for (std::size_t k = 0; k < vars[i].size(); ++k) {
      double x = res.x[vars[i][k].second];
      out.integrality_gap = std::max(out.integrality_gap, std::min(std::abs(x), std::abs(1.0 - x)));
      if (x > best) {
        best = x;
        out.target[i] = vars[i][k].first;
      }
    }
    for (auto [j, c] : costs[i]) {
      if (j == out.target[i]) {
        out.total_cost += c;
        break;
      }
    }
  }
  return out;
}

LoadAssignment solve_assignment(const std::vector<std::vector<double>>& costs) {
  CandidateCosts sparse(costs.size());
  int nbus = costs.empty() ? 0 : static_cast<int>(costs.front().size());
  for (std::size_t i = 0; i < costs.size(); ++i) {
    for (int j = 0; j < nbus; ++j) sparse[i].emplace_back(j, costs[i][j]);
  }
  return solve_assignment(sparse, nbus);
}

LoadAssignment assign_loads(std::span<const geo::GeoPoint> loads, std::span<const geo::GeoPoint> buses,
                            int k_nearest) {
  const int nl = static_cast<int>(loads.size());
  const int nb = static_cast<int>(buses.size());
  if (nl < nb) {
    throw InfeasibleError(fmt::format("load assignment infeasible: {} loads for {} buses", nl, nb));
  }
  std::vector<std::vector<double>> dist(nl, std::vector<double>(nb));
  for (int i = 0; i < nl; ++i) {
    for (int j = 0; j < nb; ++j) dist[i][j] = geo::geo_distance(loads[i], buses[j]) / geo::kMetersPerMile;
  }
  if (k_nearest <= 0 || k_nearest >= nb) return solve_assignment(dist);

  std::vector<std::vector<bool>> keep(nl, std::vector<bool>(nb, false));
  std::vector<int> order(nb);
  for (int i = 0; i < nl; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k_nearest, order.end(),
                      [&](int a, int b) { return dist[i][a] != dist[i][b] ? dist[i][a] < dist[i][b] : a < b; });
    for (int k = 0; k < k_nearest; ++k) keep[i][order[k]] = true;
  }
  std::vector<int> lorder(nl);
  for (int j = 0; j < nb; ++j) {
    std::iota(lorder.begin(), lorder.end(), 0);
    int kk = std::min(k_nearest, nl);
    std::partial_sort(lorder.begin(), lorder.begin() + kk, lorder.end(),
                      [&](int a, int b) { return dist[a][j] != dist[b][j] ? dist[a][j] < dist[b][j] : a < b; });
    for (int k = 0; k < kk; ++k) keep[lorder[k]][j] = true;
  }
  CandidateCosts sparse(nl);
  for (int i = 0; i < nl; ++i) {
    for (int j = 0; j < nb; ++j) {
      if (keep[i][j]) sparse[i].emplace_back(j, dist[i][j]);
    }
  }
  try {
    return solve_assignment(sparse, nb);
  } catch (const InfeasibleError&) {
    spdlog::warn("pruned load assignment infeasible; retrying with the full distance matrix");
    return solve_assignment(dist);
  }
}

std::vector<int> eligible_buses(const GridModel& model) {
  std::vector<int> degree(model.num_buses(), 0);
  for (const auto& br : model.branches) {
    ++degree[br.from];
    ++degree[br.to];
  }
  std::vector<bool> has_gen(model.num_buses(), false);
  for (const auto& g : model.generators) has_gen[g.bus] = true;
  std::vector<int> out;
  for (int b = 0; b < model.num_buses(); ++b) {
    const auto& bus = model.buses[b];
    if (bus.kind == BusKind::kSubstation ||
        (bus.kind == BusKind::kAdded && degree[b] == 1 && !has_gen[b])) {
      out.push_back(b);
    }
  }
  return out;
}

LoadAssignment assign_model_loads(GridModel& model, int k_nearest) {
  if (!model.loads) throw ValidationError("assign_model_loads: model has no load records");
  auto eligible = eligible_buses(model);
  std::vector<geo::GeoPoint> load_pts, bus_pts;
  for (const auto& l : *model.loads) load_pts.push_back(l.location);
  for (int b : eligible) bus_pts.push_back(model.buses[b].location);
  auto result = assign_loads(load_pts, bus_pts, k_nearest);
  model.load_bus.assign(model.loads->size(), -1);
  for (std::size_t i = 0; i < result.target.size(); ++i) model.load_bus[i] = eligible[result.target[i]];
  return result;
}

std::vector<CostReference> read_cost_catalog(const std::filesystem::path& path) {
  auto t = csv::read(path);
  int c_plant = t.column("plant_code"), c_unit = t.column("unit_id"), c_fuel = t.column("fuel"),
      c_pmax = t.column("pmax_mw"), c2 = t.column("c2"), c1 = t.column("c1"), c0 = t.column("c0");
  std::vector<CostReference> out;
  for (const auto& r : t.rows) {
    CostReference ref;
    ref.plant_code = r.fields[c_plant];
    ref.unit_id = r.fields[c_unit];
    auto fuel = geo::parse_fuel(r.fields[c_fuel]);
    if (!fuel) {
      throw ValidationError(fmt::format("{}:{}: field 'fuel' has unknown value '{}'", t.source, r.line,
                                        r.fields[c_fuel]));
    }
    ref.fuel = *fuel;
    ref.pmax_mw = csv::to_double(t, r, c_pmax, "pmax_mw");
    ref.c2 = csv::to_double(t, r, c2, "c2");
    ref.c1 = csv::to_double(t, r, c1, "c1");
    ref.c0 = csv::to_double(t, r, c0, "c0");
    if (ref.c2 < 0.0) throw ValidationError(fmt::format("{}:{}: field 'c2' must be >= 0", t.source, r.line));
    out.push_back(std::move(ref));
  }
  return out;
}

geo::FuelType reference_fuel(geo::FuelType fuel) {
  switch (fuel) {
    case geo::FuelType::kOtherNaturalGas: return geo::FuelType::kGasSteamTurbine;
    case geo::FuelType::kMunicipalSolidWaste: return geo::FuelType::kLandfillGas;
    default: return fuel;
  }
}

void assign_costs(std::vector<Generator>& generators, const std::vector<CostReference>& catalog,
                  const CostConfig& config) {
  std::vector<std::string> missing;
  for (auto& g : generators) {
    if (g.is_renewable) {
      g.cost = CostCurve::zero();
      continue;
    }
    if (g.fuel == geo::FuelType::kNuclear) {
      g.cost = CostCurve::linear(config.nuclear_per_mwh);
      continue;
    }
    if (g.fuel == geo::FuelType::kImport) {
      g.cost = CostCurve::linear(config.import_per_mwh);
      continue;
    }
    const CostReference* match = nullptr;
    if (g.plant_code && g.unit_id) {
      for (const auto& ref : catalog) {
        if (ref.plant_code == *g.plant_code && ref.unit_id == *g.unit_id) {
          match = &ref;
          break;
        }
      }
    }
    if (!match) {
      auto fuel = reference_fuel(g.fuel);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& ref : catalog) {
        if (ref.fuel != fuel) continue;
        double d = std::abs(ref.pmax_mw - g.pmax_mw);
        if (d < best) {
          best = d;
          match = &ref;
        }
      }
    }
    if (!match) {
      missing.push_back(std::string(geo::to_string(g.fuel)));
      continue;
    }
    g.cost = CostCurve::quadratic(match->c2, match->c1, match->c0);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string list;
    for (const auto& f : missing) list += (list.empty() ? "" : ", ") + f;
    throw ValidationError("no cost reference for fuel type(s): " + list);
  }
}

RenewableTotals read_renewable_totals(const std::filesystem::path& path) {
  auto t = csv::read(path);
  int c_hour = t.column("hour"), c_solar = t.column("solar_mw"), c_wind = t.column("wind_mw");
  RenewableTotals out;
  long long expect = 0;
  for (const auto& r : t.rows) {
    long long h = csv::to_int(t, r, c_hour, "hour");
    if (h != expect) {
      throw ValidationError(fmt::format("{}:{}: hours must be consecutive from 0 (expected {}, found {})",
                                        t.source, r.line, expect, h));
    }
    ++expect;
    double s = csv::to_double(t, r, c_solar, "solar_mw");
    double w = csv::to_double(t, r, c_wind, "wind_mw");
    if (s < 0.0 || w < 0.0) throw ValidationError(fmt::format("{}:{}: negative renewable total", t.source, r.line));
    out.solar_mw.push_back(s);
    out.wind_mw.push_back(w);
  }
  return out;
}

ScaledCaps scale_renewables(const std::vector<Generator>& generators, double solar_total_mw,
                            double wind_total_mw) {
  if (solar_total_mw < 0.0 || wind_total_mw < 0.0) {
    throw ValidationError("scale_renewables: renewable totals must be >= 0");
  }
  double solar_installed = 0.0, wind_installed = 0.0;
  for (const auto& g : generators) {
    if (g.fuel == geo::FuelType::kSolar) solar_installed += g.pmax_mw;
    if (g.fuel == geo::FuelType::kWind) wind_installed += g.pmax_mw;
  }
  ScaledCaps out;
  out.caps.resize(generators.size());
  out.solar_clipped = solar_total_mw > solar_installed && solar_installed > 0.0;
  out.wind_clipped = wind_total_mw > wind_installed && wind_installed > 0.0;
  for (std::size_t i = 0; i < generators.size(); ++i) {
    const auto& g = generators[i];
    double cap = g.pmax_mw;
    if (g.fuel == geo::FuelType::kSolar) {
      cap = g.pmax_mw / solar_installed * solar_total_mw;
    } else if (g.fuel == geo::FuelType::kWind) {
      cap = g.pmax_mw / wind_installed * wind_total_mw;
    }
    out.caps[i] = std::min(cap, g.pmax_mw);
  }
  return out;
}

void derive_q_limits(std::vector<Generator>& generators) {
  for (auto& g : generators) {
    if (!(g.power_factor > 0.0 && g.power_factor <= 1.0)) {
      throw ValidationError("generator '" + g.id + "': power factor must lie in (0, 1]");
    }
    double q = g.power_factor >= 1.0 ? 0.0 : g.pmax_mw * std::tan(std::acos(g.power_factor));
    g.qmax_mvar = q;
    g.qmin_mvar = -q;
  }
}

}  // namespace gridsynth::assignment
