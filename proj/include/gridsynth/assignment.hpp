#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gridsynth/geodata.hpp"
#include "gridsynth/model.hpp"

namespace gridsynth::assignment {

struct LoadAssignment {
  /// For each load, the position (into the eligible-bus list) it is assigned to.
  std::vector<int> target;
  double total_cost = 0.0;  // sum of assigned distances (miles)
  /// Largest distance of any LP variable from {0, 1}.
  double integrality_gap = 0.0;
  int lp_iterations = 0;
};

/// Sparse candidate costs: costs[i] lists (eligible position, c_ij) pairs.
using CandidateCosts = std::vector<std::vector<std::pair<int, double>>>;

/// Solves the LP relaxation of the transportation-style assignment
///   min sum c_ij x_ij  s.t. sum_j x_ij = 1 (each load), sum_i x_ij >= 1 (each bus).
/// Throws InfeasibleError when there are fewer loads than buses or the sparse
/// candidate set admits no assignment.
LoadAssignment solve_assignment(const CandidateCosts& costs, int num_buses);

/// Dense-cost convenience overload; costs[i][j] for load i and bus j.
LoadAssignment solve_assignment(const std::vector<std::vector<double>>& costs);

/// Distance-based assignment of load locations to bus locations with each
/// load's candidate list pruned to its `k_nearest` buses (each bus also keeps
/// its nearest loads). Falls back to the full matrix if pruning breaks
/// feasibility.
LoadAssignment assign_loads(std::span<const geo::GeoPoint> loads, std::span<const geo::GeoPoint> buses,
                            int k_nearest = 50);

/// Substation buses plus `added` buses at radial ends without generators.
std::vector<int> eligible_buses(const GridModel& model);

/// Assigns the model's load records to eligible buses and fills load_bus.
LoadAssignment assign_model_loads(GridModel& model, int k_nearest = 50);

struct CostReference {
  std::string plant_code;
  std::string unit_id;
  geo::FuelType fuel = geo::FuelType::kOther;
  double pmax_mw = 0.0;
  double c2 = 0.0, c1 = 0.0, c0 = 0.0;
};

std::vector<CostReference> read_cost_catalog(const std::filesystem::path& path);

struct CostConfig {
  double nuclear_per_mwh = 20.0;
  double import_per_mwh = 35.0;
};

/// Fuel used when looking up same-type references ("Other Natural Gas" reads
/// as steam-turbine gas, municipal solid waste as landfill gas).
geo::FuelType reference_fuel(geo::FuelType fuel);

/// Fills every generator's cost curve. Throws ValidationError naming the fuel
/// when a non-renewable has neither a key match nor a same-type reference.
void assign_costs(std::vector<Generator>& generators, const std::vector<CostReference>& catalog,
                  const CostConfig& config);

struct RenewableTotals {
  std::vector<double> solar_mw;
  std::vector<double> wind_mw;
  int hours() const { return static_cast<int>(solar_mw.size()); }
};

RenewableTotals read_renewable_totals(const std::filesystem::path& path);

struct ScaledCaps {
  std::vector<double> caps;  // per generator; pmax for non-scalable units
  bool solar_clipped = false;
  bool wind_clipped = false;
};

/// Scales solar and wind capacities in proportion to nameplate so they sum
/// to the given totals; totals above installed capacity clip at nameplate.
ScaledCaps scale_renewables(const std::vector<Generator>& generators, double solar_total_mw,
                            double wind_total_mw);

/// qmax = pmax * tan(acos(pf)), qmin = -qmax.
void derive_q_limits(std::vector<Generator>& generators);

}  // namespace gridsynth::assignment
