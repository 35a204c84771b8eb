#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridsynth/geodata.hpp"

namespace gridsynth {

enum class BusKind { kSubstation, kAdded, kVoltageSplit };

struct Bus {
  std::string id;
  double voltage_kv = 0.0;
  BusKind kind = BusKind::kAdded;
  geo::GeoPoint location;
  /// Source substation id; set only for kSubstation buses.
  std::optional<std::string> origin;
  /// For kVoltageSplit buses, the id of the bus they were split from.
  std::string parent;
};

enum class BranchKind { kLine, kTransformer };

/// One entry of a line's conductor table: a conductor type strung on
/// `circuits` parallel circuits.
struct ConductorOption {
  std::string name;
  double size_kcmil = 0.0;
  double ampacity_a = 0.0;
  double r_per_mile = 0.0;  // ohm/mi, one circuit
  double gmr_ft = 0.0;
  int circuits = 1;
  double mva = 0.0;  // sqrt(3) * kV * kA * circuits
};

struct Branch {
  std::string id;
  int from = -1;
  int to = -1;
  BranchKind kind = BranchKind::kLine;
  geo::LinePath path;  // empty for transformers
  double kv_from = 0.0;
  double kv_to = 0.0;
  double length_miles = 0.0;

  // Electrical parameters on the system base.
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;
  double rate_mva = 0.0;

  // Lines: index into `options`; transformers: unused.
  int option_index = -1;
  int circuits = 1;
  bool doubled = false;
  std::vector<ConductorOption> options;

  // Transformers.
  double xr_ratio = 0.0;

  bool is_line() const { return kind == BranchKind::kLine; }
  bool is_transformer() const { return kind == BranchKind::kTransformer; }
};

enum class CostKind { kQuadratic, kLinear, kZero };

struct CostCurve {
  double c2 = 0.0;  // $/MW^2h
  double c1 = 0.0;  // $/MWh
  double c0 = 0.0;  // $/h
  CostKind kind = CostKind::kZero;

  static CostCurve zero() { return {}; }
  static CostCurve linear(double c1) { return {0.0, c1, 0.0, CostKind::kLinear}; }
  static CostCurve quadratic(double c2, double c1, double c0);

  double cost(double p) const { return (c2 * p + c1) * p + c0; }
  double marginal(double p) const { return 2.0 * c2 * p + c1; }
  /// Average cost at output p (> 0): cost(p) / p.
  double average(double p) const { return cost(p) / p; }
};

struct Generator {
  std::string id;
  int bus = -1;
  geo::FuelType fuel = geo::FuelType::kOther;
  double pmax_mw = 0.0;
  double pmin_mw = 0.0;
  double qmax_mvar = 0.0;
  double qmin_mvar = 0.0;
  double power_factor = 1.0;
  CostCurve cost;
  bool is_renewable = false;
  bool scalable_cap = false;
  std::optional<std::string> plant_code;
  std::optional<std::string> unit_id;
};

struct Condenser {
  int bus = -1;
  double qmax_mvar = 200.0;
  bool active = true;

  double qmin_mvar() const { return -qmax_mvar; }
};

/// The evolving grid artifact. Load profiles are shared read-only between
/// copies; `load_bus` maps each load record to its bus.
struct GridModel {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<Condenser> condensers;
  std::shared_ptr<const std::vector<geo::LoadRecord>> loads;
  std::vector<int> load_bus;
  /// Power factor applied to every bus load for reactive demand.
  double load_power_factor = 0.98;

  int num_buses() const { return static_cast<int>(buses.size()); }
  int num_branches() const { return static_cast<int>(branches.size()); }
  int num_lines() const;
  int hours() const;

  /// Index of the bus with id `id`, or -1.
  int find_bus(const std::string& id) const;
  int find_branch(const std::string& id) const;

  /// Real-power demand per bus at `hour`, MW.
  std::vector<double> bus_load_mw(int hour) const;
  /// Total system demand at every hour, MW.
  std::vector<double> system_load_mw() const;
};

/// Removes the buses whose mask entry is false along with every element
/// attached to them, and renumbers indices.
void retain_buses(GridModel& model, const std::vector<bool>& keep);

std::string_view to_string(BusKind kind);
std::string_view to_string(BranchKind kind);
std::string_view to_string(CostKind kind);

}  // namespace gridsynth
